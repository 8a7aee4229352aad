"""Epsilon-tube support vector regression with an RBF kernel.

Each target gets its own single-output SVR.  The dual problem is solved by
pairwise coordinate optimization (SMO) with maximal-violating-pair working
set selection on the 2n-variable split (alpha, alpha*):

    minimize   1/2 (a - a*)' K (a - a*) + eps * sum(a + a*) - y'(a - a*)
    subject to sum(a) = sum(a*),  0 <= a, a* <= C

Convergence is declared when the maximal KKT violation drops below ``tol``.
The kernel width follows the common 'scale' default, gamma = 1 / (d * var(X)).

Parameter layout per target: support vectors (n_sv, d) row-major, then the
n_sv dual coefficients (beta = alpha - alpha*), then the intercept.
"""

from __future__ import annotations

import numpy as np

from ..core import ModelSpec, ModelState, TrainingError
from .common import TrainConfig, as_xy, fit_norm

DEFAULT_C = 1.0
DEFAULT_EPSILON = 0.1
KKT_TOL = 1e-3
MAX_ITER = 100_000

# dense kernel matrices are precomputed up to this many rows
_DENSE_LIMIT = 4096
_COLUMN_CACHE = 512


class _Kernel:
    """RBF kernel with optional dense precomputation and a column cache."""

    def __init__(self, x: np.ndarray, gamma: float):
        self.x = x
        self.gamma = gamma
        self.n = x.shape[0]
        self.sq = np.einsum("ij,ij->i", x, x)
        if self.n <= _DENSE_LIMIT:
            d2 = self.sq[:, None] + self.sq[None, :] - 2.0 * (x @ x.T)
            np.maximum(d2, 0.0, out=d2)
            self.dense = np.exp(-gamma * d2)
        else:
            self.dense = None
            self._cache: dict[int, np.ndarray] = {}

    def column(self, i: int) -> np.ndarray:
        if self.dense is not None:
            return self.dense[i]
        col = self._cache.get(i)
        if col is None:
            d2 = self.sq + self.sq[i] - 2.0 * (self.x @ self.x[i])
            np.maximum(d2, 0.0, out=d2)
            col = np.exp(-self.gamma * d2)
            if len(self._cache) >= _COLUMN_CACHE:
                self._cache.pop(next(iter(self._cache)))
            self._cache[i] = col
        return col


def scale_gamma(x: np.ndarray) -> float:
    var = float(x.var())
    if var <= 0:
        var = 1.0
    return 1.0 / (x.shape[1] * var)


def fit_epsilon_svr(
    x: np.ndarray,
    y: np.ndarray,
    c: float = DEFAULT_C,
    epsilon: float = DEFAULT_EPSILON,
    gamma: float | None = None,
    tol: float = KKT_TOL,
    max_iter: int = MAX_ITER,
) -> tuple[np.ndarray, float, float]:
    """Solve one epsilon-SVR; returns (beta, intercept, gamma).

    ``beta`` has one (possibly zero) dual coefficient per training row.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    if gamma is None:
        gamma = scale_gamma(x)
    kernel = _Kernel(x, gamma)

    alpha = np.zeros(n)  # positive-side duals
    alpha_star = np.zeros(n)  # negative-side duals
    k_beta = np.zeros(n)  # K @ (alpha - alpha_star), maintained incrementally

    # selection scores: g_up for raising beta, g_down for lowering it
    # g_alpha[p] = y[p] - k_beta[p] - eps ; g_alpha_star[p] = y[p] - k_beta[p] + eps
    for it in range(max_iter):
        resid = y - k_beta
        g_alpha = resid - epsilon
        g_star = resid + epsilon
        # I_up: variables that may increase their beta contribution
        up_alpha = alpha < c
        up_star = alpha_star > 0
        # I_low: variables that may decrease it
        low_alpha = alpha > 0
        low_star = alpha_star < c

        up_scores = np.where(up_alpha, g_alpha, -np.inf)
        up_scores_star = np.where(up_star, g_star, -np.inf)
        low_scores = np.where(low_alpha, g_alpha, np.inf)
        low_scores_star = np.where(low_star, g_star, np.inf)

        i_a = int(np.argmax(up_scores))
        i_s = int(np.argmax(up_scores_star))
        if up_scores_star[i_s] > up_scores[i_a]:
            i, gi, i_is_star = i_s, up_scores_star[i_s], True
        else:
            i, gi, i_is_star = i_a, up_scores[i_a], False

        j_a = int(np.argmin(low_scores))
        j_s = int(np.argmin(low_scores_star))
        if low_scores_star[j_s] < low_scores[j_a]:
            j, gj, j_is_star = j_s, low_scores_star[j_s], True
        else:
            j, gj, j_is_star = j_a, low_scores[j_a], False

        if gi - gj <= tol:
            # converged: both scores have collapsed onto the bias (KKT band)
            intercept = 0.5 * (gi + gj)
            beta = alpha - alpha_star
            return beta, float(intercept), float(gamma)

        ki = kernel.column(i)
        kj = kernel.column(j)
        eta = ki[i] + kj[j] - 2.0 * ki[j]
        if eta < 1e-12:
            eta = 1e-12
        step = (gi - gj) / eta

        # box limits: raising beta_i means alpha[i]->C or alpha_star[i]->0;
        # lowering beta_j means alpha[j]->0 or alpha_star[j]->C
        limit_i = alpha_star[i] if i_is_star else c - alpha[i]
        limit_j = c - alpha_star[j] if j_is_star else alpha[j]
        step = min(step, limit_i, limit_j)

        if i_is_star:
            alpha_star[i] -= step
        else:
            alpha[i] += step
        if j_is_star:
            alpha_star[j] += step
        else:
            alpha[j] -= step
        k_beta += step * (ki - kj)

    raise TrainingError(
        f"svr failed to reach KKT tolerance {tol} within {max_iter} iterations"
    )


def train_svr(
    train,
    cfg: TrainConfig = TrainConfig(),
    feature_subset: str = "full",
    c: float = DEFAULT_C,
    epsilon: float = DEFAULT_EPSILON,
) -> ModelState:
    """Two independent epsilon-SVRs (one per target) on z-scored features."""
    x, y = as_xy(train)
    norm = fit_norm(x)
    xz = norm.apply(x)
    gamma = scale_gamma(xz)
    parts = []
    n_sv: list[int] = []
    gammas: list[float] = []
    intercepts: list[float] = []
    for target in range(2):
        beta, intercept, g = fit_epsilon_svr(
            xz, y[:, target], c=c, epsilon=epsilon, gamma=gamma
        )
        sv_mask = np.abs(beta) > 1e-12
        sv = xz[sv_mask]
        coef = beta[sv_mask]
        parts.append(np.concatenate([sv.ravel(), coef, [intercept]]))
        n_sv.append(int(sv.shape[0]))
        gammas.append(g)
        intercepts.append(intercept)
    spec = ModelSpec(
        kind="svr",
        input_dim=x.shape[1],
        feature_subset=feature_subset,
        extra={
            "C": c,
            "epsilon": epsilon,
            "gamma": gammas,
            "n_sv": n_sv,
        },
    )
    return ModelState(
        spec=spec, norm=norm, params=np.concatenate(parts), seed=cfg.seed
    )


def svr_raw_outputs(model: ModelState, xz: np.ndarray) -> np.ndarray:
    d = model.spec.input_dim
    n_sv = model.spec.extra["n_sv"]
    gammas = model.spec.extra["gamma"]
    out = np.empty((xz.shape[0], 2))
    off = 0
    for target in range(2):
        n = n_sv[target]
        sv = model.params[off : off + n * d].reshape(n, d)
        off += n * d
        coef = model.params[off : off + n]
        off += n
        intercept = model.params[off]
        off += 1
        if n == 0:
            out[:, target] = intercept
            continue
        d2 = (
            np.einsum("ij,ij->i", xz, xz)[:, None]
            + np.einsum("ij,ij->i", sv, sv)[None, :]
            - 2.0 * (xz @ sv.T)
        )
        np.maximum(d2, 0.0, out=d2)
        out[:, target] = np.exp(-gammas[target] * d2) @ coef + intercept
    return out
