"""Mean predictor and closed-form linear regression."""

from __future__ import annotations

import numpy as np

from ..core import ModelSpec, ModelState
from .common import TrainConfig, as_xy, fit_norm

# Ridge damping on the Gram diagonal; keeps degenerate designs solvable
# without noticeably biasing well-posed ones.
RIDGE = 1e-8


def train_dummy(train, cfg: TrainConfig = TrainConfig(), feature_subset: str = "full") -> ModelState:
    """Constant predictor: the per-target mean of the training labels."""
    x, y = as_xy(train)
    spec = ModelSpec(kind="dummy", input_dim=x.shape[1], feature_subset=feature_subset)
    return ModelState(
        spec=spec,
        norm=fit_norm(x),
        params=y.mean(axis=0),
        seed=cfg.seed,
    )


def train_linear(train, cfg: TrainConfig = TrainConfig(), feature_subset: str = "full") -> ModelState:
    """Ordinary least squares on z-scored features with bias.

    Solved by normal equations with ridge damping on the Gram diagonal; one
    weight row per target.  Deterministic, ``cfg.seed`` is unused.
    """
    x, y = as_xy(train)
    norm = fit_norm(x)
    xz = norm.apply(x)
    n, d = xz.shape
    design = np.hstack([xz, np.ones((n, 1))])
    gram = design.T @ design
    gram[np.diag_indices_from(gram)] += RIDGE
    coef = np.linalg.solve(gram, design.T @ y)  # (d+1, 2)
    weights = coef[:d].T  # (2, d)
    bias = coef[d]  # (2,)
    params = np.concatenate([weights.ravel(), bias])
    spec = ModelSpec(kind="linear", input_dim=d, feature_subset=feature_subset)
    return ModelState(spec=spec, norm=norm, params=params, seed=cfg.seed)


def linear_raw_outputs(model: ModelState, xz: np.ndarray) -> np.ndarray:
    d = model.spec.input_dim
    weights = model.params[: 2 * d].reshape(2, d)
    bias = model.params[2 * d :]
    return xz @ weights.T + bias


def dummy_raw_outputs(model: ModelState, xz: np.ndarray) -> np.ndarray:
    return np.tile(model.params, (xz.shape[0], 1))
