"""Training configuration, Adam, and helpers shared by the regressors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import (
    HALF_PI,
    AlignedSample,
    NormStats,
    TargetPair,
    ValidationError,
)

FEATURE_SUBSETS: dict[str, tuple[int, ...]] = {
    "full": tuple(range(10)),
    "exo_only": (0, 1),
    "emg_only": tuple(range(2, 10)),
}


def subset_columns(name: str) -> tuple[int, ...]:
    try:
        return FEATURE_SUBSETS[name]
    except KeyError:
        raise ValidationError(f"unknown feature subset {name!r}") from None


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings (MSE loss, Adam); no early stopping."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 200
    # samples per step for the MLP, sequences per step for the LSTM;
    # None means full batch
    batch: int | None = 64
    seed: int = 0
    loss: str = "mean_squared_error"

    def __post_init__(self):
        # epochs == 0 is allowed as a determinism anchor: training then
        # returns the seeded initialization untouched
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.lr <= 0:
            raise ValidationError("lr must be positive")
        if self.loss != "mean_squared_error":
            raise ValidationError(f"unsupported loss {self.loss!r}")


class Adam:
    """Adam on a flat parameter vector (updates in place)."""

    def __init__(self, n_params: int, cfg: TrainConfig):
        self.cfg = cfg
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        c = self.cfg
        self.t += 1
        self.m = c.beta1 * self.m + (1.0 - c.beta1) * grad
        self.v = c.beta2 * self.v + (1.0 - c.beta2) * grad * grad
        m_hat = self.m / (1.0 - c.beta1 ** self.t)
        v_hat = self.v / (1.0 - c.beta2 ** self.t)
        params -= c.lr * m_hat / (np.sqrt(v_hat) + c.eps)


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def clamp_outputs(raw: np.ndarray) -> np.ndarray:
    """Project raw (n, 2) outputs onto the physical target ranges."""
    out = np.asarray(raw, dtype=np.float64).copy()
    out[..., 0] = np.clip(out[..., 0], 0.0, HALF_PI)
    out[..., 1] = np.clip(out[..., 1], -1.0, 1.0)
    return out


def as_xy(train) -> tuple[np.ndarray, np.ndarray]:
    """Accept a list of labeled AlignedSamples or an (X, Y) array pair."""
    if isinstance(train, tuple):
        x, y = train
        x = np.asarray(x, dtype=np.float64)
        y = None if y is None else np.asarray(y, dtype=np.float64)
    else:
        rows = [s for s in train if isinstance(s, AlignedSample)]
        if len(rows) != len(train):
            raise ValidationError("training data must be AlignedSamples or (X, Y)")
        labeled = [s for s in rows if s.y is not None]
        x = np.array([s.feature_vector() for s in labeled], dtype=np.float64)
        y = np.array(
            [[s.y.opening, s.y.compliance] for s in labeled], dtype=np.float64
        )
        x = x.reshape(len(labeled), -1)
        y = y.reshape(len(labeled), 2)
    if y is None or y.size == 0:
        raise ValidationError("no labeled samples to train on")
    if x.ndim != 2 or y.shape != (x.shape[0], 2):
        raise ValidationError(f"bad training shapes x{x.shape} y{None if y is None else y.shape}")
    if not np.isfinite(x).all() or not np.isfinite(y).all():
        raise ValidationError("non-finite values in training data")
    return x, y


def fit_norm(x: np.ndarray) -> NormStats:
    return NormStats.from_data(x)


def targets_to_pairs(raw: np.ndarray) -> list[TargetPair]:
    clamped = clamp_outputs(raw)
    return [TargetPair(float(a), float(b)) for a, b in clamped]
