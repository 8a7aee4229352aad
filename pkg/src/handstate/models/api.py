"""Prediction, training dispatch, and the finite-difference gradient check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import ModelSpec, ModelState, TargetPair, ValidationError
from . import lstm as lstm_mod
from . import mlp as mlp_mod
from .baselines import dummy_raw_outputs, linear_raw_outputs, train_dummy, train_linear
from .common import TrainConfig, clamp_outputs
from .lstm import LstmStepper, train_lstm
from .mlp import train_mlp
from .svr import svr_raw_outputs, train_svr

TRAINERS = {
    "dummy": train_dummy,
    "linear": train_linear,
    "mlp": train_mlp,
    "svr": train_svr,
    "lstm": train_lstm,
}

STATEFUL_KINDS = ("lstm",)


def train(kind: str, train_data, cfg: TrainConfig = TrainConfig(), feature_subset: str = "full", **kwargs) -> ModelState:
    """Train any architecture by name.

    Stateless kinds take pooled samples (or an (X, Y) pair); the LSTM takes a
    list of sequences and is handed one automatically when given pooled data.
    """
    try:
        trainer = TRAINERS[kind]
    except KeyError:
        raise ValidationError(f"unknown model kind {kind!r}") from None
    return trainer(train_data, cfg, feature_subset=feature_subset, **kwargs)


def _check_features(model: ModelState, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != model.spec.input_dim:
        raise ValidationError(
            f"feature rows have dimension {x.shape[-1] if x.ndim else 0}, "
            f"model expects {model.spec.input_dim}"
        )
    return x


def predict_array(model: ModelState, x: np.ndarray, stateful: bool | None = None) -> np.ndarray:
    """Predict raw feature rows -> clamped (n, 2) outputs.

    Stateless models map rows independently; the LSTM consumes the rows as
    one contiguous sequence starting from a reset state.  Use
    :class:`StatefulPredictor` to carry state across calls.
    """
    x = _check_features(model, x)
    xz = model.norm.apply(x)
    kind = model.spec.kind
    if kind == "dummy":
        raw = dummy_raw_outputs(model, xz)
    elif kind == "linear":
        raw = linear_raw_outputs(model, xz)
    elif kind == "mlp":
        raw = mlp_mod.mlp_raw_outputs(model, xz)
    elif kind == "svr":
        raw = svr_raw_outputs(model, xz)
    elif kind == "lstm":
        raw = LstmStepper(model).run(xz)
    else:
        raise ValidationError(f"unknown model kind {kind!r}")
    return clamp_outputs(raw)


def predict(model: ModelState, samples, stateful: bool | None = None) -> list[TargetPair]:
    """Predict aligned samples (or raw rows) as a list of TargetPairs."""
    if isinstance(samples, np.ndarray):
        x = samples
    else:
        x = np.array([s.feature_vector() for s in samples], dtype=np.float64)
        x = x.reshape(len(samples), -1)
    out = predict_array(model, x, stateful=stateful)
    return [TargetPair(float(a), float(b)) for a, b in out]


class StatefulPredictor:
    """Streaming predictor: one mutable state handle per stream.

    Stateless models ignore the state; the LSTM carries hidden state, so
    predicting a sequence in chunks equals predicting it in one call.
    """

    def __init__(self, model: ModelState):
        self.model = model
        self._stepper = LstmStepper(model) if model.spec.kind == "lstm" else None

    def reset(self) -> None:
        if self._stepper is not None:
            self._stepper.reset()

    def step(self, row: np.ndarray) -> np.ndarray:
        """One raw feature row -> clamped (2,) prediction."""
        row = np.asarray(row, dtype=np.float64).reshape(-1)
        if row.size != self.model.spec.input_dim:
            raise ValidationError(
                f"feature row has {row.size} values, model expects "
                f"{self.model.spec.input_dim}"
            )
        if self._stepper is None:
            return predict_array(self.model, row.reshape(1, -1))[0]
        xz = (row - self.model.norm.mean) / self.model.norm.std
        return clamp_outputs(self._stepper.step(xz).reshape(1, 2))[0]

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = _check_features(self.model, x)
        if self._stepper is None:
            return predict_array(self.model, x)
        xz = self.model.norm.apply(x)
        return clamp_outputs(self._stepper.run(xz))


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GradientCheckReport:
    """Worst-case analytic-vs-numeric gradient agreement."""

    max_relative_error: float
    worst_index: int
    n_params: int


def _relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    denom = np.maximum(1e-12, np.abs(analytic) + np.abs(numeric))
    return np.abs(analytic - numeric) / denom


def gradient_check(spec: ModelSpec, seed: int = 0, h: float = 1e-5) -> GradientCheckReport:
    """Analytic MSE gradients vs central finite differences, every parameter.

    Supported kinds: mlp (random sample batch) and lstm (short sequence).
    """
    rng = np.random.default_rng(seed)
    d = spec.input_dim
    if spec.kind == "mlp":
        hidden = spec.extra.get("hidden", list(mlp_mod.DEFAULT_HIDDEN))
        n = 25
        x = rng.normal(size=(n, d))
        y = np.stack(
            [rng.uniform(0.0, 1.5, n), rng.uniform(-1.0, 1.0, n)], axis=1
        )
        params = mlp_mod.init_params(d, hidden, seed)

        def loss_of(p):
            return mlp_mod.loss_and_grad(p, d, hidden, x, y)[0]

        _, analytic = mlp_mod.loss_and_grad(params, d, hidden, x, y)
    elif spec.kind == "lstm":
        hidden_size = int(spec.extra["hidden_size"])
        num_layers = int(spec.extra.get("num_layers", 2))
        t_len = 20
        x = rng.normal(size=(t_len, 1, d))
        y = np.stack(
            [
                rng.uniform(0.0, 1.5, (t_len, 1)),
                rng.uniform(-1.0, 1.0, (t_len, 1)),
            ],
            axis=2,
        )
        lengths = np.array([t_len], dtype=np.int64)
        params = lstm_mod.init_params(d, hidden_size, num_layers, seed)

        def loss_of(p):
            return lstm_mod.loss_and_grad(
                p, x, y, lengths, d, hidden_size, num_layers
            )[0]

        _, analytic = lstm_mod.loss_and_grad(
            params, x, y, lengths, d, hidden_size, num_layers
        )
    else:
        raise ValidationError(f"gradient check supports mlp and lstm, not {spec.kind!r}")

    numeric = np.empty_like(params)
    for i in range(params.size):
        orig = params[i]
        params[i] = orig + h
        up = loss_of(params)
        params[i] = orig - h
        down = loss_of(params)
        params[i] = orig
        numeric[i] = (up - down) / (2.0 * h)
    errors = _relative_errors(analytic, numeric)
    worst = int(np.argmax(errors))
    return GradientCheckReport(
        max_relative_error=float(errors[worst]),
        worst_index=worst,
        n_params=int(params.size),
    )
