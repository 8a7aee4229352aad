"""Feed-forward regressor with tanh hidden layers, trained by Adam on MSE.

Parameter layout (flat vector): for each layer in order, W (in, out) row-major
followed by b (out,).  Hidden activations are tanh, the output is linear.
With ``hidden=[]`` this degenerates to a gradient-descent linear model, used
as the second solver in the closed-form/iterative agreement check.
"""

from __future__ import annotations

import numpy as np

from ..core import ModelSpec, ModelState, TrainingError
from .common import Adam, TrainConfig, as_xy, fit_norm, xavier_uniform

DEFAULT_HIDDEN = (100, 100)


def layer_sizes(input_dim: int, hidden) -> list[tuple[int, int]]:
    dims = [input_dim] + list(hidden) + [2]
    return list(zip(dims[:-1], dims[1:]))


def init_params(input_dim: int, hidden, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    parts = []
    for fan_in, fan_out in layer_sizes(input_dim, hidden):
        parts.append(xavier_uniform(rng, fan_in, fan_out, (fan_in, fan_out)).ravel())
        parts.append(np.zeros(fan_out))
    return np.concatenate(parts)


def unpack(params: np.ndarray, input_dim: int, hidden) -> list[tuple[np.ndarray, np.ndarray]]:
    """Zero-copy views (W, b) per layer into the flat parameter vector."""
    layers = []
    off = 0
    for fan_in, fan_out in layer_sizes(input_dim, hidden):
        w = params[off : off + fan_in * fan_out].reshape(fan_in, fan_out)
        off += fan_in * fan_out
        b = params[off : off + fan_out]
        off += fan_out
        layers.append((w, b))
    return layers


def forward(params: np.ndarray, input_dim: int, hidden, xz: np.ndarray) -> np.ndarray:
    h = xz
    layers = unpack(params, input_dim, hidden)
    for i, (w, b) in enumerate(layers):
        h = h @ w + b
        if i < len(layers) - 1:
            h = np.tanh(h)
    return h


def loss_and_grad(
    params: np.ndarray, input_dim: int, hidden, xz: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray]:
    """MSE (mean over batch and both targets) and its gradient."""
    layers = unpack(params, input_dim, hidden)
    acts = [xz]
    h = xz
    for i, (w, b) in enumerate(layers):
        h = h @ w + b
        if i < len(layers) - 1:
            h = np.tanh(h)
        acts.append(h)
    err = acts[-1] - y
    loss = float(np.mean(err * err))
    grad = np.zeros_like(params)
    glayers = unpack(grad, input_dim, hidden)
    delta = 2.0 * err / err.size
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        gw, gb = glayers[i]
        gw += acts[i].T @ delta
        gb += delta.sum(axis=0)
        if i > 0:
            delta = (delta @ w.T) * (1.0 - acts[i] * acts[i])
    return loss, grad


def train_mlp(
    train,
    cfg: TrainConfig = TrainConfig(),
    feature_subset: str = "full",
    hidden=DEFAULT_HIDDEN,
) -> ModelState:
    """Minibatch Adam on z-scored features; reproducible from cfg.seed."""
    x, y = as_xy(train)
    norm = fit_norm(x)
    xz = norm.apply(x)
    d = x.shape[1]
    params = init_params(d, hidden, cfg.seed)
    adam = Adam(params.size, cfg)
    rng = np.random.default_rng(cfg.seed + 1)
    n = xz.shape[0]
    batch = n if cfg.batch is None else min(cfg.batch, n)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if batch < n else np.arange(n)
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            loss, grad = loss_and_grad(params, d, hidden, xz[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"mlp training diverged at epoch {epoch}")
            adam.step(params, grad)
    spec = ModelSpec(
        kind="mlp",
        input_dim=d,
        feature_subset=feature_subset,
        extra={"hidden": list(hidden)},
    )
    return ModelState(spec=spec, norm=norm, params=params, seed=cfg.seed)


def mlp_raw_outputs(model: ModelState, xz: np.ndarray) -> np.ndarray:
    hidden = model.spec.extra.get("hidden", [])
    return forward(model.params, model.spec.input_dim, hidden, xz)
