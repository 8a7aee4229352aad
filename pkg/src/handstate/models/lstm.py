"""Stacked LSTM regressor trained by full-sequence backpropagation through time.

Architecture: input -> LSTM(H) -> LSTM(H) -> linear H->2, with the standard
cell (sigmoid input/forget/output gates, tanh candidate and output squash)
and the forget-gate bias initialized to 1.  Gate blocks are ordered
(i, f, g, o) along the 4H axis.

Parameter layout (flat vector): per layer Wx (in, 4H), Wh (H, 4H), b (4H);
then the head W (H, 2), b (2).

The per-timestep recurrences are compiled with numba; prediction uses a
plain-numpy stepper (`LstmStepper`) so that batch and streaming inference
share the exact same float operations.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ..core import ModelSpec, ModelState, TrainingError, ValidationError
from .common import Adam, TrainConfig, as_xy, fit_norm, xavier_uniform

DEFAULT_HIDDEN_SIZE = 32
DEFAULT_NUM_LAYERS = 2


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


def param_shapes(input_dim: int, hidden_size: int, num_layers: int):
    shapes = []
    size_in = input_dim
    for layer in range(num_layers):
        shapes.append((f"wx{layer}", (size_in, 4 * hidden_size)))
        shapes.append((f"wh{layer}", (hidden_size, 4 * hidden_size)))
        shapes.append((f"b{layer}", (4 * hidden_size,)))
        size_in = hidden_size
    shapes.append(("wo", (hidden_size, 2)))
    shapes.append(("bo", (2,)))
    return shapes


def unpack(params: np.ndarray, input_dim: int, hidden_size: int, num_layers: int) -> dict:
    """Zero-copy named views into the flat parameter vector."""
    views = {}
    off = 0
    for name, shape in param_shapes(input_dim, hidden_size, num_layers):
        size = int(np.prod(shape))
        views[name] = params[off : off + size].reshape(shape)
        off += size
    if off != params.size:
        raise ValidationError(f"lstm params length {params.size}, expected {off}")
    return views


def init_params(input_dim: int, hidden_size: int, num_layers: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    parts = []
    size_in = input_dim
    h = hidden_size
    for _ in range(num_layers):
        parts.append(xavier_uniform(rng, size_in, 4 * h, (size_in, 4 * h)).ravel())
        parts.append(xavier_uniform(rng, h, 4 * h, (h, 4 * h)).ravel())
        bias = np.zeros(4 * h)
        bias[h : 2 * h] = 1.0  # forget gate opens by default
        parts.append(bias)
        size_in = h
    parts.append(xavier_uniform(rng, h, 2, (h, 2)).ravel())
    parts.append(np.zeros(2))
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# compiled recurrences (training path)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _layer_forward(xw, wh, h_dim):  # pragma: no cover - compiled
    t_len, b_len, h4 = xw.shape
    gates = np.empty((t_len, b_len, h4))
    cells = np.empty((t_len, b_len, h_dim))
    hidden = np.empty((t_len, b_len, h_dim))
    h_prev = np.zeros((b_len, h_dim))
    c_prev = np.zeros((b_len, h_dim))
    for t in range(t_len):
        z = xw[t] + np.dot(h_prev, wh)
        for b in range(b_len):
            for j in range(h_dim):
                gi = 1.0 / (1.0 + math.exp(-z[b, j]))
                gf = 1.0 / (1.0 + math.exp(-z[b, h_dim + j]))
                gg = math.tanh(z[b, 2 * h_dim + j])
                go = 1.0 / (1.0 + math.exp(-z[b, 3 * h_dim + j]))
                c = gf * c_prev[b, j] + gi * gg
                gates[t, b, j] = gi
                gates[t, b, h_dim + j] = gf
                gates[t, b, 2 * h_dim + j] = gg
                gates[t, b, 3 * h_dim + j] = go
                cells[t, b, j] = c
                hidden[t, b, j] = go * math.tanh(c)
        h_prev = hidden[t]
        c_prev = cells[t]
    return gates, cells, hidden


@njit(cache=True)
def _layer_backward(gates, cells, hidden, wh, d_hidden, h_dim):  # pragma: no cover
    t_len, b_len, h4 = gates.shape
    dz_all = np.zeros((t_len, b_len, h4))
    d_wh = np.zeros((h_dim, h4))
    wh_t = np.ascontiguousarray(wh.T)
    dh_rec = np.zeros((b_len, h_dim))
    dc_next = np.zeros((b_len, h_dim))
    for t in range(t_len - 1, -1, -1):
        for b in range(b_len):
            for j in range(h_dim):
                dh = d_hidden[t, b, j] + dh_rec[b, j]
                c = cells[t, b, j]
                tc = math.tanh(c)
                gi = gates[t, b, j]
                gf = gates[t, b, h_dim + j]
                gg = gates[t, b, 2 * h_dim + j]
                go = gates[t, b, 3 * h_dim + j]
                dc = dh * go * (1.0 - tc * tc) + dc_next[b, j]
                c_prev = cells[t - 1, b, j] if t > 0 else 0.0
                dz_all[t, b, j] = dc * gg * gi * (1.0 - gi)
                dz_all[t, b, h_dim + j] = dc * c_prev * gf * (1.0 - gf)
                dz_all[t, b, 2 * h_dim + j] = dc * gi * (1.0 - gg * gg)
                dz_all[t, b, 3 * h_dim + j] = dh * tc * go * (1.0 - go)
                dc_next[b, j] = dc * gf
        dh_rec = np.dot(dz_all[t], wh_t)
        if t > 0:
            d_wh += np.dot(np.ascontiguousarray(hidden[t - 1].T), dz_all[t])
    return dz_all, d_wh


def _forward_stack(views, x, hidden_size, num_layers):
    """Run all layers; returns per-layer caches and the head output."""
    t_len, b_len, _ = x.shape
    caches = []
    inp = x
    for layer in range(num_layers):
        wx = views[f"wx{layer}"]
        wh = views[f"wh{layer}"]
        b = views[f"b{layer}"]
        xw = (inp.reshape(t_len * b_len, -1) @ wx + b).reshape(t_len, b_len, 4 * hidden_size)
        gates, cells, hidden = _layer_forward(xw, wh, hidden_size)
        caches.append((inp, gates, cells, hidden))
        inp = hidden
    out = inp.reshape(t_len * b_len, hidden_size) @ views["wo"] + views["bo"]
    return caches, out.reshape(t_len, b_len, 2)


def loss_and_grad(
    params: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    lengths: np.ndarray,
    input_dim: int,
    hidden_size: int = DEFAULT_HIDDEN_SIZE,
    num_layers: int = DEFAULT_NUM_LAYERS,
) -> tuple[float, np.ndarray]:
    """Mean over sequences of per-sequence MSE, with BPTT gradients.

    ``x`` is (T, B, D) zero-padded past each sequence's length; ``y`` is
    (T, B, 2); ``lengths`` (B,) gives the valid steps per sequence.
    """
    views = unpack(params, input_dim, hidden_size, num_layers)
    t_len, b_len, _ = x.shape
    caches, out = _forward_stack(views, x, hidden_size, num_layers)

    # per-sequence mean over (valid steps x 2 targets), averaged over batch
    weights = np.zeros((t_len, b_len, 1))
    for b in range(b_len):
        weights[: lengths[b], b, 0] = 1.0 / (lengths[b] * 2 * b_len)
    err = out - y
    loss = float(np.sum(weights * err * err))

    grad = np.zeros_like(params)
    gviews = unpack(grad, input_dim, hidden_size, num_layers)
    d_out = 2.0 * weights * err  # (T, B, 2)
    flat_h = caches[-1][3].reshape(t_len * b_len, hidden_size)
    d_out2 = d_out.reshape(t_len * b_len, 2)
    gviews["wo"] += flat_h.T @ d_out2
    gviews["bo"] += d_out2.sum(axis=0)
    d_hidden = (d_out2 @ views["wo"].T).reshape(t_len, b_len, hidden_size)

    for layer in range(num_layers - 1, -1, -1):
        inp, gates, cells, hidden = caches[layer]
        wh = views[f"wh{layer}"]
        dz, d_wh = _layer_backward(gates, cells, hidden, wh, d_hidden, hidden_size)
        gviews[f"wh{layer}"] += d_wh
        dz2 = dz.reshape(t_len * b_len, 4 * hidden_size)
        inp2 = inp.reshape(t_len * b_len, -1)
        gviews[f"wx{layer}"] += inp2.T @ dz2
        gviews[f"b{layer}"] += dz2.sum(axis=0)
        if layer > 0:
            d_hidden = (dz2 @ views[f"wx{layer}"].T).reshape(t_len, b_len, hidden_size)
    return loss, grad


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _pack_sequences(seqs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xs, ys = [], []
    for seq in seqs:
        x, y = as_xy(seq)
        xs.append(x)
        ys.append(y)
    if not xs:
        raise ValidationError("no labeled sequences to train on")
    dims = {x.shape[1] for x in xs}
    if len(dims) != 1:
        raise ValidationError(f"inconsistent feature dimensions {sorted(dims)}")
    t_max = max(x.shape[0] for x in xs)
    b_len = len(xs)
    d = xs[0].shape[1]
    x_pad = np.zeros((t_max, b_len, d))
    y_pad = np.zeros((t_max, b_len, 2))
    lengths = np.zeros(b_len, dtype=np.int64)
    for b, (x, y) in enumerate(zip(xs, ys)):
        x_pad[: x.shape[0], b] = x
        y_pad[: y.shape[0], b] = y
        lengths[b] = x.shape[0]
    return x_pad, y_pad, lengths


def train_lstm(
    train_sequences,
    cfg: TrainConfig = TrainConfig(),
    feature_subset: str = "full",
    hidden_size: int = DEFAULT_HIDDEN_SIZE,
    num_layers: int = DEFAULT_NUM_LAYERS,
) -> ModelState:
    """Full-sequence BPTT; hidden state resets at every sequence start.

    ``train_sequences`` is a list of sequences, each a list of labeled
    AlignedSamples or an (X, Y) pair.  Sequences without labels are skipped
    with a warning.
    """
    usable = []
    skipped = 0
    for seq in train_sequences:
        try:
            as_xy(seq)
        except ValidationError:
            skipped += 1
            continue
        usable.append(seq)
    if skipped:
        import warnings

        warnings.warn(f"skipped {skipped} unlabeled sequence(s)", stacklevel=2)
    x_pad, y_pad, lengths = _pack_sequences(usable)
    d = x_pad.shape[2]
    # normalization statistics over the concatenated valid rows only
    rows = np.concatenate(
        [x_pad[: lengths[b], b, :] for b in range(x_pad.shape[1])], axis=0
    )
    norm = fit_norm(rows)
    xz = (x_pad - norm.mean) / norm.std
    # zero out padding again (normalization shifted it)
    for b in range(x_pad.shape[1]):
        xz[lengths[b] :, b, :] = 0.0

    params = init_params(d, hidden_size, num_layers, cfg.seed)
    adam = Adam(params.size, cfg)
    rng = np.random.default_rng(cfg.seed + 1)
    b_total = x_pad.shape[1]
    batch = b_total if cfg.batch is None else min(cfg.batch, b_total)
    for epoch in range(cfg.epochs):
        order = rng.permutation(b_total) if batch < b_total else np.arange(b_total)
        for start in range(0, b_total, batch):
            sel = order[start : start + batch]
            loss, grad = loss_and_grad(
                params, xz[:, sel, :], y_pad[:, sel, :], lengths[sel],
                d, hidden_size, num_layers,
            )
            if not np.isfinite(loss):
                raise TrainingError(f"lstm training diverged at epoch {epoch}")
            adam.step(params, grad)
    spec = ModelSpec(
        kind="lstm",
        input_dim=d,
        feature_subset=feature_subset,
        extra={"hidden_size": hidden_size, "num_layers": num_layers},
    )
    return ModelState(spec=spec, norm=norm, params=params, seed=cfg.seed)


# ---------------------------------------------------------------------------
# stateful inference (plain numpy; shared by batch and streaming paths)
# ---------------------------------------------------------------------------


class LstmStepper:
    """Carries hidden state across timesteps of one stream."""

    def __init__(self, model: ModelState):
        spec = model.spec
        self.h_dim = int(spec.extra["hidden_size"])
        self.layers = int(spec.extra.get("num_layers", DEFAULT_NUM_LAYERS))
        self.views = unpack(model.params, spec.input_dim, self.h_dim, self.layers)
        self.h = [np.zeros(self.h_dim) for _ in range(self.layers)]
        self.c = [np.zeros(self.h_dim) for _ in range(self.layers)]

    def reset(self) -> None:
        for arr in self.h + self.c:
            arr[:] = 0.0

    def step(self, xz_row: np.ndarray) -> np.ndarray:
        """One z-scored feature row -> raw (2,) output."""
        h_dim = self.h_dim
        inp = xz_row
        for layer in range(self.layers):
            z = (
                inp @ self.views[f"wx{layer}"]
                + self.h[layer] @ self.views[f"wh{layer}"]
                + self.views[f"b{layer}"]
            )
            gi = 1.0 / (1.0 + np.exp(-z[:h_dim]))
            gf = 1.0 / (1.0 + np.exp(-z[h_dim : 2 * h_dim]))
            gg = np.tanh(z[2 * h_dim : 3 * h_dim])
            go = 1.0 / (1.0 + np.exp(-z[3 * h_dim :]))
            c = gf * self.c[layer] + gi * gg
            h = go * np.tanh(c)
            self.c[layer] = c
            self.h[layer] = h
            inp = h
        return inp @ self.views["wo"] + self.views["bo"]

    def run(self, xz: np.ndarray) -> np.ndarray:
        out = np.empty((xz.shape[0], 2))
        for i in range(xz.shape[0]):
            out[i] = self.step(xz[i])
        return out
