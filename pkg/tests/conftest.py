"""Shared helpers for building small hand-made sequences."""

import numpy as np
import pytest

from handstate.core import (
    Dataset,
    EmgStream,
    ExoStream,
    Modality,
    RawSequence,
    TrackerStream,
)


def rate_times(rate_hz: float, duration: float) -> np.ndarray:
    """Sample times k/rate for k = 0 .. round(duration*rate) - 1."""
    n = int(round(duration * rate_hz))
    return np.array([k / rate_hz for k in range(n)], dtype=np.float64)


def make_sequence(
    seq_id="seq-0",
    user="u0",
    session="s0",
    modality=Modality.PASSIVE,
    duration=2.0,
    exo_fn=None,
    emg_fn=None,
    gt_fn=None,
    with_gt=True,
) -> RawSequence:
    """Build an exact-rate sequence; *_fn map a time array to values."""
    exo_t = rate_times(20.0, duration)
    emg_t = rate_times(50.0, duration)
    if exo_fn is None:
        exo_v = np.stack([0.5 * np.ones_like(exo_t), 0.1 * np.ones_like(exo_t)], axis=1)
    else:
        exo_v = exo_fn(exo_t)
    if emg_fn is None:
        emg_v = np.tile(np.arange(1.0, 9.0), (emg_t.size, 1)) * 0.1
    else:
        emg_v = emg_fn(emg_t)
    if with_gt:
        gt_t = rate_times(90.0, duration)
        gt_v = gt_fn(gt_t) if gt_fn is not None else 0.3 * np.ones_like(gt_t)
        gt = TrackerStream(gt_t, gt_v)
    else:
        gt = TrackerStream.empty()
    return RawSequence(
        id=seq_id,
        user=user,
        session=session,
        modality=modality,
        exo=ExoStream(exo_t, exo_v),
        emg=EmgStream(emg_t, emg_v),
        gt=gt,
    )


@pytest.fixture
def tiny_dataset() -> Dataset:
    seqs = []
    for i, mod in enumerate(
        [Modality.HELPING, Modality.PASSIVE, Modality.OPPOSING]
    ):
        seqs.append(
            make_sequence(seq_id=f"seq-{i}", modality=mod, duration=1.0)
        )
    return Dataset(sequences=seqs, generator_seed=7)
