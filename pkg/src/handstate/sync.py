"""Alignment of the three asynchronous sensor streams onto one master clock.

The master clock ticks at 20 Hz (the motor rate, the slowest stream).  At
tick time t:

  * exo features are the latest motor sample with timestamp <= t
    (zero-order hold; ticks with no preceding motor sample are dropped --
    actuator state is never invented);
  * EMG features are the per-channel mean of the samples in the half-open
    trailing window (t - emg_window, t]; an empty window falls back to the
    most recent EMG sample, and zeros before any EMG has been seen;
  * the opening-degree label is linear interpolation of the tracker stream
    (endpoint-clamped), absent when the sequence is unlabeled;
  * the compliance label is copied from the sequence's modality schedule.

A sample whose timestamp equals a tick belongs to that tick.

Batch alignment and the online engine share one incremental core
(:class:`IncrementalAligner`), so replaying a recording event by event
reproduces the batch result exactly.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .core import (
    EMG_CHANNELS,
    AlignedSample,
    GapError,
    RawSequence,
    TargetPair,
    ValidationError,
)

# Absorbs float representation error when a duration is an exact multiple of
# the tick interval; 1e-9 ticks ~ 50 ps at 20 Hz, far below sensor jitter.
_TICK_EPS = 1e-9


@dataclass(frozen=True)
class AlignmentConfig:
    """Parameters of the master-clock alignment."""

    master_rate: float = 20.0
    emg_window: float = 0.05
    gt_method: str = "linear_interpolation"
    exo_method: str = "zero_order_hold"
    max_gap: float = 0.2

    def __post_init__(self):
        if self.master_rate <= 0:
            raise ValidationError("master_rate must be positive")
        if self.emg_window < 1.0 / 50.0 - 1e-12:
            raise ValidationError("emg_window must be at least 1/50 s")
        if self.gt_method != "linear_interpolation":
            raise ValidationError(f"unsupported gt_method {self.gt_method!r}")
        if self.exo_method != "zero_order_hold":
            raise ValidationError(f"unsupported exo_method {self.exo_method!r}")
        if self.max_gap <= 0:
            raise ValidationError("max_gap must be positive")


def tick_count(duration: float, master_rate: float) -> int:
    """Number of master ticks k = 0..floor(duration * rate) inclusive."""
    if duration < 0:
        return 0
    return int(math.floor(duration * master_rate + _TICK_EPS)) + 1


@dataclass
class TickSchedule:
    """Per-tick consumption plan for the three streams.

    ``exo_index[k]`` is the index of the motor sample held at tick k (-1 when
    no sample precedes the tick).  ``emg_span[k]`` is the half-open index
    range of EMG samples inside the tick's trailing window.  ``gt_bracket[k]``
    gives the two tracker indices used for interpolation (equal at the ends,
    (-1, -1) when there is no tracker data).
    """

    ticks: np.ndarray
    exo_index: np.ndarray
    emg_span: np.ndarray
    gt_bracket: np.ndarray


def synchronize_streams(
    exo_t,
    emg_t,
    gt_t,
    cfg: AlignmentConfig = AlignmentConfig(),
) -> TickSchedule:
    """Pure tick scheduling from sorted timestamp lists (no value access)."""
    exo_t = [float(t) for t in exo_t]
    emg_t = [float(t) for t in emg_t]
    gt_t = [float(t) for t in gt_t]
    ends = [t[-1] for t in (exo_t, emg_t, gt_t) if t]
    n = tick_count(max(ends), cfg.master_rate) if ends else 0
    ticks = np.array([k / cfg.master_rate for k in range(n)], dtype=np.float64)
    exo_index = np.full(n, -1, dtype=np.int64)
    emg_span = np.zeros((n, 2), dtype=np.int64)
    gt_bracket = np.full((n, 2), -1, dtype=np.int64)
    for k in range(n):
        t_k = float(ticks[k])
        exo_index[k] = bisect_right(exo_t, t_k) - 1
        lo = bisect_right(emg_t, t_k - cfg.emg_window)
        hi = bisect_right(emg_t, t_k)
        emg_span[k] = (lo, hi)
        if gt_t:
            pos = bisect_right(gt_t, t_k)  # number of tracker samples <= t_k
            if pos == 0 or pos == len(gt_t) or gt_t[pos - 1] == t_k:
                idx = min(max(pos - 1, 0), len(gt_t) - 1)
                gt_bracket[k] = (idx, idx)
            else:
                gt_bracket[k] = (pos - 1, pos)
    return TickSchedule(ticks, exo_index, emg_span, gt_bracket)


@dataclass(slots=True)
class AlignedRow:
    """One closed master tick: fused features plus per-source staleness."""

    k: int
    t: float
    f_exo: np.ndarray
    f_emg: np.ndarray
    stale_exo: bool
    stale_emg: bool


class IncrementalAligner:
    """Event-by-event alignment core shared by batch and online modes.

    Per-source timestamps must be nondecreasing.  In online mode, call
    :meth:`push_exo` / :meth:`push_emg` and collect the rows returned as
    ticks close; call :meth:`finish` to flush the tail.  A tick closes once
    the motor watermark has passed it, or -- when the motor stream stalls by
    more than ``max_gap`` -- once the EMG watermark has run far enough ahead
    (the row is then emitted with held values and a staleness flag).
    """

    def __init__(self, cfg: AlignmentConfig = AlignmentConfig()):
        self.cfg = cfg
        self._exo_t: list[float] = []
        self._exo_v: list[np.ndarray] = []
        self._emg_t: list[float] = []
        self._emg_v: list[np.ndarray] = []
        self._exo_wm = -math.inf
        self._emg_wm = -math.inf
        self._next_k = 0
        self._exo_ptr = 0  # count of exo samples with t <= last closed tick
        self._emg_lo = 0  # first emg index with t > window start of last tick
        self._emg_hi = 0  # count of emg samples with t <= last closed tick
        self._finished = False

    # -- ingestion ---------------------------------------------------------

    def push_exo(self, t: float, values) -> list[AlignedRow]:
        self._ingest_exo(t, values)
        return self._drain()

    def push_emg(self, t: float, values) -> list[AlignedRow]:
        self._ingest_emg(t, values)
        return self._drain()

    def _ingest_exo(self, t: float, values) -> None:
        t = float(t)
        if t < self._exo_wm:
            raise ValidationError(
                f"exo timestamp regression: {t} after watermark {self._exo_wm}"
            )
        v = np.asarray(values, dtype=np.float64)
        if v.shape != (2,):
            raise ValidationError(f"exo payload must have 2 values, got {v.shape}")
        self._exo_t.append(t)
        self._exo_v.append(v)
        self._exo_wm = t

    def _ingest_emg(self, t: float, values) -> None:
        t = float(t)
        if t < self._emg_wm:
            raise ValidationError(
                f"emg timestamp regression: {t} after watermark {self._emg_wm}"
            )
        v = np.asarray(values, dtype=np.float64)
        if v.shape != (EMG_CHANNELS,):
            raise ValidationError(
                f"emg payload must have {EMG_CHANNELS} values, got {v.shape}"
            )
        self._emg_t.append(t)
        self._emg_v.append(v)
        self._emg_wm = t

    # -- tick closure ------------------------------------------------------

    def _tick_time(self, k: int) -> float:
        return k / self.cfg.master_rate

    def _closeable(self, t_k: float) -> bool:
        if self._exo_wm > t_k:
            return True
        # Motor stream stalled: let the EMG watermark close the tick so
        # predictions keep flowing (the row will carry a staleness flag).
        return self._emg_wm > t_k + self.cfg.max_gap

    def _drain(self) -> list[AlignedRow]:
        rows: list[AlignedRow] = []
        while self._closeable(self._tick_time(self._next_k)):
            row = self._close_tick(self._next_k)
            if row is not None:
                rows.append(row)
            self._next_k += 1
        return rows

    def _close_tick(self, k: int) -> AlignedRow | None:
        t_k = self._tick_time(k)
        while self._exo_ptr < len(self._exo_t) and self._exo_t[self._exo_ptr] <= t_k:
            self._exo_ptr += 1
        if self._exo_ptr == 0:
            return None  # no preceding motor sample: drop, never back-fill
        exo_idx = self._exo_ptr - 1
        f_exo = self._exo_v[exo_idx]
        stale_exo = (t_k - self._exo_t[exo_idx]) > self.cfg.max_gap

        win_start = t_k - self.cfg.emg_window
        while self._emg_lo < len(self._emg_t) and self._emg_t[self._emg_lo] <= win_start:
            self._emg_lo += 1
        while self._emg_hi < len(self._emg_t) and self._emg_t[self._emg_hi] <= t_k:
            self._emg_hi += 1
        lo = max(self._emg_lo, 0)
        hi = self._emg_hi
        if hi > lo:
            f_emg = np.mean(np.stack(self._emg_v[lo:hi]), axis=0)
            stale_emg = False
        elif hi > 0:
            f_emg = self._emg_v[hi - 1]
            stale_emg = (t_k - self._emg_t[hi - 1]) > self.cfg.max_gap
        else:
            f_emg = np.zeros(EMG_CHANNELS)
            stale_emg = True
        return AlignedRow(k, t_k, f_exo, f_emg, stale_exo, stale_emg)

    # -- batch ingestion and flush -----------------------------------------

    def extend(self, exo_t, exo_v, emg_t, emg_v) -> None:
        """Bulk-ingest stream arrays without closing any tick."""
        for i in range(len(exo_t)):
            self._ingest_exo(exo_t[i], exo_v[i])
        for i in range(len(emg_t)):
            self._ingest_emg(emg_t[i], emg_v[i])

    def finish(self, duration: float | None = None) -> list[AlignedRow]:
        """Close every remaining tick up to ``duration`` (default: data extent)."""
        if self._finished:
            return []
        self._finished = True
        if duration is None:
            ends = []
            if self._exo_t:
                ends.append(self._exo_t[-1])
            if self._emg_t:
                ends.append(self._emg_t[-1])
            duration = max(ends) if ends else -1.0
        n = tick_count(duration, self.cfg.master_rate)
        rows: list[AlignedRow] = []
        while self._next_k < n:
            row = self._close_tick(self._next_k)
            if row is not None:
                rows.append(row)
            self._next_k += 1
        return rows


def _check_gaps(t: np.ndarray, source: str, duration: float, max_gap: float) -> None:
    """Coverage check: leading, internal, and trailing gaps must be <= max_gap."""
    if t[0] - 0.0 > max_gap:
        raise GapError(source, 0.0, float(t[0]))
    if t.size > 1:
        deltas = np.diff(t)
        worst = int(np.argmax(deltas))
        if deltas[worst] > max_gap:
            raise GapError(source, float(t[worst]), float(t[worst + 1]))
    if duration - t[-1] > max_gap:
        raise GapError(source, float(t[-1]), duration)


def align(seq: RawSequence, cfg: AlignmentConfig = AlignmentConfig()) -> list[AlignedSample]:
    """Fuse a sequence's streams into 20 Hz feature/label rows.

    Raises :class:`GapError` when the motor or EMG stream leaves more than
    ``cfg.max_gap`` of the recording uncovered, and :class:`ValidationError`
    when either stream is empty.
    """
    if len(seq.exo) == 0:
        raise ValidationError(f"{seq.id}: empty exo stream")
    if len(seq.emg) == 0:
        raise ValidationError(f"{seq.id}: empty emg stream")
    duration = seq.duration
    _check_gaps(seq.exo.t, "exo", duration, cfg.max_gap)
    _check_gaps(seq.emg.t, "emg", duration, cfg.max_gap)

    aligner = IncrementalAligner(cfg)
    aligner.extend(seq.exo.t, seq.exo.values, seq.emg.t, seq.emg.values)
    rows = aligner.finish(duration)

    has_gt = len(seq.gt) > 0
    if has_gt:
        tick_t = np.array([r.t for r in rows])
        opening = np.interp(tick_t, seq.gt.t, seq.gt.values)
    out: list[AlignedSample] = []
    for i, row in enumerate(rows):
        y = None
        if has_gt:
            y = TargetPair.clamped(float(opening[i]), seq.compliance_at(row.t))
        out.append(AlignedSample(t=row.t, f_exo=row.f_exo, f_emg=row.f_emg, y=y))
    return out


def stack_aligned(samples: list[AlignedSample]) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Pack aligned samples into (times, features (n,10), targets (n,2) or None)."""
    t = np.array([s.t for s in samples], dtype=np.float64)
    x = np.array([s.feature_vector() for s in samples], dtype=np.float64)
    x = x.reshape(len(samples), -1)
    if samples and all(s.y is not None for s in samples):
        y = np.array([[s.y.opening, s.y.compliance] for s in samples], dtype=np.float64)
        return t, x, y
    return t, x, None
