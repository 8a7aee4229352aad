"""Online inference: push asynchronous sensor events, get 20 Hz predictions.

A session wraps the incremental aligner around a stateful predictor.  Ticks
close as the per-source watermarks advance (see
:class:`handstate.sync.IncrementalAligner`), so replaying a recorded
sequence event by event reproduces batch align-then-predict exactly; pacing
to the wall clock never changes the math.

Dropouts never silence the stream: a source that has been quiet for more
than ``max_gap`` keeps its last known value and the emitted prediction
carries a per-source staleness flag.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .core import (
    EMG_CHANNELS,
    ModelState,
    RawSequence,
    TargetPair,
    ValidationError,
)
from .evaluation import MetricsReport, rmse, r_squared_or_nan
from .models import StatefulPredictor, subset_columns
from .sync import AlignedRow, AlignmentConfig, IncrementalAligner

_PAYLOAD_ARITY = {"exo": 2, "emg": EMG_CHANNELS}


@dataclass(frozen=True)
class StreamEvent:
    """One sensor reading: motor (2 values) or EMG (8 values)."""

    t: float
    source: str
    payload: tuple[float, ...]

    def __post_init__(self):
        arity = _PAYLOAD_ARITY.get(self.source)
        if arity is None:
            raise ValidationError(f"unknown stream source {self.source!r}")
        if len(self.payload) != arity:
            raise ValidationError(
                f"{self.source} payload has {len(self.payload)} values, expected {arity}"
            )


@dataclass(frozen=True)
class PredictionEvent:
    """One master-clock prediction with per-source data-freshness flags."""

    t: float
    y: TargetPair
    stale_exo: bool
    stale_emg: bool


class StreamingSession:
    """Single-consumer handle feeding events to one model.

    Distinct sessions over the same ModelState are fully independent; the
    model parameters are shared read-only while each session owns its
    alignment buffers and recurrent state.
    """

    def __init__(self, model: ModelState, cfg: AlignmentConfig = AlignmentConfig()):
        self.model = model
        self.cfg = cfg
        self._aligner = IncrementalAligner(cfg)
        self._predictor = StatefulPredictor(model)
        self._columns = list(subset_columns(model.spec.feature_subset))

    def push(self, event: StreamEvent) -> list[PredictionEvent]:
        """Ingest one event; returns the predictions of all newly closed ticks."""
        if event.source == "exo":
            rows = self._aligner.push_exo(event.t, np.asarray(event.payload))
        else:
            rows = self._aligner.push_emg(event.t, np.asarray(event.payload))
        return self._emit(rows)

    def finish(self, duration: float | None = None) -> list[PredictionEvent]:
        """Flush the remaining ticks once the streams have ended."""
        return self._emit(self._aligner.finish(duration))

    def _emit(self, rows: list[AlignedRow]) -> list[PredictionEvent]:
        events = []
        for row in rows:
            features = np.concatenate([row.f_exo, row.f_emg])[self._columns]
            out = self._predictor.step(features)
            events.append(
                PredictionEvent(
                    t=row.t,
                    y=TargetPair(float(out[0]), float(out[1])),
                    stale_exo=row.stale_exo,
                    stale_emg=row.stale_emg,
                )
            )
        return events


def open_session(model: ModelState, cfg: AlignmentConfig = AlignmentConfig()) -> StreamingSession:
    """Start an online session; every architecture is streamable."""
    return StreamingSession(model, cfg)


def sequence_events(seq: RawSequence) -> list[StreamEvent]:
    """A sequence's motor and EMG streams as one timestamp-ordered event list."""
    events = [
        StreamEvent(float(t), "exo", tuple(float(v) for v in seq.exo.values[i]))
        for i, t in enumerate(seq.exo.t)
    ]
    events += [
        StreamEvent(float(t), "emg", tuple(float(v) for v in seq.emg.values[i]))
        for i, t in enumerate(seq.emg.t)
    ]
    events.sort(key=lambda e: (e.t, 0 if e.source == "exo" else 1))
    return events


@dataclass
class ReplayResult:
    predictions: list[PredictionEvent]
    report: MetricsReport | None


def replay(
    seq: RawSequence,
    model: ModelState,
    cfg: AlignmentConfig = AlignmentConfig(),
    speed: float | None = None,
) -> ReplayResult:
    """Feed a recording through a session in timestamp order.

    ``speed`` paces event delivery against the wall clock (1.0 = real time;
    None = as fast as possible) and has no effect on the predicted values.
    Metrics are computed when the sequence carries ground truth.
    """
    session = open_session(model, cfg)
    predictions: list[PredictionEvent] = []
    prev_t = 0.0
    for event in sequence_events(seq):
        if speed is not None and np.isfinite(speed) and speed > 0:
            delay = (event.t - prev_t) / speed
            if delay > 0:
                time.sleep(delay)
        prev_t = event.t
        predictions.extend(session.push(event))
    predictions.extend(session.finish(seq.duration))

    report = None
    if len(seq.gt) > 0 and predictions:
        tick_t = np.array([p.t for p in predictions])
        truth = np.stack(
            [
                np.interp(tick_t, seq.gt.t, seq.gt.values),
                np.array([seq.compliance_at(t) for t in tick_t]),
            ],
            axis=1,
        )
        pred = np.array([[p.y.opening, p.y.compliance] for p in predictions])
        report = MetricsReport(
            r2=r_squared_or_nan(pred, truth),
            rmse=rmse(pred, truth),
            n_samples=len(predictions),
            user=seq.user,
            architecture=model.spec.kind,
            subset=model.spec.feature_subset,
        )
    return ReplayResult(predictions=predictions, report=report)


# ---------------------------------------------------------------------------
# JSON-lines live mode (stdin -> stdout)
# ---------------------------------------------------------------------------


def parse_event_line(line: str) -> StreamEvent:
    rec = json.loads(line)
    return StreamEvent(float(rec["t"]), str(rec["src"]), tuple(float(x) for x in rec["v"]))


def prediction_to_json(p: PredictionEvent) -> str:
    return json.dumps(
        {
            "t": p.t,
            "y_o": p.y.opening,
            "y_c": p.y.compliance,
            "stale_exo": p.stale_exo,
            "stale_emg": p.stale_emg,
        },
        separators=(",", ":"),
    )


def run_live(model: ModelState, cfg: AlignmentConfig, in_stream, out_stream) -> int:
    """Read StreamEvents as JSONL, write PredictionEvents as JSONL."""
    session = open_session(model, cfg)
    count = 0
    for line in in_stream:
        line = line.strip()
        if not line:
            continue
        for p in session.push(parse_event_line(line)):
            out_stream.write(prediction_to_json(p) + "\n")
            count += 1
    for p in session.finish():
        out_stream.write(prediction_to_json(p) + "\n")
        count += 1
    out_stream.flush()
    return count
