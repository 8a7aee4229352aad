"""Domain types and on-disk formats shared by the whole toolkit.

The estimation target is the pair (opening degree, compliance level): the
opening degree is an angle in [0, pi/2] (0 = open hand, pi/2 = closed) and
the compliance level is dimensionless in [-1, 1] (+1 compliant, 0 neutral,
-1 stiff).  Input features are the fused 10-vector

    (position, current, emg_1, ..., emg_8)

in that fixed order: two exoskeleton motor readings sampled at 20 Hz and
eight surface-EMG channels sampled at 50 Hz.  Ground-truth opening comes
from a 90 Hz hand tracker.

Datasets are stored as a ``manifest.json`` plus one JSON-lines stream file
per sequence; models as a single JSON document.  Both formats are
byte-stable: saving identical data twice yields identical files.
"""

from __future__ import annotations

import json
import math
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

HALF_PI = math.pi / 2.0

EMG_CHANNELS = 8
N_FEATURES = 10
FEATURE_NAMES: tuple[str, ...] = (
    "position",
    "current",
    "emg_1",
    "emg_2",
    "emg_3",
    "emg_4",
    "emg_5",
    "emg_6",
    "emg_7",
    "emg_8",
)

EXO_RATE_HZ = 20.0
EMG_RATE_HZ = 50.0
GT_RATE_HZ = 90.0

# Conformant protocol sequences last 60 s; the loader flags anything outside
# this band but still accepts it.
PROTOCOL_DURATION_RANGE = (55.0, 65.0)

# Per-feature standard deviations below this floor are replaced by 1.0 so a
# constant feature (e.g. a dead EMG pad) cannot blow up normalization.
STD_FLOOR = 1e-8

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(ToolkitError):
    """Data violates a documented invariant."""


class DatasetFormatError(ToolkitError):
    """An on-disk artifact is missing or malformed."""


class GapError(ValidationError):
    """A sensor stream has a coverage gap larger than the allowed maximum."""

    def __init__(self, source: str, start: float, end: float):
        self.source = source
        self.start = start
        self.end = end
        super().__init__(
            f"{source} stream gap of {end - start:.3f}s in [{start:.3f}, {end:.3f}]"
        )


class TrainingError(ToolkitError):
    """Model training failed (divergence or non-convergence)."""


class UndefinedMetricError(ToolkitError):
    """A metric is undefined for the given evaluation pool."""


class Modality(enum.Enum):
    """Acquisition modality; maps one-to-one onto the compliance label."""

    HELPING = "helping"
    PASSIVE = "passive"
    OPPOSING = "opposing"

    @property
    def compliance(self) -> float:
        return _MODALITY_COMPLIANCE[self]

    @classmethod
    def from_string(cls, name: str) -> "Modality":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValidationError(f"unknown modality {name!r}") from None


_MODALITY_COMPLIANCE = {
    Modality.HELPING: 1.0,
    Modality.PASSIVE: 0.0,
    Modality.OPPOSING: -1.0,
}

MODALITIES: tuple[Modality, ...] = (
    Modality.HELPING,
    Modality.PASSIVE,
    Modality.OPPOSING,
)


@dataclass(frozen=True)
class TargetPair:
    """Estimation target: hand opening (rad, [0, pi/2]) and compliance ([-1, 1])."""

    opening: float
    compliance: float

    def __post_init__(self):
        if not (0.0 <= self.opening <= HALF_PI):
            raise ValidationError(f"opening {self.opening} outside [0, pi/2]")
        if not (-1.0 <= self.compliance <= 1.0):
            raise ValidationError(f"compliance {self.compliance} outside [-1, 1]")

    @classmethod
    def clamped(cls, opening: float, compliance: float) -> "TargetPair":
        return cls(
            min(max(float(opening), 0.0), HALF_PI),
            min(max(float(compliance), -1.0), 1.0),
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.opening, self.compliance], dtype=np.float64)


@dataclass(frozen=True, slots=True)
class ExoSample:
    """One motor reading: normalized position (0 open .. 1 closed) and current."""

    t: float
    position: float
    current: float


@dataclass(frozen=True, slots=True)
class EmgSample:
    """One 8-channel surface-EMG reading (device-filtered activations)."""

    t: float
    channels: tuple[float, ...]

    def __post_init__(self):
        if len(self.channels) != EMG_CHANNELS:
            raise ValidationError(
                f"EMG sample at t={self.t} has {len(self.channels)} channels, "
                f"expected {EMG_CHANNELS}"
            )


@dataclass(frozen=True, slots=True)
class TrackerSample:
    """Hand-tracker opening angle (mean finger pitch, thumb excluded)."""

    t: float
    opening: float


def _check_times(t: np.ndarray, what: str, owner: str) -> None:
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise ValidationError(f"{what} timestamps not strictly increasing in {owner}")


@dataclass
class ExoStream:
    """Packed motor stream: times (n,) and values (n, 2) = (position, current)."""

    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape != (self.t.size, 2):
            raise ValidationError(
                f"exo stream values shape {self.values.shape} does not match "
                f"{self.t.size} timestamps x 2 columns"
            )

    @classmethod
    def from_samples(cls, samples: Sequence[ExoSample]) -> "ExoStream":
        t = np.array([s.t for s in samples], dtype=np.float64)
        v = np.array([[s.position, s.current] for s in samples], dtype=np.float64)
        return cls(t, v.reshape(len(samples), 2))

    def samples(self) -> Iterator[ExoSample]:
        for i in range(self.t.size):
            yield ExoSample(float(self.t[i]), float(self.values[i, 0]), float(self.values[i, 1]))

    def __len__(self) -> int:
        return int(self.t.size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ExoStream)
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.values, other.values)
        )


@dataclass
class EmgStream:
    """Packed EMG stream: times (n,) and values (n, 8)."""

    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape != (self.t.size, EMG_CHANNELS):
            raise ValidationError(
                f"EMG stream values shape {self.values.shape} does not match "
                f"{self.t.size} timestamps x {EMG_CHANNELS} channels"
            )

    @classmethod
    def from_samples(cls, samples: Sequence[EmgSample]) -> "EmgStream":
        t = np.array([s.t for s in samples], dtype=np.float64)
        v = np.array([s.channels for s in samples], dtype=np.float64)
        return cls(t, v.reshape(len(samples), EMG_CHANNELS))

    def samples(self) -> Iterator[EmgSample]:
        for i in range(self.t.size):
            yield EmgSample(float(self.t[i]), tuple(float(x) for x in self.values[i]))

    def __len__(self) -> int:
        return int(self.t.size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EmgStream)
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.values, other.values)
        )


@dataclass
class TrackerStream:
    """Packed ground-truth stream: times (n,) and opening angles (n,)."""

    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.t.size,):
            raise ValidationError(
                f"tracker stream values shape {self.values.shape} does not match "
                f"{self.t.size} timestamps"
            )

    @classmethod
    def empty(cls) -> "TrackerStream":
        return cls(np.empty(0), np.empty(0))

    @classmethod
    def from_samples(cls, samples: Sequence[TrackerSample]) -> "TrackerStream":
        t = np.array([s.t for s in samples], dtype=np.float64)
        v = np.array([s.opening for s in samples], dtype=np.float64)
        return cls(t, v)

    def samples(self) -> Iterator[TrackerSample]:
        for i in range(self.t.size):
            yield TrackerSample(float(self.t[i]), float(self.values[i]))

    def __len__(self) -> int:
        return int(self.t.size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TrackerStream)
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, slots=True)
class ModalitySwitch:
    """Start of a new instructed modality within a switching sequence."""

    t: float
    modality: Modality


@dataclass
class RawSequence:
    """One recording: three asynchronous streams plus labels.

    All streams share the time origin t=0.  ``gt`` may be empty (unlabeled
    deployment data).  ``switches``, when present, gives the piecewise
    modality schedule of an online session with instructed modality changes;
    ``modality`` then names the first segment.
    """

    id: str
    user: str
    session: str
    modality: Modality
    exo: ExoStream
    emg: EmgStream
    gt: TrackerStream
    switches: tuple[ModalitySwitch, ...] | None = None

    def __post_init__(self):
        _check_times(self.exo.t, "exo", self.id)
        _check_times(self.emg.t, "emg", self.id)
        _check_times(self.gt.t, "gt", self.id)
        if self.switches is not None:
            ts = [s.t for s in self.switches]
            if ts != sorted(ts) or (ts and ts[0] != 0.0):
                raise ValidationError(
                    f"switch schedule of {self.id} must be sorted and start at t=0"
                )

    @property
    def duration(self) -> float:
        """Largest timestamp across all streams (0.0 if everything is empty)."""
        parts = [t[-1] for t in (self.exo.t, self.emg.t, self.gt.t) if t.size]
        return float(max(parts)) if parts else 0.0

    @property
    def protocol_conformant(self) -> bool:
        lo, hi = PROTOCOL_DURATION_RANGE
        return lo <= self.duration <= hi

    def compliance_at(self, t: float) -> float:
        """Compliance ground truth at time t (piecewise under a switch schedule)."""
        if not self.switches:
            return self.modality.compliance
        current = self.switches[0].modality
        for sw in self.switches:
            if sw.t <= t:
                current = sw.modality
            else:
                break
        return current.compliance

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RawSequence)
            and self.id == other.id
            and self.user == other.user
            and self.session == other.session
            and self.modality == other.modality
            and self.exo == other.exo
            and self.emg == other.emg
            and self.gt == other.gt
            and self.switches == other.switches
        )


@dataclass(slots=True)
class AlignedSample:
    """One fused feature row on the 20 Hz master clock."""

    t: float
    f_exo: np.ndarray  # (2,)  position, current
    f_emg: np.ndarray  # (8,)
    y: TargetPair | None = None

    def feature_vector(self) -> np.ndarray:
        return np.concatenate([self.f_exo, self.f_emg])


@dataclass
class Dataset:
    """A collection of sequences plus manifest metadata."""

    sequences: list[RawSequence]
    generator_seed: int | None = None

    def __post_init__(self):
        ids = [s.id for s in self.sequences]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate sequence ids: {dup}")

    @property
    def users(self) -> list[str]:
        return sorted({s.user for s in self.sequences})

    @property
    def sessions(self) -> list[str]:
        return sorted({s.session for s in self.sequences})

    def get(self, seq_id: str) -> RawSequence:
        for s in self.sequences:
            if s.id == seq_id:
                return s
        raise KeyError(seq_id)

    def by_user(self, user: str) -> list[RawSequence]:
        return [s for s in self.sequences if s.user == user]

    def nonconformant_ids(self) -> list[str]:
        return [s.id for s in self.sequences if not s.protocol_conformant]

    def is_protocol_complete(self) -> bool:
        """True when each (user, session) has 3 sequences per modality."""
        groups: dict[tuple[str, str], dict[Modality, int]] = {}
        for s in self.sequences:
            counts = groups.setdefault((s.user, s.session), {m: 0 for m in MODALITIES})
            counts[s.modality] += 1
        if not groups:
            return False
        return all(
            all(counts[m] == 3 for m in MODALITIES) for counts in groups.values()
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Dataset)
            and self.generator_seed == other.generator_seed
            and self.sequences == other.sequences
        )


# ---------------------------------------------------------------------------
# Model state
# ---------------------------------------------------------------------------

MODEL_KINDS = ("dummy", "linear", "mlp", "svr", "lstm")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture descriptor.

    ``extra`` holds kind-specific, JSON-safe settings:
      mlp:    hidden (list of layer widths), adam hyperparameters used
      lstm:   hidden_size, num_layers
      svr:    C, epsilon, gamma (per target), n_sv (per target)
    """

    kind: str
    input_dim: int
    feature_subset: str = "full"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValidationError(f"unknown model kind {self.kind!r}")
        if self.input_dim < 1:
            raise ValidationError("input_dim must be >= 1")


def expected_param_count(spec: ModelSpec) -> int:
    """Exact flat-parameter count implied by an architecture descriptor."""
    d = spec.input_dim
    if spec.kind == "dummy":
        return 2
    if spec.kind == "linear":
        return (d + 1) * 2
    if spec.kind == "mlp":
        sizes = [d] + list(spec.extra.get("hidden", [])) + [2]
        return sum((a + 1) * b for a, b in zip(sizes[:-1], sizes[1:]))
    if spec.kind == "lstm":
        h = int(spec.extra["hidden_size"])
        layers = int(spec.extra.get("num_layers", 2))
        count = 0
        size_in = d
        for _ in range(layers):
            count += 4 * h * (size_in + h) + 4 * h
            size_in = h
        return count + h * 2 + 2
    if spec.kind == "svr":
        n_sv = spec.extra["n_sv"]
        # per target: support-vector matrix, dual coefficients, intercept
        return sum(n * d + n + 1 for n in n_sv)
    raise ValidationError(f"unknown model kind {spec.kind!r}")


@dataclass
class NormStats:
    """Per-feature z-score statistics, computed from training data only."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValidationError("norm mean/std must be 1-D arrays of equal length")
        if np.any(self.std <= 0):
            raise ValidationError("norm std must be positive")

    @classmethod
    def from_data(cls, x: np.ndarray) -> "NormStats":
        x = np.asarray(x, dtype=np.float64)
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std < STD_FLOOR, 1.0, std)
        return cls(mean, std)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, NormStats)
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.std, other.std)
        )


@dataclass
class ModelState:
    """Trained model: architecture, normalization statistics, flat parameters."""

    spec: ModelSpec
    norm: NormStats
    params: np.ndarray
    seed: int

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.ndim != 1:
            raise ValidationError("params must be a flat array")
        expected = expected_param_count(self.spec)
        if self.params.size != expected:
            raise ValidationError(
                f"params length {self.params.size} does not match spec "
                f"({self.spec.kind}: expected {expected})"
            )
        if self.norm.mean.size != self.spec.input_dim:
            raise ValidationError(
                f"norm length {self.norm.mean.size} does not match input_dim "
                f"{self.spec.input_dim}"
            )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ModelState)
            and self.spec == other.spec
            and self.norm == other.norm
            and np.array_equal(self.params, other.params)
            and self.seed == other.seed
        )


# ---------------------------------------------------------------------------
# Dataset directory format
# ---------------------------------------------------------------------------


def _stream_records(seq: RawSequence) -> list[tuple[float, int, str, list[float]]]:
    recs: list[tuple[float, int, str, list[float]]] = []
    for i in range(len(seq.exo)):
        recs.append((float(seq.exo.t[i]), 0, "exo", seq.exo.values[i].tolist()))
    for i in range(len(seq.emg)):
        recs.append((float(seq.emg.t[i]), 1, "emg", seq.emg.values[i].tolist()))
    for i in range(len(seq.gt)):
        recs.append((float(seq.gt.t[i]), 2, "gt", [float(seq.gt.values[i])]))
    recs.sort(key=lambda r: (r[0], r[1]))
    return recs


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset directory (manifest + one JSONL stream file per sequence).

    Output is byte-stable: saving the same dataset twice yields identical files.
    """
    root = Path(path)
    try:
        root.mkdir(parents=True, exist_ok=True)
        entries = []
        for seq in sorted(dataset.sequences, key=lambda s: s.id):
            fname = f"{seq.id}.jsonl"
            entry: dict = {
                "id": seq.id,
                "user": seq.user,
                "session": seq.session,
                "modality": seq.modality.value,
                "file": fname,
            }
            if seq.switches is not None:
                entry["switches"] = [
                    {"t": sw.t, "modality": sw.modality.value} for sw in seq.switches
                ]
            entries.append(entry)
            with open(root / fname, "w", encoding="utf-8") as fh:
                for t, _, src, v in _stream_records(seq):
                    fh.write(
                        json.dumps({"t": t, "src": src, "v": v}, separators=(",", ":"))
                    )
                    fh.write("\n")
        manifest = {
            "version": MANIFEST_VERSION,
            "generator_seed": dataset.generator_seed,
            "feature_order": list(FEATURE_NAMES),
            "sequences": entries,
        }
        with open(root / MANIFEST_NAME, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise DatasetFormatError(f"failed to write dataset at {root}: {exc}") from exc


def _parse_sequence_file(path: Path, seq_id: str) -> tuple[ExoStream, EmgStream, TrackerStream]:
    exo_t: list[float] = []
    exo_v: list[list[float]] = []
    emg_t: list[float] = []
    emg_v: list[list[float]] = []
    gt_t: list[float] = []
    gt_v: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                t = float(rec["t"])
                src = rec["src"]
                v = rec["v"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetFormatError(
                    f"{path}:{lineno}: malformed stream record ({exc})"
                ) from exc
            if src == "exo":
                if len(v) != 2:
                    raise ValidationError(
                        f"{seq_id}: exo record at t={t} has {len(v)} values, expected 2"
                    )
                exo_t.append(t)
                exo_v.append([float(x) for x in v])
            elif src == "emg":
                if len(v) != EMG_CHANNELS:
                    raise ValidationError(
                        f"{seq_id}: emg record at t={t} has {len(v)} channels, "
                        f"expected {EMG_CHANNELS}"
                    )
                emg_t.append(t)
                emg_v.append([float(x) for x in v])
            elif src == "gt":
                if len(v) != 1:
                    raise ValidationError(
                        f"{seq_id}: gt record at t={t} has {len(v)} values, expected 1"
                    )
                gt_t.append(t)
                gt_v.append(float(v[0]))
            else:
                raise DatasetFormatError(f"{path}:{lineno}: unknown src {src!r}")
    exo = ExoStream(np.array(exo_t), np.array(exo_v).reshape(len(exo_t), 2))
    emg = EmgStream(np.array(emg_t), np.array(emg_v).reshape(len(emg_t), EMG_CHANNELS))
    gt = TrackerStream(np.array(gt_t), np.array(gt_v))
    return exo, emg, gt


def load_dataset(path: str | Path) -> Dataset:
    """Load a dataset directory written by :func:`save_dataset`.

    Nonconformant durations are accepted (query ``Dataset.nonconformant_ids``);
    structural problems (missing files, unsorted timestamps, wrong channel
    counts) raise.
    """
    root = Path(path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DatasetFormatError(f"missing {MANIFEST_NAME} in {root}")
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetFormatError(f"unreadable manifest {manifest_path}: {exc}") from exc
    if manifest.get("version") != MANIFEST_VERSION:
        raise DatasetFormatError(
            f"unsupported manifest version {manifest.get('version')!r}"
        )
    order = manifest.get("feature_order")
    if order is not None and tuple(order) != FEATURE_NAMES:
        raise DatasetFormatError(
            f"feature order {order} does not match the canonical order "
            f"{list(FEATURE_NAMES)}"
        )
    sequences = []
    for entry in manifest.get("sequences", []):
        try:
            seq_id = entry["id"]
            fname = entry["file"]
            user = entry["user"]
            session = entry["session"]
            modality = Modality.from_string(entry["modality"])
        except KeyError as exc:
            raise DatasetFormatError(f"manifest entry missing key {exc}") from exc
        fpath = root / fname
        if not fpath.is_file():
            raise DatasetFormatError(f"manifest references missing file {fpath}")
        exo, emg, gt = _parse_sequence_file(fpath, seq_id)
        switches = None
        if "switches" in entry:
            switches = tuple(
                ModalitySwitch(float(sw["t"]), Modality.from_string(sw["modality"]))
                for sw in entry["switches"]
            )
        sequences.append(
            RawSequence(
                id=seq_id,
                user=user,
                session=session,
                modality=modality,
                exo=exo,
                emg=emg,
                gt=gt,
                switches=switches,
            )
        )
    return Dataset(sequences=sequences, generator_seed=manifest.get("generator_seed"))


# ---------------------------------------------------------------------------
# Model file format
# ---------------------------------------------------------------------------


def save_model(model: ModelState, path: str | Path) -> None:
    """Write a model as a single JSON document (full float64 precision)."""
    doc = {
        "spec": {
            "kind": model.spec.kind,
            "input_dim": model.spec.input_dim,
            "feature_subset": model.spec.feature_subset,
            "extra": model.spec.extra,
        },
        "norm": {"mean": model.norm.mean.tolist(), "std": model.norm.std.tolist()},
        "params": model.params.tolist(),
        "seed": model.seed,
    }
    path = Path(path)
    try:
        if path.parent != Path(""):
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
    except OSError as exc:
        raise DatasetFormatError(f"failed to write model at {path}: {exc}") from exc


def load_model(path: str | Path) -> ModelState:
    """Load a model file; parameter counts are validated against the spec."""
    path = Path(path)
    if not path.is_file():
        raise DatasetFormatError(f"missing model file {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        spec = ModelSpec(
            kind=doc["spec"]["kind"],
            input_dim=int(doc["spec"]["input_dim"]),
            feature_subset=doc["spec"].get("feature_subset", "full"),
            extra=doc["spec"].get("extra", {}),
        )
        norm = NormStats(np.array(doc["norm"]["mean"]), np.array(doc["norm"]["std"]))
        params = np.array(doc["params"], dtype=np.float64)
        seed = int(doc["seed"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DatasetFormatError(f"malformed model file {path}: {exc}") from exc
    return ModelState(spec=spec, norm=norm, params=params, seed=seed)
