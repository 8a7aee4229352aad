"""Metrics, fold construction, and the three cross-validation protocols.

Per-user protocol: 3 folds, each validating on one sequence per modality and
training on the remaining six; predictions of all folds are pooled and the
metrics computed once on the pool (pooled-fold metrics, not averages of
per-fold metrics).  Cross-session: the three fold models of the training
session are averaged per timestep on the unseen session.  Leave-one-user-out:
one model per held-out user, trained on everyone else.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .core import (
    Dataset,
    Modality,
    ModelState,
    RawSequence,
    TargetPair,
    UndefinedMetricError,
    ValidationError,
)
from .models import StatefulPredictor, TrainConfig, predict_array, subset_columns, train
from .sync import AlignmentConfig, align, stack_aligned

TARGET_NAMES = ("opening", "compliance")
ARCHITECTURES = ("dummy", "linear", "mlp", "svr", "lstm")
SUBSETS = ("full", "exo_only", "emg_only")


def _as_target_array(values) -> np.ndarray:
    if isinstance(values, np.ndarray):
        arr = np.asarray(values, dtype=np.float64)
    else:
        arr = np.array(
            [
                [v.opening, v.compliance] if isinstance(v, TargetPair) else v
                for v in values
            ],
            dtype=np.float64,
        )
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError(f"expected (n, 2) target values, got {arr.shape}")
    return arr


def rmse(pred, truth) -> tuple[float, float]:
    """Per-target root-mean-square error."""
    p = _as_target_array(pred)
    t = _as_target_array(truth)
    if p.shape != t.shape:
        raise ValidationError(f"length mismatch: {p.shape[0]} vs {t.shape[0]}")
    if p.shape[0] == 0:
        raise ValidationError("empty evaluation pool")
    err = np.sqrt(np.mean((p - t) ** 2, axis=0))
    return float(err[0]), float(err[1])


def _r2_single(pred: np.ndarray, truth: np.ndarray, name: str) -> float:
    ss_tot = float(np.sum((truth - truth.mean()) ** 2))
    if ss_tot <= 0.0:
        raise UndefinedMetricError(
            f"r_squared undefined for target {name!r}: zero truth variance"
        )
    ss_res = float(np.sum((truth - pred) ** 2))
    return 1.0 - ss_res / ss_tot


def r_squared(pred, truth) -> tuple[float, float]:
    """Per-target coefficient of determination on the evaluation pool.

    1 - SS_res/SS_tot with the pool mean as reference; raises
    :class:`UndefinedMetricError` when a target has zero variance in truth.
    """
    p = _as_target_array(pred)
    t = _as_target_array(truth)
    if p.shape != t.shape:
        raise ValidationError(f"length mismatch: {p.shape[0]} vs {t.shape[0]}")
    if p.shape[0] < 2:
        raise ValidationError("need at least 2 samples for r_squared")
    return tuple(
        _r2_single(p[:, k], t[:, k], name) for k, name in enumerate(TARGET_NAMES)
    )


def r_squared_or_nan(pred, truth) -> tuple[float, float]:
    """Like :func:`r_squared` but NaN for targets with zero truth variance
    (e.g. the constant compliance of a single-modality sequence)."""
    p = _as_target_array(pred)
    t = _as_target_array(truth)
    out = []
    for k, name in enumerate(TARGET_NAMES):
        try:
            out.append(_r2_single(p[:, k], t[:, k], name))
        except UndefinedMetricError:
            out.append(float("nan"))
    return tuple(out)


@dataclass(frozen=True)
class MetricsReport:
    """Pooled per-target metrics plus grouping metadata."""

    r2: tuple[float, float]
    rmse: tuple[float, float]
    n_samples: int
    user: str = ""
    architecture: str = ""
    subset: str = ""


def _report(pred: np.ndarray, truth: np.ndarray, **meta) -> MetricsReport:
    return MetricsReport(
        r2=r_squared(pred, truth),
        rmse=rmse(pred, truth),
        n_samples=int(truth.shape[0]),
        **meta,
    )


# ---------------------------------------------------------------------------
# fold plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FoldPlan:
    """Train/validation sequence-id assignment for the 3-fold protocol."""

    folds: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]

    def validation_ids(self) -> list[str]:
        out: list[str] = []
        for _, val in self.folds:
            out.extend(val)
        return out


def make_fold_plan(seqs: list[RawSequence], seed: int = 0) -> FoldPlan:
    """3 folds from 9 sequences: each fold validates one sequence per modality."""
    by_modality: dict[Modality, list[str]] = {m: [] for m in Modality}
    for s in seqs:
        if s.modality in by_modality:
            by_modality[s.modality].append(s.id)
    counts = {m: len(v) for m, v in by_modality.items()}
    if any(c != 3 for c in counts.values()):
        raise ValidationError(
            f"fold plan needs exactly 3 sequences per modality, got {counts}"
        )
    rng = np.random.default_rng(seed)
    shuffled = {}
    for m in Modality:
        ids = sorted(by_modality[m])
        rng.shuffle(ids)
        shuffled[m] = ids
    folds = []
    for k in range(3):
        val = tuple(shuffled[m][k] for m in Modality)
        train_ids = tuple(
            shuffled[m][j] for m in Modality for j in range(3) if j != k
        )
        folds.append((train_ids, val))
    return FoldPlan(folds=tuple(folds))


# ---------------------------------------------------------------------------
# protocol runners
# ---------------------------------------------------------------------------


def _stable_seed(*parts) -> int:
    text = "|".join(str(p) for p in parts)
    return zlib.crc32(text.encode("utf-8"))


class _AlignedCache:
    """Aligns each sequence once; hands out subset-sliced copies."""

    def __init__(self, align_cfg: AlignmentConfig):
        self.align_cfg = align_cfg
        self._cache: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray | None]] = {}

    def get(self, seq: RawSequence, subset: str) -> tuple[np.ndarray, np.ndarray | None]:
        if seq.id not in self._cache:
            self._cache[seq.id] = stack_aligned(align(seq, self.align_cfg))
        _, x, y = self._cache[seq.id]
        cols = list(subset_columns(subset))
        return x[:, cols], y


def _fit(
    architecture: str,
    train_data: list[tuple[np.ndarray, np.ndarray]],
    cfg: TrainConfig,
    subset: str,
) -> ModelState:
    if architecture == "lstm":
        return train(architecture, train_data, cfg, feature_subset=subset)
    x = np.vstack([x for x, _ in train_data])
    y = np.vstack([y for _, y in train_data])
    return train(architecture, (x, y), cfg, feature_subset=subset)


@dataclass
class CVFold:
    model: ModelState
    train_ids: tuple[str, ...]
    validation_ids: tuple[str, ...]


@dataclass
class UserCVResult:
    report: MetricsReport
    plan: FoldPlan
    folds: list[CVFold]
    predictions: np.ndarray  # pooled over all validation sequences
    truths: np.ndarray


def run_per_user_cv(
    dataset: Dataset,
    architecture: str,
    subset: str = "full",
    cfg: TrainConfig = TrainConfig(),
    align_cfg: AlignmentConfig = AlignmentConfig(),
    users: list[str] | None = None,
) -> dict[str, UserCVResult]:
    """3-fold CV independently per user; metrics pooled across folds."""
    cache = _AlignedCache(align_cfg)
    results: dict[str, UserCVResult] = {}
    for user in users if users is not None else dataset.users:
        seqs = dataset.by_user(user)
        plan = make_fold_plan(seqs, seed=_stable_seed(cfg.seed, user, "plan"))
        by_id = {s.id: s for s in seqs}
        preds, truths = [], []
        folds: list[CVFold] = []
        for fold_idx, (train_ids, val_ids) in enumerate(plan.folds):
            fold_cfg = TrainConfig(
                lr=cfg.lr,
                beta1=cfg.beta1,
                beta2=cfg.beta2,
                eps=cfg.eps,
                epochs=cfg.epochs,
                batch=cfg.batch,
                seed=_stable_seed(cfg.seed, user, fold_idx),
                loss=cfg.loss,
            )
            try:
                train_data = [cache.get(by_id[i], subset) for i in train_ids]
                model = _fit(architecture, train_data, fold_cfg, subset)
                for val_id in val_ids:
                    x, y = cache.get(by_id[val_id], subset)
                    preds.append(predict_array(model, x))
                    truths.append(y)
            except (ValidationError, UndefinedMetricError) as exc:
                raise type(exc)(f"user {user}, fold {fold_idx}: {exc}") from exc
            folds.append(CVFold(model, train_ids, val_ids))
        pooled_pred = np.vstack(preds)
        pooled_truth = np.vstack(truths)
        results[user] = UserCVResult(
            report=_report(
                pooled_pred,
                pooled_truth,
                user=user,
                architecture=architecture,
                subset=subset,
            ),
            plan=plan,
            folds=folds,
            predictions=pooled_pred,
            truths=pooled_truth,
        )
    return results


@dataclass
class AblationCell:
    """Cross-user aggregation of one (architecture, subset) combination."""

    architecture: str
    subset: str
    per_user: dict[str, MetricsReport]
    mean_r2: tuple[float, float]
    mean_rmse: tuple[float, float]
    ci80_r2: tuple[tuple[float, float], tuple[float, float]] | None
    ci80_rmse: tuple[tuple[float, float], tuple[float, float]] | None


def _mean_and_ci(values: np.ndarray) -> tuple[float, tuple[float, float] | None]:
    """Cross-user mean and 80% t-confidence interval (None when n == 1)."""
    n = values.size
    mean = float(values.mean())
    if n < 2:
        return mean, None
    half = float(
        stats.t.ppf(0.9, n - 1) * values.std(ddof=1) / np.sqrt(n)
    )
    return mean, (mean - half, mean + half)


def run_ablation(
    dataset: Dataset,
    architectures=ARCHITECTURES,
    cfg: TrainConfig = TrainConfig(),
    subsets=SUBSETS,
    align_cfg: AlignmentConfig = AlignmentConfig(),
    cfg_by_architecture: dict[str, TrainConfig] | None = None,
) -> list[AblationCell]:
    """Full {architecture} x {subset} grid of per-user CV metrics."""
    cells: list[AblationCell] = []
    for arch in architectures:
        arch_cfg = (cfg_by_architecture or {}).get(arch, cfg)
        for subset in subsets:
            results = run_per_user_cv(dataset, arch, subset, arch_cfg, align_cfg)
            reports = {u: r.report for u, r in results.items()}
            r2 = np.array([rep.r2 for rep in reports.values()])
            rm = np.array([rep.rmse for rep in reports.values()])
            mean_r2, ci_r2 = zip(*(_mean_and_ci(r2[:, k]) for k in range(2)))
            mean_rm, ci_rm = zip(*(_mean_and_ci(rm[:, k]) for k in range(2)))
            cells.append(
                AblationCell(
                    architecture=arch,
                    subset=subset,
                    per_user=reports,
                    mean_r2=tuple(mean_r2),
                    mean_rmse=tuple(mean_rm),
                    ci80_r2=None if ci_r2[0] is None else tuple(ci_r2),
                    ci80_rmse=None if ci_rm[0] is None else tuple(ci_rm),
                )
            )
    return cells


def run_cross_session(
    train_dataset: Dataset,
    test_dataset: Dataset,
    architecture: str,
    subset: str = "full",
    cfg: TrainConfig = TrainConfig(),
    align_cfg: AlignmentConfig = AlignmentConfig(),
) -> MetricsReport:
    """Train fold models on one session, average their predictions on another."""
    users = set(train_dataset.users) & set(test_dataset.users)
    if len(train_dataset.users) != 1 or len(test_dataset.users) != 1 or not users:
        raise ValidationError(
            "cross-session evaluation expects single-user datasets of the same user"
        )
    overlap = set(train_dataset.sessions) & set(test_dataset.sessions)
    if overlap:
        raise ValidationError(f"overlapping session ids: {sorted(overlap)}")
    user = next(iter(users))
    cv = run_per_user_cv(
        train_dataset, architecture, subset, cfg, align_cfg, users=[user]
    )[user]
    cache = _AlignedCache(align_cfg)
    preds, truths = [], []
    for seq in test_dataset.by_user(user):
        x, y = cache.get(seq, subset)
        fold_preds = [predict_array(f.model, x) for f in cv.folds]
        preds.append(np.mean(fold_preds, axis=0))
        truths.append(y)
    return _report(
        np.vstack(preds),
        np.vstack(truths),
        user=user,
        architecture=architecture,
        subset=subset,
    )


def run_leave_one_user_out(
    dataset: Dataset,
    architecture: str,
    subset: str = "full",
    cfg: TrainConfig = TrainConfig(),
    align_cfg: AlignmentConfig = AlignmentConfig(),
) -> dict[str, MetricsReport]:
    """Per held-out user: one model trained on all other users' sequences."""
    users = dataset.users
    if len(users) < 2:
        raise ValidationError("leave-one-user-out needs at least 2 users")
    cache = _AlignedCache(align_cfg)
    reports: dict[str, MetricsReport] = {}
    for user in users:
        train_seqs = [s for s in dataset.sequences if s.user != user]
        fold_cfg = TrainConfig(
            lr=cfg.lr,
            beta1=cfg.beta1,
            beta2=cfg.beta2,
            eps=cfg.eps,
            epochs=cfg.epochs,
            batch=cfg.batch,
            seed=_stable_seed(cfg.seed, user, "louo"),
            loss=cfg.loss,
        )
        model = _fit(
            architecture,
            [cache.get(s, subset) for s in train_seqs],
            fold_cfg,
            subset,
        )
        preds, truths = [], []
        for seq in dataset.by_user(user):
            x, y = cache.get(seq, subset)
            preds.append(predict_array(model, x))
            truths.append(y)
        reports[user] = _report(
            np.vstack(preds),
            np.vstack(truths),
            user=user,
            architecture=architecture,
            subset=subset,
        )
    return reports


# ---------------------------------------------------------------------------
# results table
# ---------------------------------------------------------------------------


def metrics_rows(reports: list[MetricsReport]) -> list[dict]:
    """Flatten reports into (user, architecture, subset, target, metric, value)."""
    rows = []
    for rep in reports:
        for k, target in enumerate(TARGET_NAMES):
            rows.append(
                {
                    "user": rep.user,
                    "architecture": rep.architecture,
                    "subset": rep.subset,
                    "target": target,
                    "metric": "r2",
                    "value": rep.r2[k],
                }
            )
            rows.append(
                {
                    "user": rep.user,
                    "architecture": rep.architecture,
                    "subset": rep.subset,
                    "target": target,
                    "metric": "rmse",
                    "value": rep.rmse[k],
                }
            )
    return rows


def write_metrics_csv(rows: list[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = ["user", "architecture", "subset", "target", "metric", "value"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            out["value"] = repr(float(row["value"]))
            writer.writerow(out)
