"""Metrics arithmetic, fold-plan invariants, and protocol accounting."""

import copy
import math

import numpy as np
import pytest

from handstate.core import Modality, UndefinedMetricError, ValidationError
from handstate.evaluation import (
    FoldPlan,
    MetricsReport,
    make_fold_plan,
    metrics_rows,
    r_squared,
    r_squared_or_nan,
    rmse,
    run_ablation,
    run_cross_session,
    run_leave_one_user_out,
    run_per_user_cv,
    write_metrics_csv,
)
from handstate.models import TrainConfig
from handstate.sync import align
from handstate.synthgen import ProtocolConfig, generate_dataset

from conftest import make_sequence


def pairs(*rows):
    return np.array(rows, dtype=np.float64)


class TestRmse:
    def test_perfect_prediction_is_zero(self):
        t = pairs([0.1, -1], [0.5, 1])
        assert rmse(t, t) == (0.0, 0.0)

    def test_constant_offset(self):
        t = pairs([0.1, 0], [0.5, 0], [0.9, 0])
        p = t.copy()
        p[:, 0] += 1.0
        assert rmse(p, t) == (pytest.approx(1.0, abs=1e-15), 0.0)

    def test_hand_arithmetic(self):
        p = pairs([0, 0], [0, 0])
        t = pairs([3, 0], [4, 0])
        r = rmse(p, t)
        assert r[0] == pytest.approx(math.sqrt(25 / 2), abs=1e-12)
        assert r[1] == 0.0

    def test_errors(self):
        with pytest.raises(ValidationError, match="mismatch"):
            rmse(pairs([0, 0]), pairs([0, 0], [1, 1]))
        with pytest.raises(ValidationError, match="empty"):
            rmse(np.empty((0, 2)), np.empty((0, 2)))

    def test_translation_covariance_between_targets(self):
        rng = np.random.default_rng(0)
        t = rng.normal(size=(50, 2))
        p = rng.normal(size=(50, 2))
        shifted = p.copy()
        shifted[:, 0] += 0.37
        assert rmse(shifted, t)[1] == rmse(p, t)[1]
        assert r_squared(shifted, t)[1] == r_squared(p, t)[1]


class TestRSquared:
    def test_ideal_is_one(self):
        t = pairs([0.1, -1], [0.5, 0], [0.9, 1])
        assert r_squared(t, t) == (1.0, 1.0)

    def test_mean_predictor_is_zero(self):
        t = pairs([0.1, -1], [0.5, 0], [0.9, 1])
        p = np.tile(t.mean(axis=0), (3, 1))
        r = r_squared(p, t)
        assert r[0] == pytest.approx(0.0, abs=1e-15)
        assert r[1] == pytest.approx(0.0, abs=1e-15)

    def test_hand_arithmetic(self):
        t = pairs([0, -1], [1, 0], [2, 1])
        p = pairs([0, -1], [0, 0], [0, 1])
        r = r_squared(p, t)
        assert r[0] == pytest.approx(1 - 5 / 2, abs=1e-12)
        assert r[1] == 1.0

    def test_zero_variance_raises(self):
        t = pairs([0.5, 0], [0.5, 1])
        with pytest.raises(UndefinedMetricError, match="opening"):
            r_squared(t, t)

    def test_or_nan_variant(self):
        t = pairs([0.5, 0], [0.5, 1])
        r = r_squared_or_nan(t, t)
        assert math.isnan(r[0]) and r[1] == 1.0

    def test_pooled_differs_from_mean_of_folds(self):
        # fold 1 predicts perfectly; fold 2 inverts its two points
        f1_t = pairs([0.0, -1], [1.0, 1])
        f1_p = f1_t
        f2_t = pairs([1.2, -1], [1.4, 1])
        f2_p = pairs([1.4, -1], [1.2, 1])
        per_fold = [r_squared(f1_p, f1_t)[0], r_squared(f2_p, f2_t)[0]]
        mean_of_folds = np.mean(per_fold)
        pooled = r_squared(np.vstack([f1_p, f2_p]), np.vstack([f1_t, f2_t]))[0]
        assert mean_of_folds == pytest.approx(-1.0)  # (1 + -3) / 2
        assert pooled != pytest.approx(mean_of_folds)
        # hand value: ss_res = 0.08, mean = 0.9, ss_tot = 1.16
        assert pooled == pytest.approx(1 - 0.08 / 1.16, abs=1e-12)


def nine_sequences(duration=1.0):
    seqs = []
    k = 0
    for mod in Modality:
        for rep in range(3):
            seqs.append(
                make_sequence(
                    seq_id=f"u0-s0-{mod.value}{rep}",
                    modality=mod,
                    duration=duration,
                    gt_fn=lambda t, r=rep: 0.2 + 0.1 * r + 0.2 * np.sin(t),
                )
            )
            k += 1
    return seqs


class TestFoldPlan:
    def test_invariants_hold(self):
        seqs = nine_sequences()
        plan = make_fold_plan(seqs, seed=3)
        all_val = plan.validation_ids()
        assert sorted(all_val) == sorted(s.id for s in seqs)
        for train_ids, val_ids in plan.folds:
            assert len(val_ids) == 3 and len(train_ids) == 6
            assert not set(train_ids) & set(val_ids)
            val_mods = {i.split("-")[2][:-1] for i in val_ids}
            assert val_mods == {"helping", "passive", "opposing"}
            train_mods = [i.split("-")[2][:-1] for i in train_ids]
            assert all(train_mods.count(m.value) == 2 for m in Modality)

    def test_seed_determinism_and_variation(self):
        seqs = nine_sequences()
        a = make_fold_plan(seqs, seed=5)
        b = make_fold_plan(seqs, seed=5)
        assert a == b
        different = any(
            make_fold_plan(seqs, seed=s) != a for s in range(10)
        )
        assert different

    def test_wrong_modality_counts_rejected(self):
        seqs = nine_sequences()[:8]
        with pytest.raises(ValidationError, match="3 sequences per modality"):
            make_fold_plan(seqs, seed=0)


@pytest.fixture(scope="module")
def small_ds():
    cfg = ProtocolConfig(sequence_duration=20.0, users=2)
    return generate_dataset(cfg, seed=11)


class TestPerUserCV:
    def test_dummy_pooled_r2_near_zero(self, small_ds):
        res = run_per_user_cv(small_ds, "dummy", "full", TrainConfig(seed=0))
        for user, r in res.items():
            assert abs(r.report.r2[0]) < 0.05
            assert abs(r.report.r2[1]) < 0.05

    def test_fold_accounting(self, small_ds):
        res = run_per_user_cv(small_ds, "dummy", "full", TrainConfig(seed=0))
        for user, r in res.items():
            assert len(r.folds) == 3
            seqs = small_ds.by_user(user)
            assert sorted(r.plan.validation_ids()) == sorted(s.id for s in seqs)
            n_rows = sum(len(align(s)) for s in seqs)
            assert r.predictions.shape == (n_rows, 2)

    def test_no_leakage_norm_equals_fold_train_moments(self, small_ds):
        from handstate.sync import stack_aligned

        res = run_per_user_cv(small_ds, "linear", "full", TrainConfig(seed=0))
        for user, r in res.items():
            by_id = {s.id: s for s in small_ds.by_user(user)}
            for fold in r.folds:
                rows = np.vstack(
                    [stack_aligned(align(by_id[i]))[1] for i in fold.train_ids]
                )
                np.testing.assert_allclose(fold.model.norm.mean, rows.mean(axis=0), atol=1e-12)


class TestAblation:
    def test_grid_shape_and_ci(self, small_ds):
        cells = run_ablation(small_ds, architectures=("dummy", "linear"), cfg=TrainConfig(seed=0))
        assert len(cells) == 6  # 2 architectures x 3 subsets
        for cell in cells:
            assert set(cell.per_user) == {"u0", "u1"}
            assert cell.ci80_r2 is not None  # n=2 users
            lo, hi = cell.ci80_r2[0]
            assert lo <= cell.mean_r2[0] <= hi

    def test_single_user_ci_absent(self):
        cfg = ProtocolConfig(sequence_duration=20.0, users=1)
        ds = generate_dataset(cfg, seed=3)
        cells = run_ablation(ds, architectures=("dummy",), cfg=TrainConfig(seed=0))
        assert all(c.ci80_r2 is None and c.ci80_rmse is None for c in cells)

    def test_rows_and_csv(self, small_ds, tmp_path):
        cells = run_ablation(small_ds, architectures=("dummy",), cfg=TrainConfig(seed=0))
        reports = [rep for c in cells for rep in c.per_user.values()]
        rows = metrics_rows(reports)
        # users x archs x subsets x targets x metrics
        assert len(rows) == 2 * 1 * 3 * 2 * 2
        write_metrics_csv(rows, tmp_path / "a.csv")
        write_metrics_csv(rows, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


class TestCrossSession:
    def test_degenerate_same_data_is_in_sample_upper_bound(self, small_ds):
        train = copy.deepcopy(small_ds)
        train.sequences = [s for s in train.sequences if s.user == "u0"]
        test = copy.deepcopy(train)
        for s in test.sequences:
            s.session = "s1"
        rep = run_cross_session(train, test, "linear", "full", TrainConfig(seed=0))
        cv = run_per_user_cv(train, "linear", "full", TrainConfig(seed=0))["u0"]
        assert rep.r2[0] >= cv.report.r2[0] - 1e-9
        assert rep.r2[1] >= cv.report.r2[1] - 1e-9

    def test_overlapping_sessions_rejected(self, small_ds):
        train = copy.deepcopy(small_ds)
        train.sequences = [s for s in train.sequences if s.user == "u0"]
        with pytest.raises(ValidationError, match="session"):
            run_cross_session(train, train, "dummy", "full", TrainConfig(seed=0))

    def test_averaging_identical_models_equals_single(self):
        # nine identical-stream sequences: every fold model sees the same
        # rows, so the 3-model average must equal any single model
        seqs = nine_sequences(duration=1.0)
        base = seqs[0]
        for s in seqs:
            s.exo = copy.deepcopy(base.exo)
            s.emg = copy.deepcopy(base.emg)
            s.gt = copy.deepcopy(base.gt)
        from handstate.core import Dataset
        from handstate.models import predict_array, train_dummy
        from handstate.sync import stack_aligned

        train_ds = Dataset(sequences=seqs)
        test = copy.deepcopy(train_ds)
        for s in test.sequences:
            s.session = "s1"
        rep = run_cross_session(train_ds, test, "dummy", "full", TrainConfig(seed=0))
        rows = []
        for s in seqs:
            _, x, y = stack_aligned(align(s))
            rows.append((x, y))
        mono = train_dummy((np.vstack([x for x, _ in rows]), np.vstack([y for _, y in rows])))
        single = np.vstack([predict_array(mono, x) for x, _ in rows])
        truth = np.vstack([y for _, y in rows])
        pooled_rmse = rmse(single, truth)
        assert rep.rmse[0] == pytest.approx(pooled_rmse[0], abs=1e-12)
        assert rep.rmse[1] == pytest.approx(pooled_rmse[1], abs=1e-12)


class TestLouo:
    def test_accounting_two_users(self, small_ds):
        reports = run_leave_one_user_out(small_ds, "dummy", "full", TrainConfig(seed=0))
        assert set(reports) == {"u0", "u1"}
        for user, rep in reports.items():
            n_rows = sum(len(align(s)) for s in small_ds.by_user(user))
            assert rep.n_samples == n_rows

    def test_single_user_rejected(self):
        cfg = ProtocolConfig(sequence_duration=20.0, users=1)
        ds = generate_dataset(cfg, seed=3)
        with pytest.raises(ValidationError, match="2 users"):
            run_leave_one_user_out(ds, "dummy", "full", TrainConfig(seed=0))
