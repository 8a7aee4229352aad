"""Generator determinism and the structure the signal model must encode."""

import numpy as np
import pytest

from handstate.core import HALF_PI, Modality, ValidationError, save_dataset
from handstate.evaluation import run_per_user_cv
from handstate.models import TrainConfig
from handstate.synthgen import (
    MOTION_RESPONSE,
    ProtocolConfig,
    UserProfile,
    generate_dataset,
    generate_online_dataset,
    generate_online_session,
    sample_profile,
    simulate_sequence,
)


class TestProtocolShape:
    def test_default_dataset_counts(self):
        ds = generate_dataset(ProtocolConfig(), seed=42)
        assert len(ds.sequences) == 45
        assert ds.users == [f"u{i}" for i in range(5)]
        assert ds.is_protocol_complete()
        for seq in ds.sequences[:3]:
            assert abs(len(seq.exo) - 1200) <= 1
            assert abs(len(seq.emg) - 3000) <= 1
            assert abs(len(seq.gt) - 5400) <= 1

    def test_single_user_count(self):
        ds = generate_dataset(ProtocolConfig(users=1, sequence_duration=20.0), seed=0)
        assert len(ds.sequences) == 9

    def test_duration_must_be_multiple_of_period(self):
        with pytest.raises(ValidationError, match="multiple"):
            ProtocolConfig(sequence_duration=25.0)

    def test_determinism_byte_identical(self, tmp_path):
        cfg = ProtocolConfig(sequence_duration=20.0, users=2)
        save_dataset(generate_dataset(cfg, seed=9), tmp_path / "a")
        save_dataset(generate_dataset(cfg, seed=9), tmp_path / "b")
        for f in sorted((tmp_path / "a").iterdir()):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_distinct_repetitions_differ(self):
        ds = generate_dataset(ProtocolConfig(users=1, sequence_duration=20.0), seed=0)
        a, b = ds.sequences[0], ds.sequences[1]
        assert a.modality == b.modality
        assert not np.array_equal(a.emg.values, b.emg.values)

    def test_sessions_share_profiles_but_not_noise(self):
        cfg = ProtocolConfig(users=1, sequence_duration=20.0)
        a = generate_dataset(cfg, seed=4, session="s0")
        b = generate_dataset(cfg, seed=4, session="s1")
        assert not np.array_equal(a.sequences[0].emg.values, b.sequences[0].emg.values)
        assert a.sequences[0].session == "s0" and b.sequences[0].session == "s1"


class TestProfiles:
    def test_sampled_profiles_satisfy_invariants(self):
        cfg = ProtocolConfig()
        for u in range(8):
            p = sample_profile(cfg, u, 42)
            assert p.emg_mixing.shape == (8, 2)
            assert np.all(p.emg_mixing >= 0) and np.all(p.emg_mixing <= 1.5)
            assert np.all(p.emg_noise_std > 0)

    def test_invalid_profile_rejected(self):
        with pytest.raises(ValidationError):
            UserProfile(
                user="x",
                emg_mixing=np.full((8, 2), 2.0),
                emg_noise_std=np.full(8, 0.1),
                motor_backlash=0.1,
                current_gain=0.5,
                session_drift=0.1,
            )


class TestSignalModel:
    def test_helping_amplitude_exceeds_opposing_every_user(self):
        cfg = ProtocolConfig()
        for u in range(5):
            p = sample_profile(cfg, u, 42)
            h = simulate_sequence(p, Modality.HELPING, cfg, seed=1)
            o = simulate_sequence(p, Modality.OPPOSING, cfg, seed=2)
            assert (h.gt.values.max() - h.gt.values.min()) > (
                o.gt.values.max() - o.gt.values.min()
            )

    def test_passive_emg_rms_below_quarter_of_helping(self):
        cfg = ProtocolConfig()
        for u in range(5):
            p = sample_profile(cfg, u, 42)
            h = simulate_sequence(p, Modality.HELPING, cfg, seed=10)
            q = simulate_sequence(p, Modality.PASSIVE, cfg, seed=11)
            rms_h = np.sqrt((h.emg.values**2).mean(axis=0))
            rms_p = np.sqrt((q.emg.values**2).mean(axis=0))
            assert np.all(rms_p < 0.25 * rms_h)

    def test_position_insensitive_to_modality(self):
        cfg = ProtocolConfig()
        for u in range(5):
            p = sample_profile(cfg, u, 42)
            h = simulate_sequence(p, Modality.HELPING, cfg, seed=20)
            o = simulate_sequence(p, Modality.OPPOSING, cfg, seed=21)
            corr = np.corrcoef(h.exo.values[:, 0], o.exo.values[:, 0])[0, 1]
            assert corr > 0.95

    def test_noiseless_zero_backlash_closed_form(self):
        cfg = ProtocolConfig(noise_scale=0.0, sequence_duration=20.0)
        profile = UserProfile(
            user="x",
            emg_mixing=np.full((8, 2), 1.0),
            emg_noise_std=np.full(8, 0.1),
            motor_backlash=0.0,
            current_gain=0.4,
            session_drift=0.0,
        )
        seq = simulate_sequence(profile, Modality.HELPING, cfg, seed=0)
        gain, lag = MOTION_RESPONSE[Modality.HELPING]
        t = seq.gt.t
        expected = gain * (1 - np.cos(2 * np.pi * (t - lag) / cfg.cycle_period)) / 2 * HALF_PI
        np.testing.assert_allclose(seq.gt.values, np.clip(expected, 0, HALF_PI), atol=1e-12)


class TestOnlineSession:
    def test_duration_segments_and_boundaries(self):
        cfg = ProtocolConfig()
        profile = sample_profile(cfg, 0, 42)
        seq = generate_online_session(profile, cfg, seed=7)
        assert seq.duration == pytest.approx(180.0, abs=0.1)
        assert seq.switches is not None and len(seq.switches) == 6
        assert [sw.t for sw in seq.switches] == [0.0, 30.0, 60.0, 90.0, 120.0, 150.0]
        mods = [sw.modality for sw in seq.switches]
        assert mods == [
            Modality.HELPING,
            Modality.PASSIVE,
            Modality.OPPOSING,
        ] * 2

    def test_segment_statistics_match_single_modality(self):
        cfg = ProtocolConfig()
        profile = sample_profile(cfg, 1, 42)
        online = generate_online_session(profile, cfg, seed=7, session="s0")
        refs = {
            m: simulate_sequence(profile, m, cfg, seed=100 + i, session="s0")
            for i, m in enumerate(Modality)
        }
        for k, sw in enumerate(online.switches):
            t0, t1 = sw.t, sw.t + 30.0
            sel = (online.emg.t >= t0) & (online.emg.t < t1)
            seg_mean = online.emg.values[sel].mean(axis=0)
            ref = refs[sw.modality]
            ref_mean = ref.emg.values[ref.emg.t < 30.0].mean(axis=0)
            np.testing.assert_allclose(seg_mean, ref_mean, atol=0.03)

    def test_online_dataset_one_sequence_per_user(self):
        cfg = ProtocolConfig(users=2)
        ds = generate_online_dataset(cfg, seed=1)
        assert len(ds.sequences) == 2
        assert all(s.switches is not None for s in ds.sequences)


class TestRecoverableStructure:
    def test_noise_only_hurts_compliance(self):
        # monotone difficulty: noiseless full-feature CV beats default noise
        quiet = generate_dataset(
            ProtocolConfig(sequence_duration=20.0, users=1, noise_scale=0.0), seed=6
        )
        noisy = generate_dataset(
            ProtocolConfig(sequence_duration=20.0, users=1), seed=6
        )
        cfg = TrainConfig(seed=0)
        r_quiet = run_per_user_cv(quiet, "linear", "full", cfg)["u0"].report
        r_noisy = run_per_user_cv(noisy, "linear", "full", cfg)["u0"].report
        assert r_quiet.r2[1] >= r_noisy.r2[1]

    def test_zero_current_gain_kills_exo_compliance(self):
        cfg_p = ProtocolConfig(
            sequence_duration=20.0, users=1, current_gain_range=(0.0, 0.0)
        )
        ds = generate_dataset(cfg_p, seed=8)
        rep = run_per_user_cv(ds, "linear", "exo_only", TrainConfig(seed=0))["u0"].report
        assert abs(rep.r2[1]) < 0.1
