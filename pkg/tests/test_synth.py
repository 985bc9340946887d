import numpy as np
import pytest
from scipy import stats as sstats

import emgimu.oracles as oracle
from emgimu.classify import cv_evaluate
from emgimu.dsp import preprocess_recording
from emgimu.features import extract_matrix, time_features_block
from emgimu.oracles import oracle_check
from emgimu.quality import calibration_noise
from emgimu.session import (
    ChannelKind,
    Modality,
    Placement,
    Posture,
    ScheduleParams,
    SegmentKind,
)
from emgimu.synth import SynthSpec, gen_session
from tests.conftest import SMALL_SCHEDULE

GRID = {"shrinkage": [0.3], "tol": [1e-4]}


def _accuracy(rec, labels, modalities, placements=(Placement.W1, Placement.W2)):
    pre = preprocess_recording(rec)
    fm = extract_matrix(pre, labels,
                        channel_filter={(p, m) for p in placements
                                        for m in modalities})
    return cv_evaluate(fm, model_family="lda", grid=GRID).mean_accuracy


class TestDeterminism:
    def test_same_seed_byte_identical(self):
        spec = SynthSpec(seed=77, schedule=SMALL_SCHEDULE)
        rec_a, lab_a = gen_session(spec, 1)
        rec_b, lab_b = gen_session(spec, 1)
        assert lab_a == lab_b
        for ca, cb in zip(rec_a.channels, rec_b.channels):
            assert ca.samples.tobytes() == cb.samples.tobytes()

    def test_participants_and_postures_differ(self):
        spec = SynthSpec(seed=77, schedule=SMALL_SCHEDULE)
        rec_a, _ = gen_session(spec, 0)
        rec_b, _ = gen_session(spec, 1)
        rec_c, _ = gen_session(spec, 0, Posture.DEG180)
        assert not np.array_equal(rec_a.channels[0].samples,
                                  rec_b.channels[0].samples)
        assert not np.array_equal(rec_a.channels[0].samples[:1000],
                                  rec_c.channels[0].samples[:1000])

    def test_structure(self, small_session):
        _, rec, labels = small_session
        assert len(rec.channels) == 80
        emg = [c for c in rec.channels if c.kind is ChannelKind.EMG]
        assert len(emg) == 8 and all(c.rate_hz == 2000 for c in emg)
        imu = [c for c in rec.channels if c.kind is not ChannelKind.EMG]
        assert len(imu) == 72 and all(c.rate_hz == 200 for c in imu)

    def test_second_posture_has_no_calibration_by_default(self):
        spec = SynthSpec(seed=1, schedule=SMALL_SCHEDULE)
        rec90, lab90 = gen_session(spec, 0, Posture.DEG90)
        rec180, lab180 = gen_session(spec, 0, Posture.DEG180)
        assert rec90.calibration_span[1] > 0
        assert rec180.calibration_span == (0.0, 0.0)
        assert lab180.segments[0].kind is not SegmentKind.CALIBRATION


class TestCalibrationNoiseRecovery:
    def test_emg_sigma_within_2_percent(self):
        # full 15 s calibration at 2000 Hz, no participant spread
        spec = SynthSpec(seed=10, emg_noise_spread=0.0,
                         schedule=ScheduleParams(n_gestures=1, reps=1))
        rec, _ = gen_session(spec, 0)
        for ch in rec.emg_channels():
            sigma = calibration_noise(ch.samples[:int(15 * 2000)])
            assert sigma == pytest.approx(spec.emg_noise_uV, rel=0.02)

    def test_calibration_span_is_baseline_only(self, small_session):
        spec, rec, _ = small_session
        n_cal = int(spec.schedule.calibration_s * 2000)
        for ch in rec.emg_channels():
            cal = ch.samples[:n_cal]
            # no bursts: RMS of calibration == baseline sigma, far below burst level
            assert calibration_noise(cal) < 2 * spec.emg_noise_uV * (
                1 + spec.emg_noise_spread)


class TestSeparability:
    def test_zero_separability_indistinguishable_gestures(self):
        spec = SynthSpec(seed=4, separability=0.0, schedule=SMALL_SCHEDULE)
        rec, labels = gen_session(spec, 0)
        ch = rec.emg_channels()[0]
        segs = [s for s in labels.segments if s.kind is SegmentKind.GESTURE]
        pools = {}
        for s in segs:
            a, b = int(s.start_s * 2000), int(s.end_s * 2000)
            pools.setdefault(int(s.gesture), []).append(ch.samples[a:b])
        gest = sorted(pools)
        x0 = np.concatenate(pools[gest[0]])[::40]
        for g in gest[1:]:
            xg = np.concatenate(pools[g])[::40]
            assert sstats.ks_2samp(x0, xg).pvalue > 0.01

    def test_full_separability_gives_high_imu_accuracy(self):
        spec = SynthSpec(seed=6, separability=1.0, schedule=SMALL_SCHEDULE)
        rec, labels = gen_session(spec, 0)
        acc = _accuracy(rec, labels,
                        (Modality.ACCEL, Modality.GYRO, Modality.MAG))
        assert acc >= 0.95

    def test_accuracy_monotone_in_separability(self):
        # averaged over 3 seeds per level, accel-only at two placements
        levels = [0.0, 0.25, 0.5, 0.75, 1.0]
        means = []
        for sep in levels:
            accs = []
            for seed in (0, 1, 2):
                spec = SynthSpec(seed=seed, separability=sep,
                                 schedule=SMALL_SCHEDULE)
                rec, labels = gen_session(spec, 0)
                accs.append(_accuracy(rec, labels, (Modality.ACCEL,)))
            means.append(np.mean(accs))
        assert all(b >= a - 1e-9 for a, b in zip(means, means[1:])), means


class TestPaperLikeOrdering:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_modality_ordering_reproduced(self, seed):
        spec = SynthSpec(seed=seed)  # full default protocol
        rec, labels = gen_session(spec, 0)
        pre = preprocess_recording(rec)
        fm = extract_matrix(pre, labels)
        accs = {}
        for name, mods in (("emg", (Modality.EMG,)),
                           ("accel", (Modality.ACCEL,)),
                           ("gyro", (Modality.GYRO,)),
                           ("mag", (Modality.MAG,))):
            sub = fm.select_columns(placements=("W1", "W2"), modalities=mods)
            accs[name] = cv_evaluate(sub, model_family="lda",
                                     grid=GRID).mean_accuracy
        assert accs["accel"] > accs["emg"] > accs["gyro"]
        assert accs["mag"] > accs["emg"]


class TestOracleCheck:
    def test_mav_production_vs_oracle(self):
        report = oracle_check(
            lambda x: time_features_block(x[None, :])[0, 0],
            lambda x: oracle.mav(x.tolist()),
            trials=200, tolerance=1e-9, seed=3)
        assert report.passed and report.max_rel_dev <= 1e-9

    def test_broken_production_is_caught_with_counterexample(self):
        def broken_rms(x):  # off-by-one N
            return float(np.sqrt((x ** 2).sum() / (len(x) - 1)))
        report = oracle_check(
            broken_rms, lambda x: oracle.rms(x.tolist()),
            trials=50, tolerance=1e-9, seed=4)
        assert not report.passed
        assert report.failures and report.failures[0][1] > 1e-9

    def test_ar_vs_toeplitz(self):
        report = oracle_check(
            lambda x: time_features_block(x[None, :])[0, 20:24],
            lambda x: np.array(oracle.ar_coeffs_toeplitz(x.tolist())),
            trials=100, tolerance=1e-8, seed=5)
        assert report.passed
