import math

import numpy as np
import pytest

import emgimu.oracles as oracle
from emgimu.errors import EmptyCalibration, WrongAxisCount, ZeroRestingPower
from emgimu.quality import (
    calibration_noise,
    channel_gesture_snr,
    gesture_quality_table,
    imu_sensor_noise,
    noise_report,
    smr,
    snr,
)
from emgimu.session import (
    Channel,
    ChannelKind,
    Gesture,
    LabelTrack,
    Modality,
    Placement,
    Posture,
    Recording,
    ScheduleParams,
    Segment,
    SegmentKind,
    generate_label_schedule,
)
from emgimu.synth import SynthSpec, gen_session
from tests.conftest import SMALL_SCHEDULE

RATE = 2000.0


class TestCalibrationNoise:
    def test_constant_is_zero(self):
        assert calibration_noise(np.full(100, 3.0)) == 0.0

    def test_two_point_hand_case(self):
        assert calibration_noise([-1.0, 1.0]) == pytest.approx(1.0)

    def test_gaussian_sigma_recovered(self):
        x = np.random.default_rng(0).normal(0, 5.0, 30_000)
        assert calibration_noise(x) == pytest.approx(5.0, abs=0.1)

    def test_translation_invariant(self):
        x = np.random.default_rng(1).normal(0, 2.0, 5000)
        assert calibration_noise(x + 1234.5) == pytest.approx(
            calibration_noise(x), rel=1e-9)

    def test_matches_oracle(self):
        x = np.random.default_rng(2).normal(3, 1.5, 500)
        assert calibration_noise(x) == pytest.approx(
            oracle.calibration_noise(x.tolist()), rel=1e-12)

    def test_too_short(self):
        with pytest.raises(EmptyCalibration):
            calibration_noise([1.0])


class TestImuSensorNoise:
    def test_hand_cases(self):
        assert imu_sensor_noise((1, 1, 1)) == 1.0
        assert imu_sensor_noise((0, 0, 3)) == 1.0
        assert imu_sensor_noise((2, 3, 4)) == 3.0

    def test_wrong_axis_count(self):
        with pytest.raises(WrongAxisCount):
            imu_sensor_noise((1, 2))


class TestSnr:
    def test_equal_rms_zero_db(self):
        x = np.array([1.0, 2.0, 3.0])
        assert snr(x, x) == 0.0

    def test_ratio_10_is_20db(self):
        rest = np.array([1.0, -1.0] * 50)
        act = 10.0 * rest
        assert snr(act, rest) == pytest.approx(20.0)

    def test_sine_over_noise_analytic(self):
        t = np.arange(20_000) / RATE
        act = 5.0 * np.sin(2 * np.pi * 80 * t)
        rest = np.random.default_rng(3).normal(0, 0.5, 20_000)
        assert snr(act, rest) == pytest.approx(16.99, abs=0.2)

    def test_zero_resting_power(self):
        with pytest.raises(ZeroRestingPower):
            snr(np.ones(10), np.zeros(10))

    def test_self_snr_zero_property(self, rng):
        for _ in range(20):
            x = rng.standard_normal(200) * rng.uniform(0.1, 50)
            assert snr(x, x) == 0.0


class TestSmr:
    def test_all_power_below_20hz_is_0db(self):
        t = np.arange(4000) / RATE
        assert smr(np.sin(2 * np.pi * 10 * t), RATE) == pytest.approx(0.0, abs=1e-9)

    def test_two_equal_lines(self):
        t = np.arange(4000) / RATE
        x = np.sin(2 * np.pi * 10 * t) + np.sin(2 * np.pi * 100 * t)
        assert smr(x, RATE) == pytest.approx(10 * math.log10(2), abs=0.05)

    def test_dominant_line_with_tiny_motion(self):
        t = np.arange(4000) / RATE
        x = np.sin(2 * np.pi * 300 * t) + 0.1 * np.sin(2 * np.pi * 10 * t)
        assert smr(x, RATE) == pytest.approx(10 * math.log10(1.01 / 0.01), abs=0.3)

    def test_nonnegative_property(self, rng):
        for _ in range(100):
            x = rng.standard_normal(rng.integers(500, 3000)) * rng.uniform(0.1, 30)
            assert smr(x, RATE) >= 0.0

    def test_rate_too_low(self):
        with pytest.raises(ValueError):
            smr(np.ones(100), 200.0)

    def test_matches_oracle(self, rng):
        for _ in range(5):
            x = rng.standard_normal(800)
            assert smr(x, RATE) == pytest.approx(
                oracle.smr_db(x, RATE), rel=1e-9)


def _flat_snr_recording(pid, channel_snrs_db):
    """Recording whose per-channel SNRs are exact by construction:
    constant amplitude a during the gesture, constant 1 during rest."""
    track = LabelTrack((
        Segment(0.0, 1.0, SegmentKind.GESTURE, gesture=Gesture.TE, repetition=0),
        Segment(1.0, 2.0, SegmentKind.REST),
    ))
    channels = []
    placements = list(Placement)
    for i, target_db in enumerate(channel_snrs_db):
        amp = 10 ** (target_db / 20)
        x = np.ones(int(2.0 * RATE))
        x[:int(RATE)] = amp
        channels.append(Channel(placements[i], ChannelKind.EMG, RATE, x))
    return Recording(pid, Posture.DEG90, tuple(channels)), track


class TestGestureQualityTable:
    def test_single_channel_degenerate_aggregation(self):
        rec, track = _flat_snr_recording("P0", [26.0])
        table = gesture_quality_table([rec], [track], gestures=[Gesture.TE])
        row = table.rows[0]
        assert row.snr_emg_mean == pytest.approx(26.0)
        assert row.snr_emg_std == 0.0
        assert row.snr_emg_mean == pytest.approx(
            channel_gesture_snr(rec.channels[0], track, Gesture.TE))

    def test_channels_then_participants_not_pooled(self):
        # participant A has 2 channels (20 and 40 dB), B has one (10 dB);
        # channel-mean-then-participant-mean = 20+10 over 2 = 15,
        # pooled over all channels would be 23.33
        rec_a, track = _flat_snr_recording("A", [20.0, 40.0])
        rec_b, _ = _flat_snr_recording("B", [10.0])
        table = gesture_quality_table([rec_a, rec_b], [track, track],
                                      gestures=[Gesture.TE])
        row = table.rows[0]
        assert row.snr_emg_mean == pytest.approx((30.0 + 10.0) / 2)
        pooled = (20.0 + 40.0 + 10.0) / 3
        assert abs(row.snr_emg_mean - pooled) > 1.0

    def test_synthetic_cohort_emg_beats_imu_on_snr(self):
        # EMG bursts ~10x rest, IMU offsets ~2x noise by construction
        spec = SynthSpec(seed=5, schedule=SMALL_SCHEDULE, emg_burst_gain=10.0,
                         accel_offset_g=0.04, accel_osc_g=0.0,
                         mag_offset_uT=2.4, mag_osc_uT=0.0)
        recs, tracks = [], []
        for pidx in range(2):
            rec, labels = gen_session(spec, pidx)
            recs.append(rec)
            tracks.append(labels)
        table = gesture_quality_table(recs, tracks)
        assert len(table.rows) == spec.schedule.n_gestures
        for row in table.rows:
            assert row.snr_emg_mean > row.snr_imu_mean

    def test_table_iii_effect_size_reproduction(self):
        from emgimu.stats import cohens_d
        assert cohens_d(5.10, 1.66, 1.19, 1.07) == pytest.approx(2.80, abs=0.01)

    def test_csv_and_json_emission(self, tmp_path):
        rec, track = _flat_snr_recording("P0", [26.0])
        table = gesture_quality_table([rec], [track], gestures=[Gesture.TE])
        table.to_csv(tmp_path / "q.csv")
        table.to_json(tmp_path / "q.json")
        lines = (tmp_path / "q.csv").read_text().splitlines()
        assert lines[0].startswith("gesture,snr_emg_mean")
        assert len(lines) == 2


class TestNoiseReport:
    def test_axes_averaged_per_sensor_then_summarized(self):
        # three accel axes with sigmas 1, 1, 4 -> sensor sigma 2
        n = 1000
        pattern = np.tile([-1.0, 1.0], n // 2)
        channels = [
            Channel(Placement.W1, ChannelKind.ACCEL_X, 200, 1.0 * pattern),
            Channel(Placement.W1, ChannelKind.ACCEL_Y, 200, 1.0 * pattern),
            Channel(Placement.W1, ChannelKind.ACCEL_Z, 200, 4.0 * pattern),
        ]
        rec = Recording("P", Posture.DEG90, tuple(channels),
                        calibration_span=(0.0, 5.0))
        rep = noise_report(rec)
        assert rep.per_channel[(Placement.W1, ChannelKind.ACCEL_Z)] == pytest.approx(4.0)
        assert rep.per_sensor[(Placement.W1, Modality.ACCEL)] == pytest.approx(2.0)
        assert rep.modality_mean[Modality.ACCEL] == pytest.approx(2.0)

    def test_synth_emg_noise_recovered(self, small_session):
        _, rec, _ = small_session
        rep = noise_report(rec)
        emg_sigmas = [v for (p, k), v in rep.per_channel.items()
                      if k is ChannelKind.EMG]
        assert len(emg_sigmas) == 8

    def test_json_emission(self, tmp_path, small_session):
        _, rec, _ = small_session
        noise_report(rec).to_json(tmp_path / "noise.json")
        import json
        payload = json.loads((tmp_path / "noise.json").read_text())
        assert "modality_mean" in payload and "emg" in payload["modality_mean"]
