import numpy as np
import pytest
from scipy.signal import freqz

from emgimu.dsp import (
    FilterSpec,
    SmoothSpec,
    bandpass_coeffs,
    bandpass_filter,
    detrend,
    notch_coeffs,
    notch_filter,
    preprocess_recording,
    smooth,
    upsample_linear,
)
from emgimu.errors import (
    NonIntegerRatio,
    NyquistViolation,
    SignalTooShort,
    WindowTooLarge,
)
from emgimu.session import Channel, ChannelKind

RATE = 2000.0


def sine(f, seconds=2.0, rate=RATE, amp=1.0):
    t = np.arange(int(seconds * rate)) / rate
    return amp * np.sin(2 * np.pi * f * t)


def rms_mid(x):
    n = len(x)
    return np.sqrt(np.mean(x[n // 4: 3 * n // 4] ** 2))


class TestNotch:
    def test_60hz_attenuated_30db(self):
        x = sine(60.0)
        y = notch_filter(x, RATE)
        assert rms_mid(y) <= 0.032 * rms_mid(x)

    def test_passband_10hz_within_1db(self):
        x = sine(10.0)
        y = notch_filter(x, RATE)
        assert abs(20 * np.log10(rms_mid(y) / rms_mid(x))) <= 1.0

    def test_50hz_and_70hz_within_1db(self):
        for f in (50.0, 70.0):
            x = sine(f)
            y = notch_filter(x, RATE)
            assert abs(20 * np.log10(rms_mid(y) / rms_mid(x))) <= 1.0

    def test_zero_sequence(self):
        y = notch_filter(np.zeros(1000), RATE)
        np.testing.assert_array_equal(y, 0.0)

    def test_too_short(self):
        with pytest.raises(SignalTooShort):
            notch_filter(np.zeros(10), RATE)


class TestBandpass:
    def test_100hz_passband(self):
        x = sine(100.0)
        y = bandpass_filter(x, RATE)
        assert abs(20 * np.log10(rms_mid(y) / rms_mid(x))) <= 1.0

    def test_5hz_attenuated_12db(self):
        x = sine(5.0)
        y = bandpass_filter(x, RATE)
        assert 20 * np.log10(rms_mid(x) / rms_mid(y)) >= 12.0

    def test_dc_rejected(self):
        y = bandpass_filter(np.full(4000, 7.5), RATE)
        assert abs(np.mean(y[1000:3000])) <= 1e-6 * 7.5

    def test_corner_frequencies_within_2hz(self):
        # corners measured on the designed single-pass magnitude response
        b, a = bandpass_coeffs(RATE)
        f = np.linspace(1, 999, 200_000)
        h = np.abs(freqz(b, a, worN=f, fs=RATE)[1])
        target = 1 / np.sqrt(2)
        band = f[h >= target]
        assert abs(band[0] - 20.0) <= 2.0
        assert abs(band[-1] - 500.0) <= 2.0

    def test_notch_attenuation_in_designed_response(self):
        b, a = notch_coeffs(RATE)
        h60 = np.abs(freqz(b, a, worN=[60.0], fs=RATE)[1][0])
        assert 20 * np.log10(1 / max(h60, 1e-12)) >= 30.0

    def test_nyquist_violation(self):
        with pytest.raises(NyquistViolation):
            bandpass_filter(np.zeros(4000), 800.0)

    def test_zero_phase_no_lag(self):
        rng = np.random.default_rng(0)
        x = bandpass_filter(rng.standard_normal(8000), RATE)  # band-limited input
        y = bandpass_filter(x, RATE)
        lags = np.arange(-50, 51)
        corr = [np.dot(x[50:-50], y[50 + k:len(y) - 50 + k]) for k in lags]
        assert lags[int(np.argmax(corr))] == 0


class TestSmooth:
    def test_constant_preserved(self):
        y = smooth(np.full(100, 3.3), SmoothSpec(window_samples=7))
        np.testing.assert_allclose(y, 3.3)

    def test_alternating_window2(self):
        x = np.array([1.0, -1.0] * 10)
        y = smooth(x, SmoothSpec(window_samples=2))
        np.testing.assert_allclose(y[:-1], 0.0)

    def test_window1_identity(self):
        x = np.arange(10.0)
        np.testing.assert_array_equal(smooth(x, SmoothSpec(window_samples=1)), x)

    def test_length_preserved_and_truncated_edges(self):
        x = np.arange(20.0)
        y = smooth(x, SmoothSpec(window_samples=5))
        assert len(y) == len(x)
        assert y[0] == pytest.approx(np.mean(x[:3]))   # [0, 0+2]
        assert y[-1] == pytest.approx(np.mean(x[-3:]))

    def test_window_too_large(self):
        with pytest.raises(WindowTooLarge):
            smooth(np.zeros(10), SmoothSpec(window_samples=11))


class TestDetrend:
    def test_exact_linear_input(self):
        x = 3.0 + 2.0 * np.arange(50)
        np.testing.assert_allclose(detrend(x), 0.0, atol=1e-9)

    def test_recovers_sine_under_ramp(self):
        t = np.arange(5000) / RATE
        raw = np.sin(2 * np.pi * 37 * t)
        # make the oscillation exactly trend-free with an independent
        # polyfit, so the ramp is the only thing detrend should remove
        n = np.arange(5000)
        s = raw - np.polyval(np.polyfit(n, raw, 1), n)
        ramp = 4.0 + 0.8 * n
        rec = detrend(s + ramp)
        assert np.sqrt(np.mean((rec - s) ** 2)) <= 1e-6

    def test_zero_sequence(self):
        np.testing.assert_allclose(detrend(np.zeros(10)), 0.0)

    def test_output_zero_mean_zero_slope(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(4000) * 20 + 5 + 0.01 * np.arange(4000)
        y = detrend(x)
        t = np.arange(len(y)) - (len(y) - 1) / 2
        assert abs(y.mean()) <= 1e-9 * np.abs(x).max()
        assert abs((t @ y) / (t @ t)) <= 1e-9 * np.abs(x).max()


class TestUpsample:
    def test_hand_computed_ratio10(self):
        y = upsample_linear([0.0, 10.0], 200, 2000)
        expect = np.concatenate([np.arange(11.0), np.full(9, 10.0)])
        np.testing.assert_allclose(y, expect)

    def test_constant(self):
        y = upsample_linear(np.full(30, 2.5), 200, 2000)
        assert len(y) == 300
        np.testing.assert_allclose(y, 2.5)

    def test_ratio1_identity(self):
        x = np.arange(5.0)
        np.testing.assert_array_equal(upsample_linear(x, 200, 200), x)

    def test_originals_preserved(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(100)
        y = upsample_linear(x, 200, 2000)
        np.testing.assert_array_equal(y[::10], x)

    def test_non_integer_ratio(self):
        with pytest.raises(NonIntegerRatio):
            upsample_linear(np.zeros(10), 200, 500)


class TestLinearity:
    @pytest.mark.parametrize("op", [
        lambda x: notch_filter(x, RATE),
        lambda x: bandpass_filter(x, RATE),
        lambda x: smooth(x, SmoothSpec()),
        detrend,
        lambda x: upsample_linear(x, 200, 2000),
    ], ids=["notch", "bandpass", "smooth", "detrend", "upsample"])
    def test_superposition(self, op):
        rng = np.random.default_rng(11)
        x = rng.standard_normal(2000)
        y = rng.standard_normal(2000)
        a, b = 2.5, -1.25
        lhs = op(a * x + b * y)
        rhs = a * op(x) + b * op(y)
        scale = np.abs(rhs).max()
        np.testing.assert_allclose(lhs, rhs, atol=1e-9 * scale)

    @pytest.mark.parametrize("op", [
        lambda x: notch_filter(x, RATE),
        lambda x: bandpass_filter(x, RATE),
        lambda x: smooth(x, SmoothSpec()),
        detrend,
    ], ids=["notch", "bandpass", "smooth", "detrend"])
    def test_length_preserved(self, op):
        x = np.random.default_rng(5).standard_normal(3000)
        assert len(op(x)) == len(x)


class TestPreprocessRecording:
    def test_all_channels_at_2000(self, small_session):
        _, rec, _ = small_session
        pre = preprocess_recording(rec)
        assert all(ch.rate_hz == 2000.0 for ch in pre.channels)

    def test_emg_60hz_killed(self, small_session):
        _, rec, _ = small_session
        dur = rec.duration_s
        emg = Channel(rec.channels[0].placement, ChannelKind.EMG, 2000.0,
                      sine(60.0, seconds=dur))
        solo = type(rec)(rec.participant_id, rec.posture, (emg,),
                         rec.calibration_span)
        pre = preprocess_recording(solo)
        assert rms_mid(pre.channels[0].samples) <= 0.032 * rms_mid(emg.samples)

    def test_imu_length_scaled_10x(self, small_session):
        _, rec, _ = small_session
        pre = preprocess_recording(rec)
        for before, after in zip(rec.channels, pre.channels):
            if before.kind is not ChannelKind.EMG:
                assert len(after.samples) == 10 * len(before.samples)

    def test_deterministic(self, small_session):
        _, rec, _ = small_session
        a = preprocess_recording(rec)
        b = preprocess_recording(rec)
        for ca, cb in zip(a.channels, b.channels):
            np.testing.assert_array_equal(ca.samples, cb.samples)
