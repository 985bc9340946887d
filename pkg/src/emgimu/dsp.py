"""Preprocessing chain: notch, band-pass, moving-average smoothing,
linear detrending and IMU upsampling.

EMG channels go through notch -> band-pass -> smooth -> detrend; IMU
channels are smoothed at their native rate and then upsampled to the EMG
rate so every channel leaves the chain at 2000 Hz.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import signal as sps

from .errors import NonIntegerRatio, NyquistViolation, SignalTooShort, WindowTooLarge
from .session import Channel, ChannelKind, Recording


@dataclass(frozen=True)
class FilterSpec:
    notch_hz: float = 60.0
    notch_q: float = 30.0
    band_lo_hz: float = 20.0
    band_hi_hz: float = 500.0
    band_order: int = 4
    zero_phase: bool = True

    def __post_init__(self):
        if not 0 < self.band_lo_hz < self.band_hi_hz:
            raise ValueError("band edges must satisfy 0 < lo < hi")
        if self.band_order < 2 or self.band_order % 2:
            raise ValueError("band_order must be a positive even integer")


@dataclass(frozen=True)
class SmoothSpec:
    window_samples: int = 50

    def __post_init__(self):
        if self.window_samples < 1:
            raise ValueError("window_samples must be >= 1")


def _apply(b, a, x, zero_phase):
    settle = 3 * max(len(a), len(b))
    if len(x) <= 3 * settle:
        raise SignalTooShort(f"need more than {3 * settle} samples, got {len(x)}")
    if zero_phase:
        return sps.filtfilt(b, a, x)
    return sps.lfilter(b, a, x)


def notch_coeffs(rate_hz: float, spec: FilterSpec = FilterSpec()):
    if spec.notch_hz >= rate_hz / 2:
        raise NyquistViolation(f"notch at {spec.notch_hz} Hz >= Nyquist of {rate_hz} Hz")
    return sps.iirnotch(spec.notch_hz, spec.notch_q, fs=rate_hz)


def bandpass_coeffs(rate_hz: float, spec: FilterSpec = FilterSpec()):
    if rate_hz <= 2 * spec.band_hi_hz:
        raise NyquistViolation(
            f"rate {rate_hz} Hz cannot carry a {spec.band_hi_hz} Hz passband edge")
    # scipy doubles the order for band filters, so halve to hit band_order
    return sps.butter(spec.band_order // 2,
                      [spec.band_lo_hz, spec.band_hi_hz], btype="bandpass", fs=rate_hz)


def notch_filter(x, rate_hz: float, spec: FilterSpec = FilterSpec()) -> np.ndarray:
    """Remove the powerline component at ``spec.notch_hz``."""
    b, a = notch_coeffs(rate_hz, spec)
    return _apply(b, a, np.asarray(x, float), spec.zero_phase)


def bandpass_filter(x, rate_hz: float, spec: FilterSpec = FilterSpec()) -> np.ndarray:
    """Butterworth band-pass keeping ``[band_lo_hz, band_hi_hz]``."""
    b, a = bandpass_coeffs(rate_hz, spec)
    return _apply(b, a, np.asarray(x, float), spec.zero_phase)


def smooth(x, spec: SmoothSpec = SmoothSpec()) -> np.ndarray:
    """Centered moving average; edge windows truncate to the available span."""
    x = np.asarray(x, float)
    w = spec.window_samples
    if w > len(x):
        raise WindowTooLarge(f"window of {w} samples exceeds signal length {len(x)}")
    if w == 1:
        return x.copy()
    n = len(x)
    half_lo = (w - 1) // 2
    half_hi = w // 2
    cs = np.concatenate(([0.0], np.cumsum(x)))
    lo = np.maximum(np.arange(n) - half_lo, 0)
    hi = np.minimum(np.arange(n) + half_hi + 1, n)
    return (cs[hi] - cs[lo]) / (hi - lo)


def detrend(x) -> np.ndarray:
    """Subtract the least-squares straight line."""
    x = np.asarray(x, float)
    if len(x) < 2:
        raise SignalTooShort("detrend needs at least 2 samples")
    t = np.arange(len(x), dtype=float)
    t -= t.mean()
    slope = (t @ x) / (t @ t)
    return x - x.mean() - slope * t


def upsample_linear(x, from_hz: float, to_hz: float) -> np.ndarray:
    """Linear-interpolation upsampling by an integer ratio.

    Output sample i sits at time i/to_hz; input samples are preserved at
    multiples of the ratio and the trailing partial segment holds the last
    value, so len(out) == len(x) * ratio exactly.
    """
    x = np.asarray(x, float)
    ratio = to_hz / from_hz
    if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
        raise NonIntegerRatio(f"{to_hz}/{from_hz} is not an integer upsampling ratio")
    r = int(round(ratio))
    if r == 1:
        return x.copy()
    return np.interp(np.arange(len(x) * r) / r, np.arange(len(x)), x)


def preprocess_channel(ch: Channel, fspec: FilterSpec, sspec: SmoothSpec,
                       to_hz: float) -> Channel:
    if ch.kind is ChannelKind.EMG:
        y = notch_filter(ch.samples, ch.rate_hz, fspec)
        y = bandpass_filter(y, ch.rate_hz, fspec)
        y = smooth(y, sspec)
        y = detrend(y)
        return replace(ch, samples=y)
    y = smooth(ch.samples, sspec)
    if ch.rate_hz != to_hz:
        y = upsample_linear(y, ch.rate_hz, to_hz)
    return replace(ch, rate_hz=to_hz, samples=y)


def preprocess_recording(rec: Recording, fspec: FilterSpec = FilterSpec(),
                         sspec: SmoothSpec = SmoothSpec()) -> Recording:
    """Run the full chain over every channel; all outputs share the EMG rate."""
    to_hz = max((ch.rate_hz for ch in rec.channels if ch.kind is ChannelKind.EMG),
                default=ChannelKind.EMG.native_rate_hz)
    out = tuple(preprocess_channel(ch, fspec, sspec, to_hz) for ch in rec.channels)
    return replace(rec, channels=out)
