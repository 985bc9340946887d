"""Synthetic session generator.

Stands in for the private human dataset: every participant/posture session
is generated deterministically from a master seed, with per-gesture
signatures drawn once per spec so the whole cohort shares class geometry.
The default parameters are tuned to mirror the real-world findings the
pipeline is meant to surface: EMG informative but noisy and variable
across participants, accelerometer and magnetometer cleanly informative
(micro-movement), gyroscope uninformative for static gestures.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox

from .session import (
    Channel,
    ChannelKind,
    Gesture,
    LabelTrack,
    Placement,
    Posture,
    Recording,
    ScheduleParams,
    SegmentKind,
    generate_label_schedule,
)


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    n_participants: int = 12
    schedule: ScheduleParams = field(default_factory=ScheduleParams)
    separability: float = 1.0

    # EMG: gesture-gated band-limited bursts over baseline noise
    emg_noise_uV: float = 5.0
    emg_noise_spread: float = 0.35       # participant noise in [lo, hi] = noise*(1 +/- spread)
    emg_burst_gain: float = 6.0          # base burst RMS as a multiple of noise sigma
    emg_contrast: float = 0.9            # per-gesture amplitude contrast (scaled by separability)
    emg_rep_jitter: float = 0.06         # lognormal sigma of per-repetition amplitude
    emg_participant_spread: float = 0.5  # participant contrast factor in [1-s, 1+s]
    emg_band_hz: tuple[float, float] = (20.0, 450.0)

    # accelerometer: per-gesture DC offsets + slow micro-oscillation
    accel_noise_g: float = 0.02
    accel_offset_g: float = 0.06
    accel_osc_g: float = 0.02
    accel_rep_jitter: float = 0.05
    accel_baseline_g: tuple[float, float, float] = (0.0, 0.0, 1.0)

    # gyroscope: rotational velocity, largely absent in static gestures
    gyro_noise_dps: float = 0.5
    gyro_offset_dps: float = 0.0         # 0 = uninformative (paper-like preset)
    gyro_osc_dps: float = 0.0

    # magnetometer: ambient field + orientation-shift offsets
    mag_noise_uT: float = 1.2
    mag_offset_uT: float = 4.0
    mag_osc_uT: float = 1.0
    mag_rep_jitter: float = 0.05
    mag_baseline_uT: tuple[float, float, float] = (20.0, 5.0, 40.0)

    osc_band_hz: tuple[float, float] = (0.6, 2.5)
    onset_delay_s: float = 0.0           # activation lag behind the visual cue
    # the protocol collects calibration data before phase one only; set
    # False to give the second posture its own calibration block
    calibration_first_posture_only: bool = True

    def __post_init__(self):
        if not 0.0 <= self.separability <= 1.0:
            raise ValueError("separability must lie in [0, 1]")
        if self.n_participants < 0:
            raise ValueError("n_participants must be >= 0")

    def schedule_for(self, posture: Posture) -> ScheduleParams:
        if posture is Posture.DEG180 and self.calibration_first_posture_only:
            return dataclasses.replace(self.schedule, calibration_s=0.0)
        return self.schedule


@dataclass(frozen=True)
class Signatures:
    """Per-(gesture, placement) class geometry shared by the whole cohort."""

    emg_amp: np.ndarray        # (G, P) in [0, 1]
    accel_off: np.ndarray      # (G, P, 3) in [-1, 1]
    gyro_off: np.ndarray
    mag_off: np.ndarray
    osc_freq: np.ndarray       # (G,) Hz
    osc_phase: np.ndarray      # (G, P, 3)


def _signatures(spec: SynthSpec) -> Signatures:
    rng = Generator(Philox(key=spec.seed))
    G, P = len(Gesture), len(Placement)
    return Signatures(
        emg_amp=rng.uniform(0.0, 1.0, (G, P)),
        accel_off=rng.uniform(-1.0, 1.0, (G, P, 3)),
        gyro_off=rng.uniform(-1.0, 1.0, (G, P, 3)),
        mag_off=rng.uniform(-1.0, 1.0, (G, P, 3)),
        osc_freq=rng.uniform(*spec.osc_band_hz, G),
        osc_phase=rng.uniform(0.0, 2 * np.pi, (G, P, 3)),
    )


def _participant_stream(spec: SynthSpec, participant_index: int,
                        posture: Posture) -> Generator:
    # substream 0 is reserved for signatures
    slot = 1 + 2 * participant_index + (0 if posture is Posture.DEG90 else 1)
    return Generator(Philox(key=spec.seed).jumped(slot))


def _bandlimited_noise(rng: Generator, n: int, rate: float,
                       band: tuple[float, float]) -> np.ndarray:
    """Unit-RMS noise confined to a frequency band via FFT masking."""
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    f = np.fft.rfftfreq(n, d=1.0 / rate)
    spec[(f < band[0]) | (f > band[1])] = 0.0
    x = np.fft.irfft(spec, n)
    r = np.sqrt(np.mean(x ** 2))
    return x / r if r > 0 else x


def gen_session(spec: SynthSpec, participant_index: int,
                posture: Posture = Posture.DEG90) -> tuple[Recording, LabelTrack]:
    """Generate one synthetic session (8 EMG channels + 72 IMU axes).

    Deterministic given (spec.seed, participant_index, posture).  The
    returned label track is the ground-truth activation timing, i.e. the
    cue schedule shifted by ``onset_delay_s``.
    """
    schedule_params = spec.schedule_for(posture)
    sched = generate_label_schedule(schedule_params)
    truth = sched.shifted(spec.onset_delay_s) if spec.onset_delay_s else sched
    total_s = sched.total_span_s + max(spec.onset_delay_s, 0.0)
    sig = _signatures(spec)
    rng = _participant_stream(spec, participant_index, posture)
    sep = spec.separability

    emg_rate = ChannelKind.EMG.native_rate_hz
    imu_rate = ChannelKind.ACCEL_X.native_rate_hz
    n_emg = int(round(total_s * emg_rate))
    n_imu = int(round(total_s * imu_rate))

    # participant-level variation (drawn in a fixed order for determinism)
    noise_sigma = spec.emg_noise_uV * (
        1.0 + spec.emg_noise_spread * rng.uniform(-1.0, 1.0))
    contrast_factor = 1.0 + spec.emg_participant_spread * rng.uniform(-1.0, 1.0)
    jitter_scale = rng.uniform(0.7, 1.3)

    gesture_segs = [s for s in truth.segments if s.kind is SegmentKind.GESTURE]

    channels: list[Channel] = []
    for p_idx, placement in enumerate(Placement):
        # --- EMG ---
        x = rng.standard_normal(n_emg) * noise_sigma
        for seg in gesture_segs:
            a = int(round(seg.start_s * emg_rate))
            b = min(int(round(seg.end_s * emg_rate)), n_emg)
            if b <= a:
                continue
            g = int(seg.gesture)
            amp = (spec.emg_burst_gain * noise_sigma
                   * (1.0 + spec.emg_contrast * sep * contrast_factor
                      * sig.emg_amp[g, p_idx]))
            amp *= float(np.exp(rng.normal(0.0, spec.emg_rep_jitter * jitter_scale)))
            x[a:b] += amp * _bandlimited_noise(rng, b - a, emg_rate, spec.emg_band_hz)
        channels.append(Channel(placement, ChannelKind.EMG, emg_rate, x))

        # --- IMU (3 modalities x 3 axes) ---
        t_imu = np.arange(n_imu) / imu_rate
        modality_params = (
            ((ChannelKind.ACCEL_X, ChannelKind.ACCEL_Y, ChannelKind.ACCEL_Z),
             spec.accel_noise_g, spec.accel_offset_g, spec.accel_osc_g,
             spec.accel_rep_jitter, spec.accel_baseline_g, sig.accel_off),
            ((ChannelKind.GYRO_X, ChannelKind.GYRO_Y, ChannelKind.GYRO_Z),
             spec.gyro_noise_dps, spec.gyro_offset_dps, spec.gyro_osc_dps,
             0.0, (0.0, 0.0, 0.0), sig.gyro_off),
            ((ChannelKind.MAG_X, ChannelKind.MAG_Y, ChannelKind.MAG_Z),
             spec.mag_noise_uT, spec.mag_offset_uT, spec.mag_osc_uT,
             spec.mag_rep_jitter, spec.mag_baseline_uT, sig.mag_off),
        )
        for kinds, noise, off_scale, osc_scale, rep_jit, baseline, off_sig in modality_params:
            for ax, kind in enumerate(kinds):
                x = rng.standard_normal(n_imu) * noise + baseline[ax]
                if off_scale > 0 or osc_scale > 0:
                    for seg in gesture_segs:
                        a = int(round(seg.start_s * imu_rate))
                        b = min(int(round(seg.end_s * imu_rate)), n_imu)
                        if b <= a:
                            continue
                        g = int(seg.gesture)
                        wobble = 1.0 + rep_jit * rng.uniform(-1.0, 1.0)
                        x[a:b] += (off_scale * sep * off_sig[g, p_idx, ax] * wobble)
                        if osc_scale > 0:
                            x[a:b] += (osc_scale * sep * abs(off_sig[g, p_idx, ax]) * wobble
                                       * np.sin(2 * np.pi * sig.osc_freq[g] * t_imu[a:b]
                                                + sig.osc_phase[g, p_idx, ax]))
                channels.append(Channel(placement, kind, imu_rate, x))

    rec = Recording(
        participant_id=f"P{participant_index:02d}",
        posture=posture,
        channels=tuple(channels),
        calibration_span=(0.0, schedule_params.calibration_s),
    )
    return rec, truth
