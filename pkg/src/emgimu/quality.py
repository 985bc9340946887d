"""Signal-quality metrics: calibration noise, SNR and SMR, plus the
per-gesture EMG-vs-IMU summary table with its aggregation conventions
(average over channels first, then over participants).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dsp import upsample_linear
from .errors import EmptyCalibration, WrongAxisCount, ZeroRestingPower
from .session import (
    Channel,
    ChannelKind,
    Gesture,
    LabelTrack,
    Modality,
    Placement,
    Recording,
    SegmentKind,
)
from .stats import cohens_d_groups, gated_test


def calibration_noise(x) -> float:
    """Population standard deviation of the mean-removed calibration span."""
    x = np.asarray(x, float)
    if len(x) < 2:
        raise EmptyCalibration("need at least 2 calibration samples")
    return float(np.sqrt(np.mean((x - x.mean()) ** 2)))


def imu_sensor_noise(axes) -> float:
    """Collapse one sensor's three per-axis noise values into one."""
    if len(axes) != 3:
        raise WrongAxisCount(f"expected 3 per-axis sigmas, got {len(axes)}")
    return float(sum(axes) / 3.0)


def snr(activation, resting) -> float:
    """20*log10 of activation RMS over resting RMS, in dB."""
    activation = np.asarray(activation, float)
    resting = np.asarray(resting, float)
    if len(activation) == 0 or len(resting) == 0:
        raise ValueError("activation and resting spans must be non-empty")
    r_rest = math.sqrt(float(np.mean(resting ** 2)))
    if r_rest == 0:
        raise ZeroRestingPower("resting span has zero power")
    r_act = math.sqrt(float(np.mean(activation ** 2)))
    return 20.0 * math.log10(r_act / r_rest)


def smr(x, rate_hz: float) -> float:
    """Signal-to-motion ratio: 10*log10 of 0-500 Hz power over 0-20 Hz power.

    Band sums use the one-sided periodogram with bins assigned by their
    center frequency, inclusive edges.  Returns +inf when the motion band
    is empty (flagged upstream, never raised).
    """
    if rate_hz < 1000:
        raise ValueError("SMR needs rate >= 1000 Hz so the 500 Hz band exists")
    x = np.asarray(x, float)
    p = np.abs(np.fft.rfft(x)) ** 2 / len(x)
    scale = np.full(len(p), 2.0)
    scale[0] = 1.0
    if len(x) % 2 == 0:
        scale[-1] = 1.0
    p *= scale
    f = np.fft.rfftfreq(len(x), d=1.0 / rate_hz)
    p_full = float(p[f <= 500.0].sum())
    p_motion = float(p[f <= 20.0].sum())
    if p_motion == 0:
        return math.inf
    return 10.0 * math.log10(p_full / p_motion)


# --- reports -------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseReport:
    """Calibration-noise summary for one recording."""

    per_channel: dict          # (placement, kind) -> sigma
    per_sensor: dict           # (placement, modality) -> sigma (IMU axes averaged)
    modality_mean: dict        # modality -> mean over sensors
    modality_std: dict         # modality -> std over sensors

    def to_json(self, path):
        payload = {
            "per_channel": {f"{p.value}:{k.value}": v
                            for (p, k), v in sorted(self.per_channel.items(),
                                                    key=lambda kv: (kv[0][0].value, kv[0][1].value))},
            "per_sensor": {f"{p.value}:{m.value}": v
                           for (p, m), v in sorted(self.per_sensor.items(),
                                                   key=lambda kv: (kv[0][0].value, kv[0][1].value))},
            "modality_mean": {m.value: v for m, v in self.modality_mean.items()},
            "modality_std": {m.value: v for m, v in self.modality_std.items()},
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)


def noise_report(rec: Recording) -> NoiseReport:
    """Per-channel calibration noise, grouped per sensor and per modality."""
    a, b = rec.calibration_span
    per_channel = {}
    for ch in rec.channels:
        i0, i1 = int(round(a * ch.rate_hz)), int(round(b * ch.rate_hz))
        per_channel[(ch.placement, ch.kind)] = calibration_noise(ch.samples[i0:i1])

    per_sensor = {}
    for placement in {p for p, _ in per_channel}:
        for modality in Modality:
            kinds = [k for (p, k) in per_channel
                     if p is placement and k.modality is modality]
            if not kinds:
                continue
            if modality is Modality.EMG:
                per_sensor[(placement, modality)] = per_channel[(placement, ChannelKind.EMG)]
            elif len(kinds) == 3:
                per_sensor[(placement, modality)] = imu_sensor_noise(
                    [per_channel[(placement, k)] for k in kinds])

    modality_mean, modality_std = {}, {}
    for modality in Modality:
        vals = [v for (p, m), v in per_sensor.items() if m is modality]
        if vals:
            modality_mean[modality] = float(np.mean(vals))
            modality_std[modality] = float(np.std(vals))
    return NoiseReport(per_channel, per_sensor, modality_mean, modality_std)


@dataclass(frozen=True)
class GestureQualityRow:
    gesture: Gesture
    snr_emg_mean: float
    snr_emg_std: float
    snr_imu_mean: float
    snr_imu_std: float
    d_snr: float
    p_snr: float
    smr_emg_mean: float
    smr_emg_std: float
    smr_imu_mean: float
    smr_imu_std: float
    d_smr: float
    p_smr: float


@dataclass(frozen=True)
class QualityReport:
    rows: tuple[GestureQualityRow, ...]

    _FIELDS = ("snr_emg_mean", "snr_emg_std", "snr_imu_mean", "snr_imu_std",
               "d_snr", "p_snr", "smr_emg_mean", "smr_emg_std",
               "smr_imu_mean", "smr_imu_std", "d_smr", "p_smr")

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("gesture," + ",".join(self._FIELDS) + "\n")
            for row in self.rows:
                vals = ",".join(f"{getattr(row, f):.6g}" for f in self._FIELDS)
                fh.write(f"{int(row.gesture)},{vals}\n")

    def to_json(self, path):
        payload = [{"gesture": int(r.gesture), "name": r.gesture.name,
                    **{f: getattr(r, f) for f in self._FIELDS}} for r in self.rows]
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)


def _gesture_spans(labels: LabelTrack, gesture: Gesture):
    """(activation, following-rest) span pairs in seconds for one gesture."""
    segs = labels.segments
    pairs = []
    for i, seg in enumerate(segs):
        if seg.kind is SegmentKind.GESTURE and seg.gesture is gesture:
            rest = None
            if i + 1 < len(segs) and segs[i + 1].kind is SegmentKind.REST:
                rest = (segs[i + 1].start_s, segs[i + 1].end_s)
            pairs.append(((seg.start_s, seg.end_s), rest))
    return pairs


def _concat_spans(ch: Channel, spans) -> np.ndarray:
    parts = []
    n = len(ch.samples)
    for a, b in spans:
        i0 = max(0, int(round(a * ch.rate_hz)))
        i1 = min(n, int(round(b * ch.rate_hz)))
        if i1 > i0:
            parts.append(ch.samples[i0:i1])
    return np.concatenate(parts) if parts else np.empty(0)


def channel_gesture_snr(ch: Channel, labels: LabelTrack, gesture: Gesture) -> float:
    """SNR of one channel for one gesture: its repetitions pooled against the
    rest periods that immediately follow them.  IMU channels are zero-centered
    first."""
    pairs = _gesture_spans(labels, gesture)
    act = _concat_spans(ch, [p[0] for p in pairs])
    rest = _concat_spans(ch, [p[1] for p in pairs if p[1] is not None])
    x_act, x_rest = act, rest
    if ch.kind is not ChannelKind.EMG:
        center = ch.samples.mean()
        x_act = act - center
        x_rest = rest - center
    return snr(x_act, x_rest)


def channel_gesture_smr(ch: Channel, labels: LabelTrack, gesture: Gesture) -> float:
    """SMR of one channel over a gesture's pooled activation spans.

    Channels slower than 1 kHz (native-rate IMU) are upsampled to 2000 Hz
    first so the 0-500 Hz band exists.
    """
    pairs = _gesture_spans(labels, gesture)
    act = _concat_spans(ch, [p[0] for p in pairs])
    rate = ch.rate_hz
    if rate < 1000:
        act = upsample_linear(act, rate, 2000.0)
        rate = 2000.0
    return smr(act, rate)


def _mean_std(values) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    return float(np.mean(values)), float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def _compare(emg_vals, imu_vals) -> tuple[float, float]:
    """Effect size and gated p between per-participant EMG and IMU values."""
    d = math.nan
    p = math.nan
    if len(emg_vals) >= 2 and len(imu_vals) >= 2:
        try:
            d = cohens_d_groups(emg_vals, imu_vals)
        except Exception:
            d = math.nan
    if len(emg_vals) >= 4 and len(imu_vals) >= 4:
        try:
            p = gated_test(emg_vals, imu_vals).p_value
        except Exception:
            p = math.nan
    return d, p


def gesture_quality_table(recs: list[Recording], labels: list[LabelTrack],
                          gestures=None) -> QualityReport:
    """Per-gesture SNR/SMR statistics for EMG vs IMU.

    For each recording, channel metrics are averaged within the EMG and
    IMU groups; means and stds are then taken across recordings
    (channels-then-participants order).
    """
    if not recs:
        raise ValueError("need at least one recording")
    if gestures is None:
        present = set()
        for track in labels:
            present.update(s.gesture for s in track.gesture_segments())
        gestures = sorted(present)

    rows = []
    for gesture in gestures:
        per_rec = {"snr_emg": [], "snr_imu": [], "smr_emg": [], "smr_imu": []}
        for rec, track in zip(recs, labels):
            snr_e = [channel_gesture_snr(ch, track, gesture)
                     for ch in rec.channels if ch.kind is ChannelKind.EMG]
            snr_i = [channel_gesture_snr(ch, track, gesture)
                     for ch in rec.channels if ch.kind is not ChannelKind.EMG]
            smr_e = [channel_gesture_smr(ch, track, gesture)
                     for ch in rec.channels if ch.kind is ChannelKind.EMG]
            smr_i = [channel_gesture_smr(ch, track, gesture)
                     for ch in rec.channels if ch.kind is not ChannelKind.EMG]
            if snr_e:
                per_rec["snr_emg"].append(float(np.mean(snr_e)))
            if snr_i:
                per_rec["snr_imu"].append(float(np.mean(snr_i)))
            if smr_e:
                per_rec["smr_emg"].append(float(np.mean(smr_e)))
            if smr_i:
                per_rec["smr_imu"].append(float(np.mean(smr_i)))

        snr_em, snr_es = _mean_std(per_rec["snr_emg"])
        snr_im, snr_is = _mean_std(per_rec["snr_imu"])
        smr_em, smr_es = _mean_std(per_rec["smr_emg"])
        smr_im, smr_is = _mean_std(per_rec["smr_imu"])
        d_snr, p_snr = _compare(per_rec["snr_emg"], per_rec["snr_imu"])
        d_smr, p_smr = _compare(per_rec["smr_emg"], per_rec["smr_imu"])
        rows.append(GestureQualityRow(
            gesture=gesture,
            snr_emg_mean=snr_em, snr_emg_std=snr_es,
            snr_imu_mean=snr_im, snr_imu_std=snr_is,
            d_snr=d_snr, p_snr=p_snr,
            smr_emg_mean=smr_em, smr_emg_std=smr_es,
            smr_imu_mean=smr_im, smr_imu_std=smr_is,
            d_smr=d_smr, p_smr=p_smr))
    return QualityReport(tuple(rows))
