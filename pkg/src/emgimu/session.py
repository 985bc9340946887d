"""Core domain types and session handling.

A session is one participant performing the full gesture protocol in one
arm posture, recorded by 8 sensor units (each unit = 1 EMG electrode pair
+ a 9-axis IMU).  EMG is sampled at 2000 Hz, IMU axes at 200 Hz.  Sessions
live on disk as a directory holding ``manifest.json`` plus one or two CSV
files per sensor unit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    DuplicateChannel,
    MissingFile,
    NoEmgChannel,
    RateMismatch,
)

EMG_RATE_HZ = 2000.0
IMU_RATE_HZ = 200.0


class Modality(Enum):
    EMG = "emg"
    ACCEL = "accel"
    GYRO = "gyro"
    MAG = "mag"


class ChannelKind(Enum):
    EMG = "emg"
    ACCEL_X = "ax"
    ACCEL_Y = "ay"
    ACCEL_Z = "az"
    GYRO_X = "gx"
    GYRO_Y = "gy"
    GYRO_Z = "gz"
    MAG_X = "mx"
    MAG_Y = "my"
    MAG_Z = "mz"

    @property
    def modality(self) -> Modality:
        if self is ChannelKind.EMG:
            return Modality.EMG
        return {"a": Modality.ACCEL, "g": Modality.GYRO, "m": Modality.MAG}[self.value[0]]

    @property
    def native_rate_hz(self) -> float:
        return EMG_RATE_HZ if self is ChannelKind.EMG else IMU_RATE_HZ

    @property
    def units(self) -> str:
        return {
            Modality.EMG: "uV",
            Modality.ACCEL: "g",
            Modality.GYRO: "deg/s",
            Modality.MAG: "uT",
        }[self.modality]


IMU_KINDS = tuple(k for k in ChannelKind if k is not ChannelKind.EMG)

MODALITY_KINDS = {
    Modality.EMG: (ChannelKind.EMG,),
    Modality.ACCEL: (ChannelKind.ACCEL_X, ChannelKind.ACCEL_Y, ChannelKind.ACCEL_Z),
    Modality.GYRO: (ChannelKind.GYRO_X, ChannelKind.GYRO_Y, ChannelKind.GYRO_Z),
    Modality.MAG: (ChannelKind.MAG_X, ChannelKind.MAG_Y, ChannelKind.MAG_Z),
}


class Placement(Enum):
    W1 = "W1"
    W2 = "W2"
    W3 = "W3"
    W4 = "W4"
    F1 = "F1"
    F2 = "F2"
    F3 = "F3"
    F4 = "F4"

    @property
    def is_wrist(self) -> bool:
        return self.value.startswith("W")


class Gesture(IntEnum):
    """The 17 static gestures, indexed as in the confusion-matrix ordering.

    Rest and the calibration hold are label states, not classes.
    """

    TE = 0   # thumb extension
    IE = 1   # index extension
    ME = 2   # middle extension
    RE = 3   # ring extension
    PE = 4   # pinky extension
    TU = 5   # thumbs up
    PO = 6   # pointing
    PC = 7   # peace
    OK = 8
    HN = 9   # horn
    HL = 10  # hang loose
    PG = 11  # power grasp
    HO = 12  # hand open
    WE = 13  # wrist extension
    WF = 14  # wrist flexion
    UD = 15  # ulnar deviation
    RD = 16  # radial deviation


N_GESTURES = len(Gesture)


class Posture(Enum):
    DEG90 = "90"
    DEG180 = "180"


class SegmentKind(Enum):
    CALIBRATION = "calibration"
    REST = "rest"
    GESTURE = "gesture"


@dataclass(frozen=True)
class Segment:
    start_s: float
    end_s: float
    kind: SegmentKind
    gesture: Gesture | None = None
    repetition: int | None = None

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class LabelTrack:
    """Ordered, non-overlapping annotation of a session timeline."""

    segments: tuple[Segment, ...]

    def __post_init__(self):
        for a, b in zip(self.segments, self.segments[1:]):
            if b.start_s < a.end_s - 1e-9:
                raise ValueError("label segments overlap or are unsorted")

    def gesture_segments(self) -> list[Segment]:
        return [s for s in self.segments if s.kind is SegmentKind.GESTURE]

    def shifted(self, shift_s: float) -> "LabelTrack":
        """Return a copy with every segment moved by ``shift_s`` seconds."""
        return LabelTrack(tuple(
            replace(s, start_s=s.start_s + shift_s, end_s=s.end_s + shift_s)
            for s in self.segments
        ))

    @property
    def total_span_s(self) -> float:
        return self.segments[-1].end_s if self.segments else 0.0


@dataclass(frozen=True)
class ScheduleParams:
    """Timing of the cue protocol (all durations in seconds)."""

    gesture_s: float = 2.0
    rest_s: float = 2.0
    reps: int = 4
    n_gestures: int = 17
    pre_gesture_rest_s: float = 5.0
    calibration_s: float = 15.0

    def __post_init__(self):
        if self.gesture_s <= 0 or self.reps <= 0 or not 1 <= self.n_gestures <= N_GESTURES:
            raise ValueError("invalid schedule parameters")
        if min(self.rest_s, self.pre_gesture_rest_s, self.calibration_s) < 0:
            raise ValueError("durations must be non-negative")

    @property
    def total_span_s(self) -> float:
        per_gesture = self.pre_gesture_rest_s + self.reps * (self.gesture_s + self.rest_s)
        return self.calibration_s + self.n_gestures * per_gesture


@dataclass(frozen=True)
class Channel:
    placement: Placement
    kind: ChannelKind
    rate_hz: float
    samples: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.samples, dtype=np.float64))
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.rate_hz

    @property
    def units(self) -> str:
        return self.kind.units

    def time_axis(self) -> np.ndarray:
        # timestamps derive from sample index / rate; file timestamps are
        # validated on load but never trusted as the time base
        return np.arange(len(self.samples)) / self.rate_hz


@dataclass(frozen=True)
class Recording:
    participant_id: str
    posture: Posture
    channels: tuple[Channel, ...]
    calibration_span: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        seen = set()
        for ch in self.channels:
            key = (ch.placement, ch.kind)
            if key in seen:
                raise DuplicateChannel(f"duplicate channel {ch.placement.value}/{ch.kind.value}")
            seen.add(key)
        if self.channels:
            durs = [ch.duration_s for ch in self.channels]
            tol = max(1.0 / ch.rate_hz for ch in self.channels)
            if max(durs) - min(durs) > tol + 1e-9:
                raise ValueError("channels do not share a common wall-clock span")

    @property
    def duration_s(self) -> float:
        return min(ch.duration_s for ch in self.channels)

    def channel(self, placement: Placement, kind: ChannelKind) -> Channel:
        for ch in self.channels:
            if ch.placement is placement and ch.kind is kind:
                return ch
        raise KeyError(f"no channel {placement.value}/{kind.value}")

    def emg_channels(self) -> list[Channel]:
        return [ch for ch in self.channels if ch.kind is ChannelKind.EMG]

    def select(self, placements=None, modalities=None) -> list[Channel]:
        """Channels restricted to the given placements and/or modalities."""
        out = []
        for ch in self.channels:
            if placements is not None and ch.placement not in placements:
                continue
            if modalities is not None and ch.kind.modality not in modalities:
                continue
            out.append(ch)
        return out


@dataclass(frozen=True)
class SensorFiles:
    placement: Placement
    emg_file: str | None = None
    imu_file: str | None = None
    combined_file: str | None = None


@dataclass(frozen=True)
class SessionManifest:
    participant_id: str
    posture: Posture
    sensors: tuple[SensorFiles, ...]
    schedule: ScheduleParams = field(default_factory=ScheduleParams)
    emg_rate_hz: float = EMG_RATE_HZ
    imu_rate_hz: float = IMU_RATE_HZ


def expected_sample_count(gesture_s, rest_s, reps, n_gestures, n_channels, rate_hz) -> int:
    """Total cued-gesture sample budget: (gesture + rest) * reps * gestures * channels * rate."""
    if min(gesture_s, reps, n_gestures, n_channels, rate_hz) <= 0 or rest_s < 0:
        raise ValueError("arguments must be positive (rest may be zero)")
    return round((gesture_s + rest_s) * reps * n_gestures * n_channels * rate_hz)


def generate_label_schedule(params: ScheduleParams = ScheduleParams()) -> LabelTrack:
    """Build the cue-driven label track for one session.

    Layout: a calibration hold, then for each gesture a pre-gesture rest
    followed by ``reps`` repetitions of (gesture, rest), gestures in id
    order.
    """
    segs: list[Segment] = []
    t = 0.0
    if params.calibration_s > 0:
        segs.append(Segment(0.0, params.calibration_s, SegmentKind.CALIBRATION))
        t = params.calibration_s
    for g in list(Gesture)[:params.n_gestures]:
        if params.pre_gesture_rest_s > 0:
            segs.append(Segment(t, t + params.pre_gesture_rest_s, SegmentKind.REST))
            t += params.pre_gesture_rest_s
        for rep in range(params.reps):
            segs.append(Segment(t, t + params.gesture_s, SegmentKind.GESTURE,
                                gesture=g, repetition=rep))
            t += params.gesture_s
            if params.rest_s > 0:
                segs.append(Segment(t, t + params.rest_s, SegmentKind.REST))
                t += params.rest_s
    return LabelTrack(tuple(segs))


def label_track_to_json(track: LabelTrack, path=None) -> str:
    payload = [{
        "start_s": s.start_s, "end_s": s.end_s, "kind": s.kind.value,
        "gesture": int(s.gesture) if s.gesture is not None else None,
        "repetition": s.repetition,
    } for s in track.segments]
    text = json.dumps(payload, indent=2)
    if path is not None:
        Path(path).write_text(text)
    return text


def label_track_from_json(path) -> LabelTrack:
    raw = json.loads(Path(path).read_text())
    return LabelTrack(tuple(
        Segment(d["start_s"], d["end_s"], SegmentKind(d["kind"]),
                gesture=Gesture(d["gesture"]) if d["gesture"] is not None else None,
                repetition=d["repetition"])
        for d in raw))


def align_labels(recording: Recording, schedule: LabelTrack,
                 max_shift_s: float = 0.5, envelope_window: int = 50) -> LabelTrack:
    """Shift the cue schedule to match actual EMG activation timing.

    The mean rectified, moving-average-smoothed EMG envelope is correlated
    against the schedule's gesture-on indicator over integer-sample lags in
    [-max_shift_s, +max_shift_s]; the whole track is shifted by the best
    lag.  Ties resolve to the smallest |lag|.
    """
    if max_shift_s < 0:
        raise ValueError("max_shift_s must be >= 0")
    emg = recording.emg_channels()
    if not emg:
        raise NoEmgChannel("alignment needs at least one EMG channel")
    if max_shift_s == 0:
        return schedule

    rate = emg[0].rate_hz
    n = min(len(ch.samples) for ch in emg)
    env = np.zeros(n)
    kern_half = max(1, envelope_window) // 2
    for ch in emg:
        rect = np.abs(ch.samples[:n])
        cs = np.concatenate(([0.0], np.cumsum(rect)))
        lo = np.maximum(np.arange(n) - kern_half, 0)
        hi = np.minimum(np.arange(n) + kern_half + 1, n)
        env += (cs[hi] - cs[lo]) / (hi - lo)
    env /= len(emg)

    max_lag = int(round(max_shift_s * rate))
    lags = np.arange(-max_lag, max_lag + 1)

    # score(lag) = sum of envelope over all gesture spans shifted by lag;
    # evaluated with a cumulative sum so the scan is O(segments * lags)
    cs = np.concatenate(([0.0], np.cumsum(env)))
    gsegs = schedule.gesture_segments()
    starts = np.array([int(round(s.start_s * rate)) for s in gsegs])
    ends = np.array([int(round(s.end_s * rate)) for s in gsegs])
    a = np.clip(starts[None, :] + lags[:, None], 0, n)
    b = np.clip(ends[None, :] + lags[:, None], 0, n)
    scores = (cs[b] - cs[a]).sum(axis=1)

    best = scores.max()
    candidates = lags[scores >= best - 1e-9 * max(abs(best), 1.0)]
    tau = candidates[np.argmin(np.abs(candidates))]
    return schedule.shifted(tau / rate)


# --- session directory I/O ---------------------------------------------------

_IMU_COLS = ("ax", "ay", "az", "gx", "gy", "gz", "mx", "my", "mz")
_KIND_BY_COL = {k.value: k for k in IMU_KINDS}


def _infer_rate(t: np.ndarray) -> float:
    if len(t) < 2:
        raise RateMismatch("cannot infer a sampling rate from fewer than 2 timestamps")
    return (len(t) - 1) / float(t[-1] - t[0])


def _check_rate(declared: float, t: np.ndarray, what: str):
    inferred = _infer_rate(t)
    if abs(inferred - declared) > 0.01 * declared:
        raise RateMismatch(
            f"{what}: declared {declared:g} Hz but timestamps imply {inferred:g} Hz")


def parse_manifest(manifest_path) -> SessionManifest:
    path = Path(manifest_path)
    if not path.is_file():
        raise MissingFile(str(path))
    raw = json.loads(path.read_text())
    sensors = []
    for entry in raw["sensors"]:
        sensors.append(SensorFiles(
            placement=Placement(entry["placement"]),
            emg_file=entry.get("emg_file"),
            imu_file=entry.get("imu_file"),
            combined_file=entry.get("file"),
        ))
    sched = raw.get("schedule", {})
    rates = raw.get("rates", {})
    return SessionManifest(
        participant_id=raw["participant_id"],
        posture=Posture(str(raw["posture"])),
        sensors=tuple(sensors),
        schedule=ScheduleParams(
            gesture_s=sched.get("gesture_s", 2.0),
            rest_s=sched.get("rest_s", 2.0),
            reps=sched.get("reps", 4),
            n_gestures=sched.get("n_gestures", 17),
            pre_gesture_rest_s=sched.get("pre_gesture_rest_s", 5.0),
            calibration_s=sched.get("calibration_s", 15.0),
        ),
        emg_rate_hz=rates.get("emg_hz", EMG_RATE_HZ),
        imu_rate_hz=rates.get("imu_hz", IMU_RATE_HZ),
    )


def _read_csv(path: Path) -> pd.DataFrame:
    if not path.is_file():
        raise MissingFile(str(path))
    return pd.read_csv(path)


def load_session(manifest_path) -> Recording:
    """Load a session directory into a Recording at native rates.

    Accepts the canonical split form (``<placement>_emg.csv`` +
    ``<placement>_imu.csv``) and the combined single-file form where IMU
    columns are populated every ``emg_rate/imu_rate``-th row.
    """
    manifest = parse_manifest(manifest_path)
    root = Path(manifest_path).parent
    channels: list[Channel] = []

    for sensor in manifest.sensors:
        if sensor.combined_file:
            df = _read_csv(root / sensor.combined_file)
            t = df["t_s"].to_numpy(float)
            if "emg_uV" in df.columns:
                emg = df["emg_uV"].to_numpy(float)
                keep = ~np.isnan(emg)
                _check_rate(manifest.emg_rate_hz, t[keep],
                            f"{sensor.placement.value} emg")
                channels.append(Channel(sensor.placement, ChannelKind.EMG,
                                        manifest.emg_rate_hz, emg[keep]))
            imu_present = [c for c in _IMU_COLS if c in df.columns]
            if imu_present:
                mask = ~np.isnan(df[imu_present[0]].to_numpy(float))
                _check_rate(manifest.imu_rate_hz, t[mask],
                            f"{sensor.placement.value} imu")
                for col in imu_present:
                    channels.append(Channel(sensor.placement, _KIND_BY_COL[col],
                                            manifest.imu_rate_hz,
                                            df[col].to_numpy(float)[mask]))
            continue
        if sensor.emg_file:
            df = _read_csv(root / sensor.emg_file)
            _check_rate(manifest.emg_rate_hz, df["t_s"].to_numpy(float),
                        f"{sensor.placement.value} emg")
            channels.append(Channel(sensor.placement, ChannelKind.EMG,
                                    manifest.emg_rate_hz,
                                    df["emg_uV"].to_numpy(float)))
        if sensor.imu_file:
            df = _read_csv(root / sensor.imu_file)
            _check_rate(manifest.imu_rate_hz, df["t_s"].to_numpy(float),
                        f"{sensor.placement.value} imu")
            for col in _IMU_COLS:
                if col in df.columns:
                    channels.append(Channel(sensor.placement, _KIND_BY_COL[col],
                                            manifest.imu_rate_hz,
                                            df[col].to_numpy(float)))

    return Recording(
        participant_id=manifest.participant_id,
        posture=manifest.posture,
        channels=tuple(channels),
        calibration_span=(0.0, manifest.schedule.calibration_s),
    )


def _write_csv(path: Path, header: list[str], columns: list[np.ndarray], decimals: int | None):
    cols = [np.round(c, decimals) if decimals is not None else c for c in columns]
    lists = [c.tolist() for c in cols]
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        f.writelines(",".join(repr(v) for v in row) + "\n" for row in zip(*lists))


def save_session(rec: Recording, out_dir, schedule: ScheduleParams = ScheduleParams(),
                 decimals: int | None = None) -> Path:
    """Write a Recording as a canonical split-form session directory.

    ``decimals=None`` writes exact shortest-roundtrip floats; pass a digit
    count to shrink files when full precision is not needed.
    """
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    by_placement: dict[Placement, dict[ChannelKind, Channel]] = {}
    for ch in rec.channels:
        by_placement.setdefault(ch.placement, {})[ch.kind] = ch

    sensors = []
    for placement in Placement:
        if placement not in by_placement:
            continue
        group = by_placement[placement]
        entry: dict = {"placement": placement.value}
        emg = group.get(ChannelKind.EMG)
        if emg is not None:
            name = f"{placement.value}_emg.csv"
            _write_csv(root / name, ["t_s", "emg_uV"],
                       [emg.time_axis(), emg.samples], decimals)
            entry["emg_file"] = name
        imu = {k: ch for k, ch in group.items() if k is not ChannelKind.EMG}
        if imu:
            any_ch = next(iter(imu.values()))
            name = f"{placement.value}_imu.csv"
            header = ["t_s"] + [c for c in _IMU_COLS if _KIND_BY_COL[c] in imu]
            columns = [any_ch.time_axis()] + [imu[_KIND_BY_COL[c]].samples
                                              for c in _IMU_COLS if _KIND_BY_COL[c] in imu]
            _write_csv(root / name, header, columns, decimals)
            entry["imu_file"] = name
        sensors.append(entry)

    emg_rates = {ch.rate_hz for ch in rec.channels if ch.kind is ChannelKind.EMG}
    imu_rates = {ch.rate_hz for ch in rec.channels if ch.kind is not ChannelKind.EMG}
    manifest = {
        "participant_id": rec.participant_id,
        "posture": rec.posture.value,
        "sensors": sensors,
        "rates": {
            "emg_hz": emg_rates.pop() if emg_rates else EMG_RATE_HZ,
            "imu_hz": imu_rates.pop() if imu_rates else IMU_RATE_HZ,
        },
        "schedule": {
            "gesture_s": schedule.gesture_s,
            "rest_s": schedule.rest_s,
            "reps": schedule.reps,
            "n_gestures": schedule.n_gestures,
            "pre_gesture_rest_s": schedule.pre_gesture_rest_s,
            "calibration_s": schedule.calibration_s,
        },
    }
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path
