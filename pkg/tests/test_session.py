import json

import numpy as np
import pytest

from emgimu.errors import DuplicateChannel, NoEmgChannel, RateMismatch
from emgimu.session import (
    Channel,
    ChannelKind,
    Gesture,
    LabelTrack,
    Placement,
    Posture,
    Recording,
    ScheduleParams,
    Segment,
    SegmentKind,
    align_labels,
    expected_sample_count,
    generate_label_schedule,
    label_track_from_json,
    label_track_to_json,
    load_session,
    save_session,
)
from emgimu.synth import SynthSpec, gen_session
from tests.conftest import SMALL_SCHEDULE


class TestExpectedSampleCount:
    def test_published_per_participant_total(self):
        assert expected_sample_count(2, 2, 4, 17, 20, 2000) == 10_880_000

    def test_unit_case(self):
        assert expected_sample_count(1, 0, 1, 1, 1, 1) == 1

    def test_full_80_channel_count_matches_segment_enumeration(self):
        expected = expected_sample_count(2, 2, 4, 17, 80, 2000)
        assert expected == 43_520_000
        # independent route: walk the schedule and count samples that fall
        # in gesture segments and their trailing rests, per 2000 Hz channel
        track = generate_label_schedule()
        per_channel = 0
        segs = track.segments
        for i, seg in enumerate(segs):
            if seg.kind is SegmentKind.GESTURE:
                per_channel += round(seg.duration_s * 2000)
                nxt = segs[i + 1]
                assert nxt.kind is SegmentKind.REST
                per_channel += round(nxt.duration_s * 2000)
        assert per_channel * 80 == expected

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            expected_sample_count(0, 2, 4, 17, 20, 2000)


class TestSchedule:
    def test_default_gesture_segment_count_and_length(self):
        track = generate_label_schedule()
        gs = track.gesture_segments()
        assert len(gs) == 17 * 4
        assert all(abs(s.duration_s - 2.0) < 1e-12 for s in gs)

    def test_total_span_is_analytic(self):
        track = generate_label_schedule()
        assert track.total_span_s == pytest.approx(15 + 17 * (5 + 4 * 4))
        # segments tile the span, no overlap and no gaps
        t = 0.0
        for seg in track.segments:
            assert seg.start_s == pytest.approx(t)
            t = seg.end_s
        assert t == pytest.approx(372.0)

    def test_single_gesture_single_rep(self):
        track = generate_label_schedule(ScheduleParams(reps=1, n_gestures=1))
        assert len(track.gesture_segments()) == 1

    def test_each_gesture_has_four_repetitions(self):
        track = generate_label_schedule()
        for g in Gesture:
            reps = [s.repetition for s in track.gesture_segments() if s.gesture is g]
            assert sorted(reps) == [0, 1, 2, 3]

    def test_overlapping_segments_rejected(self):
        with pytest.raises(ValueError):
            LabelTrack((Segment(0, 2, SegmentKind.REST),
                        Segment(1, 3, SegmentKind.REST)))


def _write_minimal_session(root, declared_emg_hz=2000):
    t = np.arange(2000) / 2000.0
    x = np.sin(2 * np.pi * 50 * t)
    lines = ["t_s,emg_uV"] + [f"{a!r},{b!r}" for a, b in zip(t.tolist(), x.tolist())]
    (root / "W1_emg.csv").write_text("\n".join(lines) + "\n")
    manifest = {
        "participant_id": "PX",
        "posture": "90",
        "sensors": [{"placement": "W1", "emg_file": "W1_emg.csv"}],
        "rates": {"emg_hz": declared_emg_hz, "imu_hz": 200},
        "schedule": {"gesture_s": 2, "rest_s": 2, "reps": 1, "n_gestures": 1,
                     "pre_gesture_rest_s": 0, "calibration_s": 0},
    }
    (root / "manifest.json").write_text(json.dumps(manifest))
    return root / "manifest.json"


class TestSessionIO:
    def test_minimal_manifest_loads_one_channel(self, tmp_path):
        rec = load_session(_write_minimal_session(tmp_path))
        assert len(rec.channels) == 1
        ch = rec.channels[0]
        assert ch.rate_hz == 2000 and len(ch.samples) == 2000
        assert ch.kind is ChannelKind.EMG and ch.placement is Placement.W1

    def test_declared_rate_mismatch(self, tmp_path):
        path = _write_minimal_session(tmp_path, declared_emg_hz=200)
        with pytest.raises(RateMismatch):
            load_session(path)

    def test_missing_files_raise(self, tmp_path):
        from emgimu.errors import MissingFile
        with pytest.raises(MissingFile):
            load_session(tmp_path / "manifest.json")
        path = _write_minimal_session(tmp_path)
        (tmp_path / "W1_emg.csv").unlink()
        with pytest.raises(MissingFile):
            load_session(path)

    def test_full_synth_session_roundtrip(self, small_session, tmp_path):
        spec, rec, _ = small_session
        save_session(rec, tmp_path / "sess", schedule=spec.schedule)
        loaded = load_session(tmp_path / "sess" / "manifest.json")
        assert len(loaded.channels) == 80
        assert loaded.posture is rec.posture
        # identity up to text round-trip
        for orig in rec.channels:
            back = loaded.channel(orig.placement, orig.kind)
            assert back.rate_hz == orig.rate_hz
            np.testing.assert_allclose(back.samples, orig.samples, rtol=1e-6, atol=0)

    def test_combined_form_accepted(self, tmp_path):
        # one sensor file with EMG at 2000 Hz and IMU columns every 10th row
        n_emg, ratio = 2000, 10
        t = (np.arange(n_emg) / 2000.0).tolist()
        emg = np.cos(2 * np.pi * 30 * np.array(t)).tolist()
        imu_rows = set(range(0, n_emg, ratio))
        lines = ["t_s,emg_uV,ax,ay,az"]
        for i in range(n_emg):
            if i in imu_rows:
                k = i // ratio
                lines.append(f"{t[i]!r},{emg[i]!r},{0.1 * k!r},{0.2 * k!r},{0.3 * k!r}")
            else:
                lines.append(f"{t[i]!r},{emg[i]!r},,,")
        (tmp_path / "W2.csv").write_text("\n".join(lines) + "\n")
        manifest = {"participant_id": "PY", "posture": "180",
                    "sensors": [{"placement": "W2", "file": "W2.csv"}]}
        (tmp_path / "manifest.json").write_text(json.dumps(manifest))
        rec = load_session(tmp_path / "manifest.json")
        kinds = {ch.kind for ch in rec.channels}
        assert ChannelKind.EMG in kinds and ChannelKind.ACCEL_Z in kinds
        ax = rec.channel(Placement.W2, ChannelKind.ACCEL_X)
        assert ax.rate_hz == 200 and len(ax.samples) == n_emg // ratio
        np.testing.assert_allclose(ax.samples, 0.1 * np.arange(len(imu_rows)))

    def test_duplicate_channel_rejected(self):
        ch = Channel(Placement.W1, ChannelKind.EMG, 2000, np.zeros(100))
        with pytest.raises(DuplicateChannel):
            Recording("P", Posture.DEG90, (ch, ch))

    def test_label_track_json_roundtrip(self, tmp_path):
        track = generate_label_schedule(SMALL_SCHEDULE)
        label_track_to_json(track, tmp_path / "labels.json")
        back = label_track_from_json(tmp_path / "labels.json")
        assert back == track


def _brute_force_best_lag(env, track, rate, max_lag):
    """Naive per-lag correlation against an explicit 0/1 indicator."""
    n = len(env)
    ind = np.zeros(n)
    for seg in track.gesture_segments():
        a, b = int(round(seg.start_s * rate)), int(round(seg.end_s * rate))
        ind[max(a, 0):min(b, n)] = 1.0
    best, best_lag = -np.inf, 0
    for lag in range(-max_lag, max_lag + 1):
        if lag >= 0:
            score = float(env[lag:] @ ind[:n - lag])
        else:
            score = float(env[:n + lag] @ ind[-lag:])
        if score > best + 1e-9:
            best, best_lag = score, lag
    return best_lag


class TestAlignment:
    def _env_of(self, rec):
        n = min(len(c.samples) for c in rec.emg_channels())
        rect = np.mean([np.abs(c.samples[:n]) for c in rec.emg_channels()], axis=0)
        return rect

    def test_on_cue_gives_zero_lag(self):
        spec = SynthSpec(seed=1, schedule=SMALL_SCHEDULE)
        rec, _ = gen_session(spec, 0)
        schedule = generate_label_schedule(spec.schedule)
        aligned = align_labels(rec, schedule, max_shift_s=0.3)
        shift = aligned.segments[0].start_s - schedule.segments[0].start_s
        assert abs(shift) <= 1 / 2000 + 1e-12

    def test_recovers_injected_delay(self):
        spec = SynthSpec(seed=2, schedule=SMALL_SCHEDULE, onset_delay_s=0.25)
        rec, _ = gen_session(spec, 0)
        schedule = generate_label_schedule(spec.schedule)
        aligned = align_labels(rec, schedule, max_shift_s=0.5)
        shift = aligned.segments[0].start_s - schedule.segments[0].start_s
        assert shift == pytest.approx(0.25, abs=1.5 / 2000)

    def test_agrees_with_brute_force_scan(self):
        spec = SynthSpec(seed=9, schedule=SMALL_SCHEDULE, onset_delay_s=0.13)
        rec, _ = gen_session(spec, 0)
        schedule = generate_label_schedule(spec.schedule)
        aligned = align_labels(rec, schedule, max_shift_s=0.3, envelope_window=1)
        shift_samples = round((aligned.segments[0].start_s
                               - schedule.segments[0].start_s) * 2000)
        brute = _brute_force_best_lag(self._env_of(rec), schedule, 2000,
                                      int(0.3 * 2000))
        assert abs(shift_samples - brute) <= 1

    def test_zero_max_shift_is_identity(self, small_session):
        spec, rec, _ = small_session
        schedule = generate_label_schedule(spec.schedule)
        assert align_labels(rec, schedule, max_shift_s=0.0) == schedule

    def test_idempotent_once_aligned(self):
        spec = SynthSpec(seed=3, schedule=SMALL_SCHEDULE, onset_delay_s=0.2)
        rec, _ = gen_session(spec, 0)
        schedule = generate_label_schedule(spec.schedule)
        once = align_labels(rec, schedule, max_shift_s=0.4)
        twice = align_labels(rec, once, max_shift_s=0.4)
        residual = twice.segments[0].start_s - once.segments[0].start_s
        assert abs(residual) <= 1 / 2000 + 1e-12

    def test_requires_emg(self):
        ch = Channel(Placement.W1, ChannelKind.ACCEL_X, 200, np.zeros(400))
        rec = Recording("P", Posture.DEG90, (ch,))
        with pytest.raises(NoEmgChannel):
            align_labels(rec, generate_label_schedule(SMALL_SCHEDULE), 0.1)
