#!/usr/bin/env python3
"""Generate a synthetic recording session, inspect its structure, and walk
through cue-schedule generation and activation alignment.

Run:  python3 demos/01_sessions_and_labels.py
"""

import numpy as np

from emgimu import (
    ChannelKind,
    ScheduleParams,
    SynthSpec,
    align_labels,
    expected_sample_count,
    gen_session,
    generate_label_schedule,
)

# The protocol: 15 s calibration hold, then for each of 17 gestures a 5 s
# rest followed by 4 repetitions of (2 s gesture + 2 s rest).
schedule = ScheduleParams()
track = generate_label_schedule(schedule)
print(f"cue schedule: {len(track.segments)} segments spanning "
      f"{track.total_span_s:.0f} s")
print(f"gesture segments: {len(track.gesture_segments())} "
      f"(17 gestures x 4 repetitions)")

# The headline sample-count identity for the cued part of a session:
n = expected_sample_count(gesture_s=2, rest_s=2, reps=4, n_gestures=17,
                          n_channels=20, rate_hz=2000)
print(f"expected samples for 20 channels of cued data: {n:,}")

# A full synthetic session: 8 sensor units, each EMG @ 2000 Hz + 9 IMU
# axes @ 200 Hz.  Deterministic in (seed, participant, posture).
spec = SynthSpec(seed=1, onset_delay_s=0.18)
rec, truth = gen_session(spec, participant_index=0)
emg = [c for c in rec.channels if c.kind is ChannelKind.EMG]
imu = [c for c in rec.channels if c.kind is not ChannelKind.EMG]
print(f"\nsession {rec.participant_id}/{rec.posture.value}deg: "
      f"{len(emg)} EMG + {len(imu)} IMU channels, {rec.duration_s:.0f} s")

# Participants react a beat after the visual cue; recover the lag by
# correlating the EMG envelope against the schedule's gesture indicator.
aligned = align_labels(rec, track, max_shift_s=0.5)
lag = aligned.segments[-1].start_s - track.segments[-1].start_s
print(f"injected activation delay: {spec.onset_delay_s:.3f} s; "
      f"recovered by alignment: {lag:.3f} s")

first = aligned.gesture_segments()[0]
print(f"first aligned gesture segment: {first.gesture.name} "
      f"rep {first.repetition} at {first.start_s:.3f}-{first.end_s:.3f} s")
