import numpy as np
import pytest

from emgimu.dsp import preprocess_recording
from emgimu.features import extract_matrix
from emgimu.session import ScheduleParams
from emgimu.synth import SynthSpec, gen_session

# reduced protocol shared by the slower integration tests: 5 gestures,
# short rests, full repetition structure
SMALL_SCHEDULE = ScheduleParams(gesture_s=2.0, rest_s=2.0, reps=4, n_gestures=5,
                                pre_gesture_rest_s=1.0, calibration_s=5.0)


@pytest.fixture(scope="session")
def small_session():
    spec = SynthSpec(seed=42, schedule=SMALL_SCHEDULE)
    rec, labels = gen_session(spec, 0)
    return spec, rec, labels


@pytest.fixture(scope="session")
def small_features(small_session):
    _, rec, labels = small_session
    pre = preprocess_recording(rec)
    return extract_matrix(pre, labels)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
