#!/usr/bin/env python3
"""Train/evaluate classifiers per modality and run the four EMG-vs-IMU
hypothesis tests on a small synthetic cohort.

Run:  python3 demos/04_classification_and_hypotheses.py   (about a minute)
"""

import numpy as np

from emgimu import (
    Modality,
    Placement,
    SampleGroup,
    ScheduleParams,
    SynthSpec,
    cv_evaluate,
    extract_matrix,
    gen_session,
    preprocess_recording,
    run_hypotheses,
)
from emgimu.stats import results_to_markdown

MODALITIES = {
    "emg": (Modality.EMG,),
    "accel": (Modality.ACCEL,),
    "gyro": (Modality.GYRO,),
    "mag": (Modality.MAG,),
    "imu_combined": (Modality.ACCEL, Modality.GYRO, Modality.MAG),
}
PLACES = (Placement.W1, Placement.W2)
GRID = {"shrinkage": [0.3], "tol": [1e-4]}

spec = SynthSpec(seed=11, schedule=ScheduleParams(n_gestures=8, reps=4,
                                                  pre_gesture_rest_s=1,
                                                  calibration_s=5))

# Leave-one-repetition-out CV per participant and modality on W1+W2.
# (Eight participants: a paired exact Wilcoxon needs n >= 8 before its
# smallest two-sided p value, 2/2^n, can clear alpha = 0.05.)
accs = {name: [] for name in MODALITIES}
for pidx in range(8):
    rec, labels = gen_session(spec, pidx)
    fm = extract_matrix(preprocess_recording(rec), labels)
    for name, mods in MODALITIES.items():
        sub = fm.select_columns(placements=PLACES, modalities=mods)
        res = cv_evaluate(sub, model_family="lda", grid=GRID)
        accs[name].append(res.mean_accuracy)
    print(f"participant {pidx}: " + "  ".join(
        f"{name}={accs[name][-1]:.2f}" for name in MODALITIES))

print("\nmean accuracy per modality:")
for name, vals in accs.items():
    print(f"  {name:13s} {np.mean(vals):.3f} ({np.std(vals, ddof=1):.3f})")

# EMG >= each IMU modality?  Lilliefors gates t-test vs Wilcoxon; Cohen's d
# carries the direction and magnitude.
groups = {name: SampleGroup(name, tuple(vals)) for name, vals in accs.items()}
results = run_hypotheses(groups)
print("\n" + results_to_markdown(results))
