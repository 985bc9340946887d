"""EMG/IMU hand-gesture recognition pipeline.

Preprocess multi-rate sensor sessions, extract windowed time/frequency
features, evaluate LDA/SVM classifiers with leave-one-repetition-out
cross-validation, score signal quality (noise, SNR, SMR) and compare
modalities statistically.  A synthetic cohort generator plus brute-force
oracles make the whole chain verifiable without the human dataset.
"""

from .classify import (
    CvPlan,
    EvalResult,
    LdaModel,
    Standardizer,
    SvmModel,
    cv_evaluate,
    davies_bouldin,
    lda_fit,
    lda_predict,
    svm_fit,
    svm_predict,
)
from .dsp import (
    FilterSpec,
    SmoothSpec,
    bandpass_filter,
    detrend,
    notch_filter,
    preprocess_recording,
    smooth,
    upsample_linear,
)
from .features import (
    FeatureMatrix,
    FeatureVector,
    ThresholdSpec,
    Window,
    WindowSpec,
    extract_matrix,
    freq_features,
    segment,
    time_features,
)
from .quality import (
    NoiseReport,
    QualityReport,
    calibration_noise,
    gesture_quality_table,
    imu_sensor_noise,
    noise_report,
    smr,
    snr,
)
from .session import (
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
    SessionManifest,
    align_labels,
    expected_sample_count,
    generate_label_schedule,
    load_session,
    save_session,
)
from .stats import (
    SampleGroup,
    TestResult,
    cohens_d,
    cohens_d_groups,
    lilliefors,
    run_hypotheses,
    t_test_independent,
    wilcoxon_signed_rank,
)
from .synth import SynthSpec, gen_session

__version__ = "0.1.0"

__all__ = [
    "Channel", "ChannelKind", "CvPlan", "EvalResult", "FeatureMatrix",
    "FeatureVector", "FilterSpec", "Gesture", "LabelTrack", "LdaModel",
    "Modality", "NoiseReport", "Placement", "Posture", "QualityReport",
    "Recording", "SampleGroup", "ScheduleParams", "Segment", "SegmentKind",
    "SessionManifest", "SmoothSpec", "Standardizer", "SvmModel", "TestResult",
    "ThresholdSpec", "Window", "WindowSpec", "align_labels", "bandpass_filter",
    "calibration_noise", "cohens_d", "cohens_d_groups", "cv_evaluate",
    "davies_bouldin", "detrend", "expected_sample_count", "extract_matrix",
    "freq_features", "gen_session", "generate_label_schedule",
    "gesture_quality_table", "imu_sensor_noise", "lda_fit", "lda_predict",
    "lilliefors", "load_session", "noise_report", "notch_filter",
    "preprocess_recording", "run_hypotheses", "save_session", "segment",
    "smooth", "smr", "snr", "svm_fit", "svm_predict", "SynthSpec",
    "t_test_independent", "time_features", "upsample_linear",
    "wilcoxon_signed_rank",
]
