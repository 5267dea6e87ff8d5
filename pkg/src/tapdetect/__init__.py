"""Tap-water audio event detection toolkit.

Interval annotation metrics (IoU, coverage, duration tables), window-level
acoustic features (41-dim vectors and log-mel spectrograms), two lightweight
detectors (from-scratch random forest and a small CNN), imbalance-aware
evaluation with a uniform baseline, and streaming inference with a portable
binary model format.
"""

from .annotations import (
    AnnotationRecord,
    agreement_report,
    duration_report,
    filter_min_duration,
    merge_to_interval_set,
    parse_annotations,
    validate_annotations,
)
from .dataset import (
    SplitPlan,
    WindowSample,
    label_windows,
    split_lopo,
    split_task_a,
    window_and_label,
)
from .dsp import (
    DspConfig,
    FEATURE_NAMES_V1,
    FeatureVector,
    LogMelSpectrogram,
    MelFilterbank,
    aggregate_features,
    analyze_window,
    frame_descriptors,
    log_mel,
    mel_filterbank,
    mfcc,
    stft_magnitude,
)
from .evaluation import (
    ConfusionCounts,
    MetricsReport,
    confusion,
    evaluate_split,
    metrics,
    ratio_to_baseline,
    uniform_baseline,
)
from .fileformats import ModelEnvelope, read_model, write_model
from .forest import (
    ForestConfig,
    ForestModel,
    balanced_class_weights,
    predict_forest,
    train_forest,
)
from .intervals import IntervalSet, coverage, iou
from .neural import (
    AdamState,
    CnnConfig,
    CnnModel,
    LossConfig,
    adam_step,
    predict_cnn,
    train_cnn,
    weighted_bce,
)
from .significance import paired_comparison, paired_t_test, wilcoxon_signed_rank
from .streaming import majority_smooth, run_stream
from .wav import AudioBuffer, load_wav, resample_to, write_wav

__version__ = "0.1.0"
