"""Two-pathway video action classification toolkit: training, evaluation,
and error triage for fine-grained sports video datasets."""

from .config import (
    ConfigError,
    PathwayConfig,
    PRESET_NAMES,
    SlowFastConfig,
    preset_config,
)
from .model import SlowFast, build_slowfast, sample_pathway_frames
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .metrics import (
    BinaryCounts,
    ConfusionMatrix,
    MetricError,
    PredictionRecord,
    accuracy,
    confusion_matrix,
    ensemble_predict,
    error_rate,
    per_class_accuracy,
    predict_single_clip,
)
from .training import TrainConfig, TrainingRun, early_stop_check, train, validate
from .triage import (
    CategoryReport,
    ErrorCase,
    TriageStore,
    collect_errors,
    rank_categories,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "PathwayConfig", "PRESET_NAMES", "SlowFastConfig", "preset_config",
    "SlowFast", "build_slowfast", "sample_pathway_frames",
    "CheckpointError", "load_checkpoint", "save_checkpoint",
    "BinaryCounts", "ConfusionMatrix", "MetricError", "PredictionRecord",
    "accuracy", "confusion_matrix", "ensemble_predict", "error_rate",
    "per_class_accuracy", "predict_single_clip",
    "TrainConfig", "TrainingRun", "early_stop_check", "train", "validate",
    "CategoryReport", "ErrorCase", "TriageStore", "collect_errors", "rank_categories",
    "__version__",
]
