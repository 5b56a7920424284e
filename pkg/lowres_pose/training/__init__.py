"""Training harness and the convergence comparison."""

from lowres_pose.training.experiments import (
    CURVES_FILE,
    REFERENCE_RUN,
    SUMMARY_FILE,
    ConvergenceResult,
    ConvergenceSummary,
    convergence_runs,
    epochs_to_reach,
    run_convergence_experiment,
)
from lowres_pose.training.trainer import (
    CHECKPOINT_FILE,
    CONFIG_FILE,
    METRIC_COLUMNS,
    METRICS_FILE,
    EpochMetrics,
    Split,
    TrainResult,
    evaluate_checkpoint,
    evaluate_model,
    load_split,
    predict,
    train,
)

__all__ = [
    "CHECKPOINT_FILE",
    "CONFIG_FILE",
    "CURVES_FILE",
    "METRIC_COLUMNS",
    "METRICS_FILE",
    "REFERENCE_RUN",
    "SUMMARY_FILE",
    "ConvergenceResult",
    "ConvergenceSummary",
    "EpochMetrics",
    "Split",
    "TrainResult",
    "convergence_runs",
    "epochs_to_reach",
    "evaluate_checkpoint",
    "evaluate_model",
    "load_split",
    "predict",
    "run_convergence_experiment",
    "train",
]
