from training.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from training.evaluate import EvalResult, evaluate, export_embeddings
from training.metrics import (
    ConfusionMatrix,
    MetricsReport,
    build_report,
    compute_auc_micro,
    compute_mcc,
    compute_metrics,
    export_pr_curve,
)
from training.schedule import lr_at_epoch
from training.swa import SwaState, swa_average
from training.trainer import EpochLog, TrainResult, run_training

__all__ = [
    "Checkpoint",
    "ConfusionMatrix",
    "EpochLog",
    "EvalResult",
    "MetricsReport",
    "SwaState",
    "TrainResult",
    "build_report",
    "compute_auc_micro",
    "compute_mcc",
    "compute_metrics",
    "evaluate",
    "export_embeddings",
    "export_pr_curve",
    "load_checkpoint",
    "lr_at_epoch",
    "run_training",
    "save_checkpoint",
    "swa_average",
]
