from objectives.heads import AuxHead, ClassifierHead, ProjectionHead, classify_logits, contrastive_project, predict
from objectives.losses import (
    LossBreakdown,
    LossWeights,
    aux_modality_loss,
    focal_loss,
    inverse_frequency_alpha,
    supcon_loss,
    total_loss,
)

__all__ = [
    "AuxHead",
    "ClassifierHead",
    "LossBreakdown",
    "LossWeights",
    "ProjectionHead",
    "aux_modality_loss",
    "classify_logits",
    "contrastive_project",
    "focal_loss",
    "inverse_frequency_alpha",
    "predict",
    "supcon_loss",
    "total_loss",
]
