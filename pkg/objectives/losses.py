from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from backbone.fusion import mean_pool
from errors import NonFiniteLossError
from numeric.functional import log1m_exp, log_softmax
from numeric.tensor import Tensor, exp, masked_fill, sum_
from objectives.heads import AuxHead


@dataclass(frozen=True)
class LossWeights:
    lambda_aux: float = 0.3
    lambda_contrast: float = 0.3
    lambda_div: float = 0.1
    focal_gamma: float = 2.0
    temperature: float = 0.07

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        for name in ("lambda_aux", "lambda_contrast", "lambda_div", "focal_gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")

    @classmethod
    def from_config(cls, cfg) -> LossWeights:
        return cls(
            lambda_aux=cfg.lambda_aux,
            lambda_contrast=cfg.lambda_contrast,
            lambda_div=cfg.lambda_div,
            focal_gamma=cfg.focal_gamma,
            temperature=cfg.temperature,
        )


@dataclass
class LossBreakdown:
    focal: Tensor
    modal: Tensor
    contrast: Tensor
    diversity: Tensor
    total: Tensor | None = None

    def as_floats(self) -> dict[str, float]:
        values = {
            "focal": self.focal.item(),
            "modal": self.modal.item(),
            "contrast": self.contrast.item(),
            "diversity": self.diversity.item(),
        }
        if self.total is not None:
            values["total"] = self.total.item()
        return values


def _zero(dtype=np.float64) -> Tensor:
    return Tensor(np.zeros((), dtype=dtype))


def focal_loss(
    logits: Tensor,
    y,
    alpha=None,
    gamma: float = 2.0,
) -> Tensor:
    """-alpha_y (1 - p_y)^gamma log p_y, averaged over the batch.

    ``logits`` is (C,) with a scalar ``y`` or (B, C) with B labels. ``alpha`` is
    None (all ones), a scalar, or a per-class sequence.
    """
    if gamma < 0:
        raise ValueError(f"focal gamma must be non-negative, got {gamma}")
    single = logits.ndim == 1
    if single:
        logits = logits.reshape(1, logits.shape[0])
    labels = np.atleast_1d(np.asarray(y, dtype=np.int64))
    n_classes = logits.shape[-1]
    if np.any(labels < 0) or np.any(labels >= n_classes):
        raise ValueError(f"label outside [0, {n_classes})")

    logp = log_softmax(logits, axis=-1)[np.arange(len(labels)), labels]
    if alpha is None:
        alpha_y = np.ones(len(labels))
    elif np.ndim(alpha) == 0:
        alpha_y = np.full(len(labels), float(alpha))
    else:
        alpha_y = np.asarray(alpha, dtype=np.float64)[labels]
    if np.any(alpha_y < 0):
        raise ValueError("focal alpha must be non-negative")

    per_sample = -logp * Tensor(alpha_y, dtype=logits.dtype)
    if gamma > 0:
        per_sample = per_sample * exp(log1m_exp(logp) * gamma)
    return per_sample.mean()


def inverse_frequency_alpha(labels, n_classes: int) -> np.ndarray:
    """Per-class focal alpha proportional to 1/count, normalized to mean 1 over seen classes.

    Classes absent from ``labels`` get alpha 1.
    """
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=n_classes).astype(np.float64)
    alpha = np.ones(n_classes)
    seen = counts > 0
    if seen.any():
        inv = 1.0 / counts[seen]
        alpha[seen] = inv / inv.mean()
    return alpha


def supcon_loss(
    z: Tensor,
    labels,
    temperature: float,
    hard_negative_mining: bool = False,
) -> Tensor:
    """Supervised contrastive loss over unit vectors ``z`` (N, d').

    Anchors without an in-batch positive are skipped. With hard-negative mining
    only the harder half of each anchor's negatives (highest similarity) stays
    in the denominator.
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    labels = np.asarray(labels, dtype=np.int64)
    n = z.shape[0]
    if n < 2 or len(labels) != n:
        raise ValueError(f"supcon needs N >= 2 vectors with N labels, got {n} and {len(labels)}")

    same = labels[:, None] == labels[None, :]
    eye = np.eye(n, dtype=bool)
    positives = same & ~eye
    anchors = positives.any(axis=1)
    if not anchors.any():
        return _zero(z.dtype)

    sims = (z @ z.T) / temperature
    excluded = eye.copy()
    if hard_negative_mining:
        negatives = ~same
        for i in range(n):
            idx = np.flatnonzero(negatives[i])
            if len(idx) < 2:
                continue
            keep = math.ceil(len(idx) / 2)
            order = idx[np.argsort(-sims.data[i, idx], kind="stable")]
            excluded[i, order[keep:]] = True

    logprob = log_softmax(masked_fill(sims, excluded, -np.inf), axis=1)
    picked = masked_fill(logprob, ~positives, 0.0)
    per_anchor = sum_(picked, axis=1) / Tensor(np.maximum(positives.sum(axis=1), 1), dtype=z.dtype)
    weights = Tensor(anchors / anchors.sum(), dtype=z.dtype)
    return -sum_(per_anchor * weights)


def aux_modality_loss(
    projected: Sequence[Tensor | None],
    labels,
    aux_heads: Sequence[AuxHead | None],
    pad_mask: np.ndarray | None = None,
    presence: np.ndarray | None = None,
) -> Tensor:
    """Mean over modalities of the cross-entropy of a linear head on the pooled features.

    Per modality the cross-entropy averages over the samples where it is
    present; modalities present nowhere are left out of the mean.
    """
    labels = np.asarray(labels, dtype=np.int64)
    terms = []
    for slot, (features, head) in enumerate(zip(projected, aux_heads)):
        if features is None or head is None:
            continue
        present = np.ones(len(labels), dtype=bool) if presence is None else np.asarray(presence)[:, slot]
        if not present.any():
            continue
        logits = mean_pool(features, pad_mask) @ head.weight + head.bias
        nll = -log_softmax(logits, axis=-1)[np.arange(len(labels)), labels]
        weights = Tensor(present / present.sum(), dtype=nll.dtype)
        terms.append(sum_(nll * weights))
    if not terms:
        return _zero()
    total = terms[0]
    for term in terms[1:]:
        total = total + term
    return total / len(terms)


def total_loss(components: LossBreakdown, weights: LossWeights, epoch: int | None = None) -> Tensor:
    """focal + λ_aux·modal + λ_contrast·contrast + λ_div·diversity.

    Raises NonFiniteLossError naming the first non-finite component.
    """
    for name in ("focal", "modal", "contrast", "diversity"):
        value = getattr(components, name).item()
        if not math.isfinite(value):
            raise NonFiniteLossError(name, value, epoch)
    total = (
        components.focal
        + weights.lambda_aux * components.modal
        + weights.lambda_contrast * components.contrast
        + weights.lambda_div * components.diversity
    )
    components.total = total
    return total
