from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from numeric.functional import softmax
from numeric.params import glorot, ones, zeros
from numeric.rng import RngStream
from numeric.tensor import Tensor, concatenate, masked_fill, sigmoid, sum_


@dataclass
class AmfParams:
    alpha_raw: Tensor  # (M,), alpha = sigmoid(alpha_raw)
    gate_w: Tensor  # (d, 1), shared across modalities
    gate_b: Tensor  # (1,)
    gamma: Tensor  # (C, M) class-aware lookup table

    @classmethod
    def init(cls, rng: RngStream, n_modalities: int, d_model: int, n_classes: int, dtype=np.float64) -> AmfParams:
        return cls(
            alpha_raw=zeros((n_modalities,), dtype),
            gate_w=glorot(rng, d_model, 1, dtype),
            gate_b=zeros((1,), dtype),
            gamma=ones((n_classes, n_modalities), dtype),
        )


@dataclass
class AmfWeights:
    alpha: Tensor  # (M,)
    beta: Tensor  # (B, M)
    gamma: Tensor  # (B, M) when label-conditioned, else (M,)
    weights: Tensor  # (B, M)


def mean_pool(h: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Mean over unmasked sequence positions: (..., L, d) -> (..., d)."""
    length = h.shape[-2]
    if mask is None:
        mask = np.ones(h.shape[:-1], dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    counts = mask.sum(axis=-1, keepdims=True)
    if np.any(counts == 0):
        raise ValueError("mean_pool needs at least one unmasked position per sequence")
    if mask.shape[-1] != length:
        raise ValueError(f"mask length {mask.shape[-1]} does not match sequence length {length}")
    weights = Tensor((mask / counts)[..., None], dtype=h.dtype)
    return sum_(h * weights, axis=-2)


def amf_weights(
    projected: Sequence[Tensor | None],
    labels: np.ndarray | None,
    params: AmfParams,
    pad_mask: np.ndarray | None = None,
    presence: np.ndarray | None = None,
    normalize: bool = False,
) -> AmfWeights:
    """Triple weights alpha·beta·gamma per sample and modality slot.

    ``projected`` has one entry per modality slot, ``None`` for a slot that is
    absent in the whole batch. ``labels`` selects gamma rows; without labels the
    class-mean of the gamma table is used.
    """
    slots = len(projected)
    present_any = [p for p in projected if p is not None]
    if not present_any:
        raise ValueError("amf_weights needs at least one projected modality")
    batch = present_any[0].shape[0]
    if presence is None:
        presence = np.array([[p is not None for p in projected]] * batch, dtype=bool)
    if not np.asarray(presence, dtype=bool).any(axis=1).all():
        raise ValueError("every modality is masked for at least one sample")

    logits = []
    for p in projected:
        if p is None:
            logits.append(Tensor(np.zeros((batch, 1), dtype=params.gate_w.dtype)))
            continue
        logits.append(mean_pool(p, pad_mask) @ params.gate_w + params.gate_b)
    gate_logits = masked_fill(concatenate(logits, axis=1), ~presence, -np.inf)
    beta = softmax(gate_logits, axis=1)

    alpha = sigmoid(params.alpha_raw)
    n_classes = params.gamma.shape[0]
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if np.any(labels >= n_classes) or np.any(labels < 0):
            raise ValueError(f"label outside [0, {n_classes}) in AMF class lookup")
        gamma = params.gamma[labels]
    else:
        gamma = params.gamma.mean(axis=0)

    weights = alpha * beta * gamma
    if normalize:
        weights = weights / sum_(weights, axis=1, keepdims=True)
    if weights.shape[1] != slots:
        raise ValueError(f"AMF produced {weights.shape[1]} weights for {slots} slots")
    return AmfWeights(alpha=alpha, beta=beta, gamma=gamma, weights=weights)


def uniform_weights(presence: np.ndarray, dtype=np.float64) -> Tensor:
    """Plain average over the modalities present per sample (fusion ablated)."""
    presence = np.asarray(presence, dtype=bool)
    counts = np.maximum(presence.sum(axis=1, keepdims=True), 1)
    return Tensor(presence / counts, dtype=dtype)


def amf_fuse(
    projected: Sequence[Tensor | None],
    weights: Tensor,
    presence: np.ndarray | None = None,
) -> Tensor:
    """Weighted sum of the projected modalities, linear in each weight."""
    if presence is not None:
        presence = np.asarray(presence, dtype=bool)
        if not presence.any(axis=1).all():
            raise ValueError("every modality is masked for at least one sample")
    elif all(p is None for p in projected):
        raise ValueError("every modality is masked")

    fused = None
    for slot, p in enumerate(projected):
        if p is None:
            continue
        term = weights[:, slot].reshape(-1, *([1] * (p.ndim - 1))) * p
        fused = term if fused is None else fused + term
    if fused is None:
        raise ValueError("every modality is masked")
    return fused
