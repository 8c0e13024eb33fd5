from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from numeric.functional import gelu, layer_norm, safe_norm
from numeric.params import glorot, ones, zeros
from numeric.rng import RngStream
from numeric.tensor import Tensor

log = logging.getLogger(__name__)


def _activate(x: Tensor, activation: str) -> Tensor:
    if activation == "gelu":
        return gelu(x)
    if activation == "identity":
        return x
    raise ValueError(f"unknown activation {activation!r}")


@dataclass
class ClassifierHead:
    w3: Tensor
    b3: Tensor
    ln_gain: Tensor
    ln_bias: Tensor
    w4: Tensor
    b4: Tensor

    @classmethod
    def init(cls, rng: RngStream, d_model: int, hidden: int, n_classes: int, dtype=np.float64) -> ClassifierHead:
        return cls(
            w3=glorot(rng, d_model, hidden, dtype),
            b3=zeros((hidden,), dtype),
            ln_gain=ones((hidden,), dtype),
            ln_bias=zeros((hidden,), dtype),
            w4=glorot(rng, hidden, n_classes, dtype),
            b4=zeros((n_classes,), dtype),
        )


@dataclass
class ProjectionHead:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    @classmethod
    def init(cls, rng: RngStream, d_model: int, hidden: int, out_dim: int, dtype=np.float64) -> ProjectionHead:
        return cls(
            w1=glorot(rng, d_model, hidden, dtype),
            b1=zeros((hidden,), dtype),
            w2=glorot(rng, hidden, out_dim, dtype),
            b2=zeros((out_dim,), dtype),
        )


@dataclass
class AuxHead:
    """Linear classifier on one modality's pooled features; training-only."""

    weight: Tensor
    bias: Tensor

    @classmethod
    def init(cls, rng: RngStream, d_model: int, n_classes: int, dtype=np.float64) -> AuxHead:
        return cls(weight=glorot(rng, d_model, n_classes, dtype), bias=zeros((n_classes,), dtype))


def _as_batch(h: Tensor) -> tuple[Tensor, bool]:
    if h.ndim == 1:
        return h.reshape(1, h.shape[0]), True
    return h, False


def classify_logits(
    h_moe: Tensor,
    head: ClassifierHead,
    eps: float = 1e-5,
    activation: str = "gelu",
) -> Tensor:
    """W4 · act(LN(W3 · h + b3)) + b4 for (d,) or (B, d) input."""
    h, squeeze = _as_batch(h_moe)
    hidden = layer_norm(h @ head.w3 + head.b3, head.ln_gain, head.ln_bias, eps)
    logits = _activate(hidden, activation) @ head.w4 + head.b4
    return logits.reshape(logits.shape[-1]) if squeeze else logits


def predict(logits: np.ndarray) -> np.ndarray:
    """Arg-max class; ties go to the lowest index."""
    return np.argmax(np.asarray(logits), axis=-1)


def contrastive_project(
    h_moe: Tensor,
    head: ProjectionHead,
    activation: str = "gelu",
) -> Tensor:
    """Projection head followed by L2 normalization; zero vectors stay zero."""
    h, squeeze = _as_batch(h_moe)
    out = _activate(h @ head.w1 + head.b1, activation) @ head.w2 + head.b2
    norm, zero = safe_norm(out, axis=-1)
    if zero.any():
        log.warning("%d contrastive embedding(s) are exactly zero; left unnormalized", int(zero.sum()))
    unit = out / norm
    return unit.reshape(unit.shape[-1]) if squeeze else unit
