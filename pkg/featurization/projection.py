from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from numeric.functional import dropout, gelu, layer_norm
from numeric.params import glorot, ones, zeros
from numeric.rng import RngStream
from numeric.tensor import Tensor


@dataclass
class ProjectionParams:
    """Per-modality map into the shared latent space."""

    weight: Tensor
    bias: Tensor
    ln_gain: Tensor
    ln_bias: Tensor

    @classmethod
    def init(cls, rng: RngStream, d_in: int, d_model: int, dtype=np.float64) -> ProjectionParams:
        return cls(
            weight=glorot(rng, d_in, d_model, dtype),
            bias=zeros((d_model,), dtype),
            ln_gain=ones((d_model,), dtype),
            ln_bias=zeros((d_model,), dtype),
        )

    @property
    def d_in(self) -> int:
        return self.weight.shape[0]


def project_modality(
    features: Tensor,
    params: ProjectionParams,
    rng: RngStream | None,
    training: bool,
    p: float = 0.0,
    eps: float = 1e-5,
) -> Tensor:
    """Dropout(GELU(LayerNorm(F W + b))) with LayerNorm over the feature axis."""
    if features.shape[-1] != params.d_in:
        raise ValueError(
            f"modality width {features.shape[-1]} does not match projection input {params.d_in}"
        )
    h = features @ params.weight + params.bias
    h = layer_norm(h, params.ln_gain, params.ln_bias, eps)
    return dropout(gelu(h), p, rng, training)
