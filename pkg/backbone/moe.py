from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from numeric.functional import gelu, l2_normalize, softmax
from numeric.params import glorot, zeros
from numeric.rng import RngStream
from numeric.tensor import Tensor, stack, sum_, transpose

log = logging.getLogger(__name__)


@dataclass
class ExpertParams:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    @classmethod
    def init(cls, rng: RngStream, d_model: int, hidden: int, dtype=np.float64) -> ExpertParams:
        return cls(
            w1=glorot(rng, d_model, hidden, dtype),
            b1=zeros((hidden,), dtype),
            w2=glorot(rng, hidden, d_model, dtype),
            b2=zeros((d_model,), dtype),
        )

    def __call__(self, z: Tensor) -> Tensor:
        return gelu(z @ self.w1 + self.b1) @ self.w2 + self.b2


@dataclass
class MoeParams:
    experts: list[ExpertParams]
    gate_w: Tensor  # (d, K)
    gate_b: Tensor  # (K,)

    @classmethod
    def init(cls, rng: RngStream, d_model: int, n_experts: int, hidden: int, dtype=np.float64) -> MoeParams:
        return cls(
            experts=[ExpertParams.init(rng.fork(f"expert{k}"), d_model, hidden, dtype) for k in range(n_experts)],
            gate_w=glorot(rng, d_model, n_experts, dtype),
            gate_b=zeros((n_experts,), dtype),
        )


@dataclass
class MoeOutput:
    h_moe: Tensor  # (B, d)
    gates: Tensor  # (B, K)
    expert_outputs: Tensor  # (B, K, d)


def moe_forward(z: Tensor, params: MoeParams, single_expert: bool = False) -> MoeOutput:
    """Dense soft routing: every expert runs and outputs are mixed by the gate.

    ``single_expert`` bypasses the gate and uses the first expert alone.
    A (d,) input is treated as a batch of one.
    """
    if z.ndim == 1:
        z = z.reshape(1, z.shape[0])
    if single_expert:
        out = params.experts[0](z)
        gates = Tensor(np.ones((z.shape[0], 1), dtype=z.dtype))
        return MoeOutput(out, gates, out.reshape(z.shape[0], 1, out.shape[-1]))

    gates = softmax(z @ params.gate_w + params.gate_b, axis=-1)
    outputs = stack([expert(z) for expert in params.experts], axis=1)
    h_moe = sum_(outputs * gates.reshape(*gates.shape, 1), axis=1)
    return MoeOutput(h_moe, gates, outputs)


def expert_diversity_loss(expert_outputs: Tensor, mode: str = "batch_mean") -> Tensor:
    """Mean pairwise cosine similarity between experts over ordered pairs i != j.

    ``batch_mean`` compares the batch-mean output of each expert;
    ``per_sample`` averages the pairwise similarity over samples.
    """
    if expert_outputs.ndim == 2:
        expert_outputs = expert_outputs.reshape(1, *expert_outputs.shape)
    k = expert_outputs.shape[1]
    if k < 2:
        log.warning("diversity loss needs at least two experts, got %d; using 0", k)
        return Tensor(np.zeros((), dtype=expert_outputs.dtype))

    off_diagonal = Tensor(1.0 - np.eye(k), dtype=expert_outputs.dtype)
    pairs = k * (k - 1)
    if mode == "batch_mean":
        unit = l2_normalize(expert_outputs.mean(axis=0), axis=-1)
        sims = unit @ unit.T
        return sum_(sims * off_diagonal) / pairs
    if mode == "per_sample":
        unit = l2_normalize(expert_outputs, axis=-1)
        sims = unit @ transpose(unit, (0, 2, 1))
        return sum_(sims * off_diagonal, axis=(1, 2)).mean() / pairs
    raise ValueError(f"unknown diversity mode {mode!r}")
