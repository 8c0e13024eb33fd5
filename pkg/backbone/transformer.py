from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from numeric.functional import dropout, gelu, layer_norm, softmax
from numeric.params import glorot, ones, zeros
from numeric.rng import RngStream
from numeric.tensor import Tensor, masked_fill, transpose


@dataclass
class BlockParams:
    ln1_gain: Tensor
    ln1_bias: Tensor
    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor
    ff_w1: Tensor
    ff_b1: Tensor
    ff_w2: Tensor
    ff_b2: Tensor

    @classmethod
    def init(cls, rng: RngStream, d_model: int, d_ff: int, dtype=np.float64) -> BlockParams:
        return cls(
            ln1_gain=ones((d_model,), dtype),
            ln1_bias=zeros((d_model,), dtype),
            wq=glorot(rng, d_model, d_model, dtype),
            bq=zeros((d_model,), dtype),
            wk=glorot(rng, d_model, d_model, dtype),
            bk=zeros((d_model,), dtype),
            wv=glorot(rng, d_model, d_model, dtype),
            bv=zeros((d_model,), dtype),
            wo=glorot(rng, d_model, d_model, dtype),
            bo=zeros((d_model,), dtype),
            ln2_gain=ones((d_model,), dtype),
            ln2_bias=zeros((d_model,), dtype),
            ff_w1=glorot(rng, d_model, d_ff, dtype),
            ff_b1=zeros((d_ff,), dtype),
            ff_w2=glorot(rng, d_ff, d_model, dtype),
            ff_b2=zeros((d_model,), dtype),
        )


@dataclass
class TransformerParams:
    blocks: list[BlockParams]
    n_heads: int
    dropout: float = 0.0
    ln_eps: float = 1e-5
    positional: Tensor | None = None

    @classmethod
    def init(
        cls,
        rng: RngStream,
        d_model: int,
        n_layers: int,
        n_heads: int,
        ffn_mult: int = 4,
        dropout: float = 0.0,
        ln_eps: float = 1e-5,
        max_len: int | None = None,
        dtype=np.float64,
    ) -> TransformerParams:
        if d_model % n_heads:
            raise ValueError(f"d_model {d_model} is not divisible by {n_heads} heads")
        blocks = [BlockParams.init(rng.fork(f"block{i}"), d_model, ffn_mult * d_model, dtype) for i in range(n_layers)]
        positional = None
        if max_len:
            positional = Tensor(rng.normal((max_len, d_model), scale=0.02, dtype=dtype), requires_grad=True)
        return cls(blocks, n_heads, dropout, ln_eps, positional)


def multi_head_attention(
    x: Tensor,
    mask: np.ndarray,
    block: BlockParams,
    n_heads: int,
) -> tuple[Tensor, Tensor]:
    """Self-attention over (B, L, d); masked keys get exactly zero weight.

    Returns the projected output and the (B, h, L, L) attention weights.
    """
    batch, length, d_model = x.shape
    head = d_model // n_heads

    def split(t: Tensor) -> Tensor:
        return transpose(t.reshape(batch, length, n_heads, head), (0, 2, 1, 3))

    q = split(x @ block.wq + block.bq)
    k = split(x @ block.wk + block.bk)
    v = split(x @ block.wv + block.bv)

    scores = (q @ transpose(k, (0, 1, 3, 2))) / math.sqrt(head)
    key_masked = ~np.asarray(mask, dtype=bool)[:, None, None, :]
    attn = softmax(masked_fill(scores, key_masked, -np.inf), axis=-1)
    context = transpose(attn @ v, (0, 2, 1, 3)).reshape(batch, length, d_model)
    return context @ block.wo + block.bo, attn


def encoder_block(
    h: Tensor,
    mask: np.ndarray,
    block: BlockParams,
    params: TransformerParams,
    rng: RngStream | None,
    training: bool,
) -> tuple[Tensor, Tensor]:
    normed = layer_norm(h, block.ln1_gain, block.ln1_bias, params.ln_eps)
    attended, attn = multi_head_attention(normed, mask, block, params.n_heads)
    a = h + dropout(attended, params.dropout, rng, training)

    normed = layer_norm(a, block.ln2_gain, block.ln2_bias, params.ln_eps)
    ff = gelu(normed @ block.ff_w1 + block.ff_b1) @ block.ff_w2 + block.ff_b2
    return a + dropout(ff, params.dropout, rng, training), attn


def transformer_encode(
    fused: Tensor,
    mask: np.ndarray | None,
    params: TransformerParams,
    rng: RngStream | None,
    training: bool,
    return_attention: bool = False,
):
    """Stack of Pre-LN blocks over (B, L, d) or (L, d) input."""
    squeeze = fused.ndim == 2
    h = fused.reshape(1, *fused.shape) if squeeze else fused
    batch, length, _ = h.shape
    if mask is None:
        mask = np.ones((batch, length), dtype=bool)
    mask = np.asarray(mask, dtype=bool).reshape(batch, length)

    if params.positional is not None:
        if length > params.positional.shape[0]:
            raise ValueError(f"sequence length {length} exceeds positional table {params.positional.shape[0]}")
        h = h + params.positional[:length]

    attentions = []
    for block in params.blocks:
        h, attn = encoder_block(h, mask, block, params, rng, training)
        attentions.append(attn)

    if squeeze:
        h = h.reshape(h.shape[1:])
    return (h, attentions) if return_attention else h
