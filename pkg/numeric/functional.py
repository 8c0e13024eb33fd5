"""Differentiable building blocks shared by every model component."""

from __future__ import annotations

import math

import numpy as np

from numeric.rng import RngStream
from numeric.tensor import Tensor, as_tensor, masked_fill, record_op, sqrt, sum_, unbroadcast

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_K = 0.044715


def gelu(x: Tensor) -> Tensor:
    """Tanh-approximation GELU; forward and backward use the same formula."""
    x = as_tensor(x)
    xd = x.data
    inner = _GELU_C * (xd + _GELU_K * xd**3)
    t = np.tanh(inner)
    out = 0.5 * xd * (1.0 + t)

    def vjp(g: np.ndarray):
        d_inner = _GELU_C * (1.0 + 3.0 * _GELU_K * xd * xd)
        return (g * (0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * d_inner),)

    return record_op("gelu", out, (x,), vjp)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g: np.ndarray):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return record_op("softmax", out, (x,), vjp)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse

    def vjp(g: np.ndarray):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return record_op("log_softmax", out, (x,), vjp)


def log1m_exp(x: Tensor) -> Tensor:
    """log(1 - exp(x)) for x <= 0, with 1 - exp(x) floored at the dtype's smallest normal."""
    x = as_tensor(x)
    xd = x.data
    one_minus = np.maximum(-np.expm1(xd), np.finfo(xd.dtype).tiny)
    out = np.log(one_minus)

    def vjp(g: np.ndarray):
        return (-g * np.exp(xd) / one_minus,)

    return record_op("log1m_exp", out, (x,), vjp)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis with population variance, then apply gain/bias."""
    if gain.shape[-1] != x.shape[-1] or bias.shape[-1] != x.shape[-1]:
        raise ValueError(
            f"layer_norm affine extent {gain.shape}/{bias.shape} does not match input {x.shape}"
        )
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    centered = xd - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = xhat * gain.data + bias.data

    def vjp(g: np.ndarray):
        gxhat = g * gain.data
        gx = inv * (
            gxhat
            - gxhat.mean(axis=-1, keepdims=True)
            - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return gx, unbroadcast(g * xhat, gain.shape), unbroadcast(g, bias.shape)

    return record_op("layer_norm", out, (x, gain, bias), vjp)


def dropout(x: Tensor, p: float, rng: RngStream | None, training: bool) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-p) at train time only."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an RngStream")
    keep = rng.bernoulli(1.0 - p, x.shape).astype(x.dtype) / (1.0 - p)
    return x * Tensor(keep, dtype=x.dtype)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    out = x @ weight
    return out + bias if bias is not None else out


def safe_norm(x: Tensor, axis: int = -1) -> tuple[Tensor, np.ndarray]:
    """L2 norm along ``axis`` (kept) with zero norms replaced by 1; also returns the zero mask."""
    squared = sum_(x * x, axis=axis, keepdims=True)
    zero = squared.data == 0.0
    return sqrt(masked_fill(squared, zero, 1.0)), zero


def l2_normalize(x: Tensor, axis: int = -1) -> Tensor:
    norm, _ = safe_norm(x, axis=axis)
    return x / norm


def cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer ``targets`` under softmax(logits)."""
    targets = np.asarray(targets, dtype=np.int64)
    logp = log_softmax(logits, axis=-1)
    picked = logp[np.arange(len(targets)), targets]
    return -picked.mean()
