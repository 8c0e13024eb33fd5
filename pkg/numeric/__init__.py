from numeric.functional import (
    cross_entropy,
    dropout,
    gelu,
    l2_normalize,
    layer_norm,
    linear,
    log_softmax,
    softmax,
)
from numeric.optim import AdamState, adam_step
from numeric.rng import RngStream
from numeric.tensor import Tape, Tensor, forward_backward

__all__ = [
    "AdamState",
    "RngStream",
    "Tape",
    "Tensor",
    "adam_step",
    "cross_entropy",
    "dropout",
    "forward_backward",
    "gelu",
    "l2_normalize",
    "layer_norm",
    "linear",
    "log_softmax",
    "softmax",
]
