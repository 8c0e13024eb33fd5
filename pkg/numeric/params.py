"""Parameter initialization and traversal of nested parameter containers."""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Iterator

import numpy as np

from numeric.rng import RngStream
from numeric.tensor import Tensor


def glorot(rng: RngStream, fan_in: int, fan_out: int, dtype=np.float64) -> Tensor:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform((fan_in, fan_out), -limit, limit, dtype=dtype), requires_grad=True)


def zeros(shape, dtype=np.float64) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


def ones(shape, dtype=np.float64) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=True)


def named_parameters(container, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
    """Yield ``(dotted_name, tensor)`` for every Tensor reachable through
    dataclass fields, lists/tuples and string-keyed dicts, in declaration order."""
    if isinstance(container, Tensor):
        yield prefix, container
    elif dataclasses.is_dataclass(container):
        for f in dataclasses.fields(container):
            name = f"{prefix}.{f.name}" if prefix else f.name
            yield from named_parameters(getattr(container, f.name), name)
    elif isinstance(container, (list, tuple)):
        for i, item in enumerate(container):
            yield from named_parameters(item, f"{prefix}.{i}" if prefix else str(i))
    elif isinstance(container, dict):
        for key, item in container.items():
            yield from named_parameters(item, f"{prefix}.{key}" if prefix else str(key))


def parameter_dict(container) -> dict[str, Tensor]:
    params = {}
    for name, tensor in named_parameters(container):
        tensor.name = name
        params[name] = tensor
    return params
