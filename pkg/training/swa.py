from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from numeric.tensor import Tensor

log = logging.getLogger(__name__)


@dataclass
class SwaState:
    """Running mean of parameter snapshots absorbed from epoch ``start`` on."""

    start: int
    count: int = 0
    mean: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def active(self) -> bool:
        return self.count > 0


def swa_average(state: SwaState, params: Mapping[str, Tensor | np.ndarray]) -> SwaState:
    """Absorb one snapshot: mean <- mean + (params - mean) / n."""
    state.count += 1
    n = state.count
    for name, value in params.items():
        array = value.data if isinstance(value, Tensor) else np.asarray(value)
        if n == 1 or name not in state.mean:
            state.mean[name] = array.astype(np.float64, copy=True)
            continue
        state.mean[name] = state.mean[name] + (array - state.mean[name]) / n
    log.debug("SWA absorbed snapshot %d", n)
    return state

