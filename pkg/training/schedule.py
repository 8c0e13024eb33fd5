from __future__ import annotations

import math

from config import TrainConfig


def lr_at_epoch(epoch: int, cfg: TrainConfig) -> float:
    """Learning rate for a 0-based epoch.

    ``step``: lr0 · decay^floor(e / every). ``cosine_cyclic``: the step-decayed
    rate modulated by a half-cosine that restarts every ``lr_cycle_epochs``.
    """
    if epoch < 0:
        raise ValueError(f"epoch must be non-negative, got {epoch}")
    base = cfg.lr * cfg.lr_decay ** (epoch // cfg.lr_decay_every)
    if cfg.lr_schedule == "step":
        return base
    if cfg.lr_schedule == "cosine_cyclic":
        phase = (epoch % cfg.lr_cycle_epochs) / cfg.lr_cycle_epochs
        return base * 0.5 * (1.0 + math.cos(math.pi * phase))
    raise ValueError(f"unknown lr schedule {cfg.lr_schedule!r}")
