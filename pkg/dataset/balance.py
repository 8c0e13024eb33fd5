from __future__ import annotations

import dataclasses
import logging
from collections.abc import Sequence

import numpy as np

from dataset.manifest import SampleRecord
from errors import DataError
from numeric.rng import RngStream

log = logging.getLogger(__name__)

STRATEGIES = ("oversample", "downsample")


def balance_classes(
    records: Sequence[SampleRecord],
    strategy: str,
    rng: RngStream,
    jitter_sigma: float = 0.0,
    n_classes: int | None = None,
) -> list[SampleRecord]:
    """Equalize class counts of a training split.

    ``oversample`` keeps every record and appends duplicates of minority
    samples, each with its own jitter seed, until every class matches the
    majority. ``downsample`` keeps a seeded subset of each class at the
    minority count, in input order.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown balancing strategy {strategy!r}")
    if not records:
        raise DataError("cannot balance an empty record list")
    labels = np.array([r.label for r in records], dtype=np.int64)
    n_classes = n_classes or int(labels.max()) + 1
    by_class = [np.flatnonzero(labels == c) for c in range(n_classes)]
    empty = [c for c, idx in enumerate(by_class) if len(idx) == 0]
    if empty:
        raise DataError(f"class(es) {empty} have no samples to balance")
    counts = [len(idx) for idx in by_class]

    if strategy == "downsample":
        target = min(counts)
        keep = np.zeros(len(records), dtype=bool)
        for idx in by_class:
            chosen = idx if len(idx) == target else idx[rng.choice(len(idx), target, replace=False)]
            keep[chosen] = True
        out = [r for r, k in zip(records, keep) if k]
    else:
        target = max(counts)
        out = list(records)
        for idx in by_class:
            need = target - len(idx)
            if need == 0:
                continue
            for n, pick in enumerate(rng.choice(len(idx), need, replace=True)):
                source = records[int(idx[pick])]
                out.append(
                    dataclasses.replace(
                        source,
                        id=f"{source.id}#dup{n}",
                        jitter_sigma=jitter_sigma,
                        jitter_seed=int(rng.integers(0, 2**63)),
                    )
                )

    log.info("Balanced classes by %s: %s -> %d per class", strategy, counts, target)
    return out
