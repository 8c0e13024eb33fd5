from __future__ import annotations

import json
import logging
import os
import pathlib
from collections import Counter, defaultdict
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from dataset.manifest import SampleRecord
from errors import SplitError
from numeric.rng import RngStream

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
DEFAULT_RATIOS = (0.8, 0.1, 0.1)


@dataclass
class SplitAssignment:
    clusters: dict[int, str]

    def split_of(self, record: SampleRecord) -> str:
        try:
            return self.clusters[record.cluster]
        except KeyError as exc:
            raise SplitError(f"sample {record.id}: cluster {record.cluster} has no split") from exc

    def partition(self, records: Sequence[SampleRecord]) -> dict[str, list[SampleRecord]]:
        parts: dict[str, list[SampleRecord]] = {name: [] for name in SPLITS}
        for r in records:
            parts[self.split_of(r)].append(r)
        return parts

    def save(self, path: str | os.PathLike) -> None:
        data = {str(c): s for c, s in sorted(self.clusters.items())}
        pathlib.Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> SplitAssignment:
        try:
            data = json.loads(pathlib.Path(path).read_text())
        except FileNotFoundError as exc:
            raise SplitError(f"split file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise SplitError(f"split file {path} is not valid JSON: {exc}") from exc
        bad = {s for s in data.values() if s not in SPLITS}
        if bad:
            raise SplitError(f"split file {path} names unknown split(s) {sorted(bad)}")
        return cls({int(c): s for c, s in data.items()})


def split_by_cluster(
    records: Sequence[SampleRecord],
    ratios: Sequence[float] = DEFAULT_RATIOS,
    seed: int = 0,
    strict: bool = False,
) -> SplitAssignment:
    """Assign whole clusters to train/val/test, stratified by class.

    Each cluster belongs to its majority label (smallest label on ties). Per
    class, the clusters are shuffled with the seeded stream, then each goes to
    the split whose sample deficit against that class's target is largest
    (earlier split on ties). With ``strict`` every split with a positive ratio
    must receive every class; otherwise a lone cluster simply lands in train.
    """
    if len(ratios) != len(SPLITS) or any(r < 0 for r in ratios) or not np.isclose(sum(ratios), 1.0):
        raise SplitError(f"split ratios must be three non-negative values summing to 1, got {tuple(ratios)}")
    members: dict[int, Counter] = defaultdict(Counter)
    for r in records:
        members[r.cluster][r.label] += 1
    if not members:
        raise SplitError("cannot split an empty record list")
    if strict and len(members) < len(SPLITS):
        raise SplitError(f"{len(members)} cluster(s) cannot fill {len(SPLITS)} splits")

    by_class: dict[int, list[int]] = defaultdict(list)
    for cluster, labels in sorted(members.items()):
        majority = min(labels, key=lambda label: (-labels[label], label))
        by_class[majority].append(cluster)

    rng = RngStream(seed)
    ratios = np.asarray(ratios, dtype=np.float64)
    mapping: dict[int, str] = {}
    assigned = np.zeros((max(by_class) + 1, len(SPLITS)))
    for label in sorted(by_class):
        clusters = by_class[label]
        targets = ratios * sum(sum(members[c].values()) for c in clusters)
        for idx in rng.permutation(len(clusters)):
            cluster = clusters[int(idx)]
            k = int(np.argmax(targets - assigned[label]))
            mapping[cluster] = SPLITS[k]
            assigned[label, k] += sum(members[cluster].values())

    if strict:
        present: dict[str, set[int]] = {name: set() for name in SPLITS}
        for r in records:
            present[mapping[r.cluster]].add(r.label)
        everything = set().union(*present.values())
        for name, ratio in zip(SPLITS, ratios):
            missing = everything - present[name]
            if ratio > 0 and missing:
                raise SplitError(f"{name} split lacks class(es) {sorted(missing)}; each class needs more clusters")

    log.info(
        "Split %d cluster(s) over %d class(es) into %s samples",
        len(mapping),
        len(by_class),
        "/".join(str(int(n)) for n in assigned.sum(axis=0)),
    )
    return SplitAssignment(mapping)
