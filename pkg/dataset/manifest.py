"""Dataset manifest: one JSON object per line.

``{"id": ..., "sequence": ..., "label": ..., "cluster": ..., "features": {"esm": "path.camt", ...}}``
Relative feature paths resolve against the manifest's directory.
"""

from __future__ import annotations

import json
import logging
import os
import pathlib
from collections.abc import Iterable
from dataclasses import dataclass, field

from config import MODALITIES
from errors import DataError

log = logging.getLogger(__name__)


@dataclass
class SampleRecord:
    id: str
    sequence: str
    label: int
    cluster: int
    features: dict[str, str] = field(default_factory=dict)
    jitter_sigma: float = 0.0
    jitter_seed: int = 0

    def validate(self, n_classes: int | None = None) -> SampleRecord:
        if not self.sequence:
            raise DataError(f"sample {self.id}: empty sequence")
        if self.label < 0 or (n_classes is not None and self.label >= n_classes):
            raise DataError(f"sample {self.id}: label {self.label} outside [0, {n_classes})")
        unknown = set(self.features) - set(MODALITIES)
        if unknown:
            raise DataError(f"sample {self.id}: unknown modality file(s) {sorted(unknown)}")
        return self


def _parse(line: str, lineno: int, source: str, base: pathlib.Path) -> SampleRecord:
    try:
        obj = json.loads(line)
        features = {m: str((base / p) if not os.path.isabs(p) else p) for m, p in obj.get("features", {}).items()}
        return SampleRecord(
            id=str(obj["id"]),
            sequence=str(obj["sequence"]),
            label=int(obj["label"]),
            cluster=int(obj["cluster"]),
            features=features,
        )
    except json.JSONDecodeError as exc:
        raise DataError(f"{source}:{lineno}: invalid JSON: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{source}:{lineno}: malformed record: {exc}") from exc


def load_manifest(path: str | os.PathLike, n_classes: int | None = None) -> list[SampleRecord]:
    """Read a manifest, dropping exact (sequence, label) duplicates after the first."""
    path = pathlib.Path(path)
    try:
        lines = path.read_text().splitlines()
    except FileNotFoundError as exc:
        raise DataError(f"manifest not found: {path}") from exc

    records = []
    seen: set[tuple[str, int]] = set()
    dropped = 0
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        record = _parse(line, lineno, str(path), path.parent).validate(n_classes)
        key = (record.sequence, record.label)
        if key in seen:
            dropped += 1
            continue
        seen.add(key)
        records.append(record)

    if not records:
        raise DataError(f"manifest {path} holds no records")
    if dropped:
        log.info("Dropped %d duplicate (sequence, label) record(s) from %s", dropped, path)
    log.info("Loaded %d record(s) from %s", len(records), path)
    return records


def write_manifest(path: str | os.PathLike, records: Iterable[SampleRecord]) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    base = path.parent.resolve()
    lines = []
    for r in records:
        features = {}
        for m, p in r.features.items():
            resolved = pathlib.Path(p).resolve()
            features[m] = resolved.relative_to(base).as_posix() if resolved.is_relative_to(base) else str(p)
        obj = {"id": r.id, "sequence": r.sequence, "label": r.label, "cluster": r.cluster, "features": features}
        lines.append(json.dumps(obj, sort_keys=True))
    path.write_text("\n".join(lines) + "\n")


def class_count(records: Iterable[SampleRecord]) -> int:
    return max(r.label for r in records) + 1
