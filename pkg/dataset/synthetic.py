"""Planted-structure datasets for desk-scale experiments."""

from __future__ import annotations

import logging
import os
import pathlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from config import DEFAULT_SYNTHETIC_EMBED_DIM, MODALITIES
from dataset.manifest import SampleRecord, write_manifest
from featurization.camt import write_tensor_file
from featurization.tables import ALPHABET
from numeric.rng import RngStream

log = logging.getLogger(__name__)


def _default_widths() -> dict[str, int]:
    return {
        "onehot": len(ALPHABET),
        "blosum": len(ALPHABET),
        "esm": DEFAULT_SYNTHETIC_EMBED_DIM,
        "struct": DEFAULT_SYNTHETIC_EMBED_DIM // 2,
        "gcn": DEFAULT_SYNTHETIC_EMBED_DIM // 2,
    }


@dataclass
class SyntheticSpec:
    n_classes: int = 3
    samples_per_class: int = 100
    min_length: int = 8
    max_length: int = 16
    separation: float = 5.0
    noise: float = 1.0
    seed: int = 0
    cluster_size: int = 4
    signal_modalities: tuple[str, ...] = MODALITIES
    widths: dict[str, int] = field(default_factory=_default_widths)
    dtype: str = "float32"

    def validate(self) -> SyntheticSpec:
        if self.n_classes < 2:
            raise ValueError(f"synthetic data needs at least 2 classes, got {self.n_classes}")
        if self.separation < 0 or self.noise < 0:
            raise ValueError("separation and noise must be non-negative")
        if not 1 <= self.min_length <= self.max_length:
            raise ValueError(f"bad length range [{self.min_length}, {self.max_length}]")
        if self.samples_per_class < 1 or self.cluster_size < 1:
            raise ValueError("samples_per_class and cluster_size must be positive")
        unknown = (set(self.signal_modalities) | set(self.widths)) - set(MODALITIES)
        if unknown:
            raise ValueError(f"unknown modality name(s): {sorted(unknown)}")
        missing = set(MODALITIES) - set(self.widths)
        if missing:
            raise ValueError(f"no width given for modality(ies) {sorted(missing)}")
        return self


def _class_means(spec: SyntheticSpec, rng: RngStream) -> dict[str, np.ndarray]:
    """Per modality a (C, width) table of vectors with norm ``separation``."""
    means = {}
    for m in MODALITIES:
        width = spec.widths[m]
        if m not in spec.signal_modalities:
            means[m] = np.zeros((spec.n_classes, width))
            continue
        raw = rng.fork(m).normal((spec.n_classes, width))
        means[m] = raw / np.linalg.norm(raw, axis=1, keepdims=True) * spec.separation
    return means


def _mutate(base: str, rng: RngStream) -> str:
    residues = list(base)
    for pos in rng.choice(len(residues), min(2, len(residues)), replace=False):
        residues[int(pos)] = ALPHABET[int(rng.integers(0, len(ALPHABET)))]
    return "".join(residues)


def generate_synthetic(spec: SyntheticSpec, out_dir: str | os.PathLike, workers: int = 1) -> list[SampleRecord]:
    """Write CAMT feature files and ``manifest.jsonl`` under ``out_dir``.

    Each class owns a mean vector per modality; every row of a sample's
    feature matrix is that mean plus Gaussian noise. Samples come in clusters
    of ``cluster_size`` sharing a base sequence up to two point mutations.
    Output bytes depend only on the spec.
    """
    spec.validate()
    out = pathlib.Path(out_dir)
    feature_dir = out / "features"
    feature_dir.mkdir(parents=True, exist_ok=True)
    root = RngStream(spec.seed)
    means = _class_means(spec, root.fork("means"))
    dtype = np.dtype(spec.dtype)

    jobs = []
    records = []
    cluster = 0
    for label in range(spec.n_classes):
        class_rng = root.fork(f"class{label}")
        base = ""
        for i in range(spec.samples_per_class):
            if i % spec.cluster_size == 0:
                if i:
                    cluster += 1
                length = int(class_rng.integers(spec.min_length, spec.max_length + 1))
                base = "".join(ALPHABET[int(j)] for j in class_rng.integers(0, len(ALPHABET), size=length))
            sample_id = f"s{label:02d}_{i:05d}"
            sequence = _mutate(base, class_rng)
            paths = {m: str(feature_dir / f"{sample_id}.{m}.camt") for m in MODALITIES}
            records.append(SampleRecord(sample_id, sequence, label, cluster, paths))
            jobs.append((paths, label, len(sequence), class_rng.fork(sample_id)))
        cluster += 1

    def emit(job) -> None:
        paths, label, length, rng = job
        for m in MODALITIES:
            rows = means[m][label] + rng.normal((length, spec.widths[m]), scale=spec.noise)
            write_tensor_file(paths[m], rows.astype(dtype))

    # per-sample streams are forked above, so file contents do not depend on scheduling
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        list(pool.map(emit, jobs))

    write_manifest(out / "manifest.jsonl", records)
    log.info(
        "Generated %d synthetic samples in %d clusters under %s",
        len(records),
        cluster,
        out,
    )
    return records
