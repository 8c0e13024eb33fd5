from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from config import FILE_MODALITIES, MODALITIES
from errors import DataError
from featurization.camt import read_tensor_file
from featurization.encoders import encode_blosum, encode_one_hot
from featurization.graph import build_residue_graph, normalize_adjacency
from featurization.tables import DescriptorTable, descriptor_table
from numeric.rng import RngStream

if TYPE_CHECKING:
    from dataset.manifest import SampleRecord

log = logging.getLogger(__name__)


@dataclass
class ModalityBundle:
    """Per-sample modality matrices; ``features["gcn"]`` holds the GCN node features."""

    sample_id: str
    sequence: str
    label: int
    features: dict[str, np.ndarray]
    adjacency: np.ndarray
    gcn_fallback: bool = False

    @property
    def length(self) -> int:
        return len(self.sequence)

    @property
    def mask(self) -> tuple[bool, ...]:
        return tuple(m in self.features for m in MODALITIES)


@dataclass
class Batch:
    ids: list[str]
    labels: np.ndarray
    features: dict[str, np.ndarray]
    presence: np.ndarray
    pad_mask: np.ndarray
    norm_adj: np.ndarray
    sequences: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.ids)


def _load(path, modality: str, length: int) -> np.ndarray:
    array = read_tensor_file(path).data.astype(np.float64)
    if array.ndim != 2 or array.shape[0] != length:
        raise DataError(
            f"{path}: {modality} features have shape {array.shape}, expected {length} rows"
        )
    return array


def build_bundle(
    record: SampleRecord,
    threshold: float,
    table: DescriptorTable | None = None,
) -> ModalityBundle:
    """Compute or ingest the five modalities of one manifest record.

    One-hot and BLOSUM are computed from the sequence unless a file is given.
    ESM and structure embeddings are file-only; a missing file marks that
    modality absent for the sample. GCN node features come from a ``gcn`` file,
    else the ESM embedding, else the one-hot matrix.
    """
    seq = record.sequence
    length = len(seq)
    paths = record.features
    features: dict[str, np.ndarray] = {}

    features["onehot"] = _load(paths["onehot"], "onehot", length) if "onehot" in paths else encode_one_hot(seq)
    features["blosum"] = _load(paths["blosum"], "blosum", length) if "blosum" in paths else encode_blosum(seq)
    for modality in FILE_MODALITIES:
        if modality in paths:
            features[modality] = _load(paths[modality], modality, length)

    fallback = False
    if "gcn" in paths:
        nodes = _load(paths["gcn"], "gcn", length)
    elif "esm" in features:
        nodes = features["esm"]
    else:
        nodes = features["onehot"]
        fallback = True
    features["gcn"] = nodes

    if record.jitter_sigma > 0:
        noise = RngStream(record.jitter_seed)
        features = {
            m: f + noise.fork(m).normal(f.shape, scale=record.jitter_sigma) for m, f in features.items()
        }

    graph = build_residue_graph(seq, features["gcn"], threshold, table or descriptor_table())
    return ModalityBundle(
        sample_id=record.id,
        sequence=seq,
        label=record.label,
        features=features,
        adjacency=graph.adjacency,
        gcn_fallback=fallback,
    )


def build_bundles(
    records: Sequence[SampleRecord],
    threshold: float,
    descriptors: Sequence[str] | None = None,
) -> list[ModalityBundle]:
    table = descriptor_table(descriptors)
    bundles = [build_bundle(r, threshold, table) for r in records]
    fallbacks = sum(b.gcn_fallback for b in bundles)
    if fallbacks:
        log.info(
            "GCN node features fell back to one-hot for %d/%d sample(s) without ESM embeddings",
            fallbacks,
            len(bundles),
        )
    return bundles


def modality_widths(bundles: Sequence[ModalityBundle]) -> dict[str, int]:
    """Feature width of each modality; inconsistent widths across samples are a data error."""
    widths: dict[str, int] = {}
    for b in bundles:
        for m, f in b.features.items():
            seen = widths.setdefault(m, f.shape[1])
            if seen != f.shape[1]:
                raise DataError(
                    f"sample {b.sample_id}: {m} width {f.shape[1]} differs from {seen} seen earlier"
                )
    return widths


def collate(
    bundles: Sequence[ModalityBundle],
    widths: Mapping[str, int],
    dtype=np.float64,
) -> Batch:
    """Pad a list of bundles to the batch-max length."""
    if not bundles:
        raise ValueError("cannot collate an empty batch")
    n = len(bundles)
    max_len = max(b.length for b in bundles)
    pad_mask = np.zeros((n, max_len), dtype=bool)
    presence = np.zeros((n, len(MODALITIES)), dtype=bool)
    adjacency = np.zeros((n, max_len, max_len), dtype=np.float64)
    features = {m: np.zeros((n, max_len, widths[m]), dtype=dtype) for m in MODALITIES if m in widths}

    for i, b in enumerate(bundles):
        pad_mask[i, : b.length] = True
        adjacency[i, : b.length, : b.length] = b.adjacency
        for j, m in enumerate(MODALITIES):
            if m in b.features and m in features:
                features[m][i, : b.length] = b.features[m]
                presence[i, j] = True

    return Batch(
        ids=[b.sample_id for b in bundles],
        labels=np.array([b.label for b in bundles], dtype=np.int64),
        features=features,
        presence=presence,
        pad_mask=pad_mask,
        norm_adj=normalize_adjacency(adjacency).astype(dtype),
        sequences=[b.sequence for b in bundles],
    )
