from __future__ import annotations

import logging
import os
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from backbone.model import CameModel
from errors import DataError
from featurization.bundle import ModalityBundle, collate, modality_widths
from training.metrics import MetricsReport, build_report
from utils.formatting import write_csv

log = logging.getLogger(__name__)


@dataclass
class EvalResult:
    ids: list[str]
    labels: np.ndarray
    probabilities: np.ndarray  # (N, C)
    embeddings: np.ndarray | None  # pooled h_moe, (N, d)
    report: MetricsReport
    loss: float | None = None

    @property
    def predictions(self) -> np.ndarray:
        return np.argmax(self.probabilities, axis=1)


def chunked(items: Sequence, size: int) -> list[Sequence]:
    return [items[i : i + size] for i in range(0, len(items), size)]


def evaluate(
    model: CameModel,
    bundles: Sequence[ModalityBundle],
    batch_size: int = 64,
    workers: int = 1,
    alpha=None,
    with_loss: bool = False,
    with_embeddings: bool = False,
) -> EvalResult:
    """Inference over ``bundles``; batches may run on a thread pool against read-only parameters.

    ``with_loss`` adds the mean total loss (inference-mode fusion weights).
    """
    if not bundles:
        raise ValueError("cannot evaluate an empty split")
    top = max(b.label for b in bundles)
    if top >= model.n_classes:
        raise DataError(f"label {top} does not fit a model with {model.n_classes} classes")
    for m, width in modality_widths(bundles).items():
        if m in model.widths and width != model.widths[m]:
            raise DataError(f"{m} features have width {width}, the model expects {model.widths[m]}")
    dtype = np.dtype(model.cfg.dtype)

    def run(chunk: Sequence[ModalityBundle]):
        batch = collate(chunk, model.widths, dtype)
        out = model.forward(batch, training=False)
        loss = model.loss(out, batch, alpha).total.item() * len(batch) if with_loss else 0.0
        embeddings = out.h_moe.data.copy() if with_embeddings else None
        return batch.ids, batch.labels, out.probabilities, embeddings, loss

    chunks = chunked(list(bundles), batch_size)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]

    ids = [i for part in parts for i in part[0]]
    labels = np.concatenate([part[1] for part in parts])
    probabilities = np.concatenate([part[2] for part in parts])
    embeddings = np.concatenate([part[3] for part in parts]) if with_embeddings else None
    loss = sum(part[4] for part in parts) / len(ids) if with_loss else None
    report = build_report(labels, probabilities, model.n_classes)
    return EvalResult(ids, labels, probabilities, embeddings, report, loss)


def export_embeddings(result: EvalResult, path: str | os.PathLike) -> None:
    """Pooled expert-refined representation per sample, for external projection plots."""
    if result.embeddings is None:
        raise ValueError("evaluation ran without embeddings")
    width = result.embeddings.shape[1]
    header = ("id", "label", *(f"h{j}" for j in range(width)))
    rows = (
        [sample_id, int(label), *(repr(float(x)) for x in row)]
        for sample_id, label, row in zip(result.ids, result.labels, result.embeddings)
    )
    write_csv(path, header, rows)
    log.info("Embeddings for %d sample(s) written to %s", len(result.ids), path)
