from __future__ import annotations

import logging
import os
from collections import deque
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from backbone.model import CameModel
from config import TrainConfig
from dataset.manifest import SampleRecord, class_count
from errors import DataError, NonFiniteGradientError
from featurization.bundle import ModalityBundle, build_bundles, collate, modality_widths
from numeric.optim import AdamState, adam_step
from numeric.rng import RngStream
from numeric.tensor import Tape, forward_backward
from objectives.losses import inverse_frequency_alpha
from training.checkpoint import Checkpoint
from training.evaluate import EvalResult, chunked, evaluate
from training.metrics import MetricsReport
from training.schedule import lr_at_epoch
from training.swa import SwaState, swa_average
from utils.formatting import write_csv

log = logging.getLogger(__name__)

EPOCH_LOG_COLUMNS = ("epoch", "lr", "train_loss", "val_loss", "val_f1_macro", "val_mcc", "swa_active")


@dataclass
class EpochLog:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float
    val_f1_macro: float
    val_mcc: float
    swa_active: bool
    components: dict[str, float] = field(default_factory=dict)

    def row(self) -> list:
        return [
            self.epoch,
            repr(self.lr),
            repr(self.train_loss),
            repr(self.val_loss),
            repr(self.val_f1_macro),
            repr(self.val_mcc),
            int(self.swa_active),
        ]


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list[EpochLog]
    model: CameModel
    reports: dict[str, MetricsReport]
    stopped_early: bool = False

    @property
    def primary_variant(self) -> str:
        return "swa" if self.checkpoint.config.is_enabled("swa") else "raw"

    def report(self, split: str, variant: str | None = None) -> MetricsReport:
        return self.reports[f"{split}/{variant or self.primary_variant}"]


def write_epoch_log(path: str | os.PathLike, history: Sequence[EpochLog]) -> None:
    write_csv(path, EPOCH_LOG_COLUMNS, (entry.row() for entry in history))


def _epoch_order(labels: np.ndarray, rng: RngStream, class_aware: bool) -> np.ndarray:
    """Sample order for one epoch.

    Class-aware order interleaves independently shuffled classes so every
    batch sees as many classes as possible.
    """
    if not class_aware:
        return rng.permutation(len(labels))
    queues = [deque(np.flatnonzero(labels == c)[rng.permutation(int((labels == c).sum()))]) for c in np.unique(labels)]
    order = []
    while any(queues):
        for q in queues:
            if q:
                order.append(q.popleft())
    return np.asarray(order, dtype=np.int64)


def train_epoch(
    model: CameModel,
    bundles: Sequence[ModalityBundle],
    adam: AdamState,
    rng: RngStream,
    epoch: int,
    alpha=None,
) -> tuple[float, dict[str, float]]:
    """One pass over the training bundles; returns the mean total loss and mean components."""
    cfg = model.cfg
    dtype = np.dtype(cfg.dtype)
    params = model.parameters()
    labels = np.array([b.label for b in bundles], dtype=np.int64)
    order = _epoch_order(labels, rng.fork("order"), cfg.class_aware_sampling)

    seen = 0
    total = 0.0
    sums: dict[str, float] = {}
    for idx in chunked(order, cfg.batch_size):
        batch = collate([bundles[int(i)] for i in idx], model.widths, dtype)
        step_rng = rng.fork("step")
        with Tape() as tape:
            out = model.forward(batch, training=True, rng=step_rng, labels=batch.labels)
            breakdown = model.loss(out, batch, alpha, epoch)
        grads = forward_backward(breakdown.total, tape)
        step_grads = {name: grads[p] for name, p in params.items() if p in grads}
        for name, grad in step_grads.items():
            if not np.all(np.isfinite(grad)):
                raise NonFiniteGradientError(name, epoch)
        adam_step(params, step_grads, adam)

        n = len(batch)
        seen += n
        for name, value in breakdown.as_floats().items():
            sums[name] = sums.get(name, 0.0) + value * n
        total += breakdown.total.item() * n
    return total / seen, {k: v / seen for k, v in sums.items()}


def run_training(
    train: Sequence[SampleRecord],
    val: Sequence[SampleRecord],
    cfg: TrainConfig,
    test: Sequence[SampleRecord] | None = None,
    log_path: str | os.PathLike | None = None,
    on_epoch: Callable[[EpochLog], None] | None = None,
) -> TrainResult:
    """Train with early stopping on validation loss and optional SWA.

    The final evaluation reports raw-final weights and, when SWA is on, the
    averaged weights, for the validation split and the test split if given.
    """
    cfg.validate()
    if not train or not val:
        raise DataError("training needs non-empty train and validation splits")
    everything = [*train, *val, *(test or [])]
    n_classes = cfg.num_classes or class_count(everything)

    train_b = build_bundles(train, cfg.similarity_threshold, cfg.descriptors)
    val_b = build_bundles(val, cfg.similarity_threshold, cfg.descriptors)
    test_b = build_bundles(test, cfg.similarity_threshold, cfg.descriptors) if test else []
    widths = modality_widths([*train_b, *val_b, *test_b])
    for b in (*train_b, *val_b, *test_b):
        if b.label >= n_classes:
            raise DataError(f"sample {b.sample_id}: label {b.label} outside [0, {n_classes})")

    rng = RngStream(cfg.seed)
    model = CameModel.init(cfg, widths, n_classes, rng.fork("init"))
    alpha = np.asarray(cfg.focal_alpha) if cfg.focal_alpha else inverse_frequency_alpha([b.label for b in train_b], n_classes)
    adam = AdamState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    swa = SwaState(start=cfg.swa_start) if cfg.is_enabled("swa") else None
    log.info(
        "Training on %d/%d samples, %d classes, modalities %s, ablated %s",
        len(train_b),
        len(val_b),
        n_classes,
        ",".join(m for m in cfg.active_modalities if m in widths) or "none",
        ",".join(cfg.ablate) or "none",
    )

    history: list[EpochLog] = []
    best = np.inf
    waited = 0
    stopped_early = False
    epoch = 0
    for epoch in range(cfg.max_epochs):
        adam.lr = lr_at_epoch(epoch, cfg)
        train_loss, components = train_epoch(model, train_b, adam, rng.fork(f"epoch{epoch}"), epoch, alpha)
        val_result = evaluate(model, val_b, cfg.batch_size, cfg.eval_workers, alpha=alpha, with_loss=True)

        if swa is not None and epoch >= swa.start:
            swa_average(swa, model.parameters())
        entry = EpochLog(
            epoch=epoch,
            lr=adam.lr,
            train_loss=train_loss,
            val_loss=val_result.loss,
            val_f1_macro=val_result.report.macro_f1,
            val_mcc=val_result.report.mcc,
            swa_active=swa is not None and swa.active,
            components=components,
        )
        history.append(entry)
        log.info(
            "epoch %d lr=%.3e train=%.4f val=%.4f f1=%.4f mcc=%.4f%s",
            epoch,
            entry.lr,
            entry.train_loss,
            entry.val_loss,
            entry.val_f1_macro,
            entry.val_mcc,
            " swa" if entry.swa_active else "",
        )
        if on_epoch is not None:
            on_epoch(entry)

        if val_result.loss < best:
            best, waited = val_result.loss, 0
        else:
            waited += 1
            if waited >= cfg.patience:
                log.info("Early stopping at epoch %d, best validation loss %.4f", epoch, best)
                stopped_early = True
                break

    if swa is not None and not swa.active:
        log.warning("Stopped before the SWA window (epoch %d); absorbing the final parameters once", swa.start)
        swa_average(swa, model.parameters())

    checkpoint = Checkpoint.capture(
        model, adam, epoch, swa=swa, rng=rng, extra={"best_val_loss": float(best), "stopped_early": stopped_early}
    )
    if log_path is not None:
        write_epoch_log(log_path, history)

    reports = {}
    variants = {"raw": model}
    if swa is not None:
        variants["swa"] = checkpoint.to_model(use_swa=True)
    for split, bundles in (("val", val_b), ("test", test_b)):
        if not bundles:
            continue
        for variant, m in variants.items():
            result: EvalResult = evaluate(m, bundles, cfg.batch_size, cfg.eval_workers)
            reports[f"{split}/{variant}"] = result.report

    primary = variants["swa" if swa is not None else "raw"]
    return TrainResult(checkpoint, history, primary, reports, stopped_early)
