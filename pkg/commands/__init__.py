"""Subcommand modules; each exposes ``setup(subparsers)`` and registers async handlers."""

from __future__ import annotations

import argparse
import logging
import pathlib

import config
from config import ABLATION_FLAGS, TrainConfig
from dataset.manifest import SampleRecord, load_manifest
from dataset.splits import SplitAssignment, split_by_cluster
from training.metrics import MetricsReport
from utils.formatting import METRIC_COLUMNS, format_table_text

log = logging.getLogger(__name__)


def add_data_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", required=True, help="dataset manifest (JSON lines)")
    parser.add_argument("--splits", help="cluster split JSON; computed from the seed when omitted")


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat JSON file with TrainConfig fields")
    parser.add_argument("--ablate", action="append", default=[], choices=ABLATION_FLAGS, help="remove a component")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--epochs", type=int, help="override max_epochs")
    parser.add_argument("--out", default=config.OUTPUT_DIR, help="output directory")


def load_config(args: argparse.Namespace) -> TrainConfig:
    cfg = TrainConfig.from_json(args.config) if args.config else TrainConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.epochs is not None:
        overrides["max_epochs"] = args.epochs
    if overrides:
        data = cfg.to_dict()
        data.update(overrides)
        cfg = TrainConfig.from_dict(data)
    return cfg.with_ablations(*args.ablate).validate()


def load_splits(args: argparse.Namespace, seed: int = 0) -> dict[str, list[SampleRecord]]:
    records = load_manifest(args.manifest)
    if args.splits:
        assignment = SplitAssignment.load(args.splits)
    else:
        assignment = split_by_cluster(records, seed=seed, strict=True)
    return assignment.partition(records)


def print_report(title: str, report: MetricsReport) -> None:
    summary = report.summary()
    rows = [[title, *("n/a" if summary[c] is None else f"{summary[c]:.4f}" for c in METRIC_COLUMNS)]]
    print(format_table_text(("", *METRIC_COLUMNS), rows))


def ensure_dir(path) -> pathlib.Path:
    path = pathlib.Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
