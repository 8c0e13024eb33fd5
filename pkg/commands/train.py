import argparse
import dataclasses
import json
import logging

import config
from commands import add_config_arguments, add_data_arguments, ensure_dir, load_config, load_splits, print_report
from config import ABLATION_FLAGS, ABLATION_LABELS, TrainConfig
from database import Database
from dataset.balance import STRATEGIES, balance_classes
from dataset.manifest import SampleRecord
from errors import UsageError
from numeric.rng import RngStream
from training.checkpoint import save_checkpoint
from training.trainer import TrainResult, run_training
from utils.formatting import METRIC_COLUMNS, format_metrics_table, format_table_text, write_csv

log = logging.getLogger(__name__)


def ablation_label(flags) -> str:
    if not flags:
        return ABLATION_LABELS["full"]
    return ", ".join(ABLATION_LABELS[f] for f in flags)


def _training_split(parts: dict[str, list[SampleRecord]], cfg: TrainConfig, balance: str) -> list[SampleRecord]:
    records = parts["train"]
    if balance == "none":
        return records
    jitter = cfg.augmentation_sigma if balance == "oversample" else 0.0
    return balance_classes(records, balance, RngStream(cfg.seed).fork("balance"), jitter_sigma=jitter)


async def _record(db: Database, run_id: int, result: TrainResult) -> None:
    for entry in result.history:
        await db.log_epoch(run_id, entry)
    for key, report in result.reports.items():
        split, variant = key.split("/")
        await db.store_metrics(run_id, split, variant, report.summary())


def _metrics_rows(result: TrainResult) -> list[list]:
    rows = []
    for key, report in sorted(result.reports.items()):
        split, variant = key.split("/")
        summary = report.summary()
        rows.append([split, variant, *("" if summary[c] is None else repr(summary[c]) for c in METRIC_COLUMNS)])
    return rows


async def _run(db: Database, command: str, cfg: TrainConfig, parts, balance: str, log_path=None) -> tuple[int, TrainResult]:
    run_id = await db.create_run(command, cfg.to_dict(), label=ablation_label(cfg.ablate))
    log.info("Run %d: %s, active modalities %s", run_id, ablation_label(cfg.ablate), ",".join(cfg.active_modalities))
    try:
        result = run_training(
            _training_split(parts, cfg, balance),
            parts["val"],
            cfg,
            test=parts["test"] or None,
            log_path=log_path,
        )
    except Exception:
        await db.finish_run(run_id, "failed")
        raise
    await _record(db, run_id, result)
    return run_id, result


async def train(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    parts = load_splits(args, cfg.seed)
    out = ensure_dir(args.out)

    async with Database(args.database) as db:
        run_id, result = await _run(db, "train", cfg, parts, args.balance, log_path=out / "epochs.csv")
        checkpoint_path = out / "checkpoint.camc"
        save_checkpoint(checkpoint_path, result.checkpoint)
        await db.finish_run(run_id, "ok", str(checkpoint_path))

    write_csv(out / "metrics.csv", ("split", "weights", *METRIC_COLUMNS), _metrics_rows(result))
    run_info = {
        "run_id": run_id,
        "label": ablation_label(cfg.ablate),
        "ablate": list(cfg.ablate),
        "modalities": {m: m in cfg.active_modalities for m in config.MODALITIES},
        "epochs_run": len(result.history),
        "stopped_early": result.stopped_early,
        "primary_weights": result.primary_variant,
        "config": cfg.to_dict(),
    }
    (out / "run.json").write_text(json.dumps(run_info, indent=2, sort_keys=True) + "\n")
    for key, report in sorted(result.reports.items()):
        print_report(key, report)
    return 0


async def ablate(args: argparse.Namespace) -> int:
    """Full model plus one row per removed component, averaged over seeds."""
    if args.seeds < 1:
        raise UsageError(f"--seeds must be at least 1, got {args.seeds}")
    base = load_config(args)
    parts = load_splits(args, base.seed)
    out = ensure_dir(args.out)
    settings = ["full", *(args.components or ABLATION_FLAGS)]

    rows: dict[str, list[dict]] = {}
    async with Database(args.database) as db:
        for setting in settings:
            label = ABLATION_LABELS[setting]
            for offset in range(args.seeds):
                cfg = dataclasses.replace(base, seed=base.seed + offset)
                if setting != "full":
                    cfg = cfg.with_ablations(setting)
                run_id, result = await _run(db, "ablate", cfg, parts, args.balance)
                await db.finish_run(run_id, "ok")
                split = "test" if parts["test"] else "val"
                rows.setdefault(label, []).append(result.report(split).summary())

    table = format_metrics_table(rows)
    header = ("setting", *METRIC_COLUMNS)
    write_csv(out / "ablation.csv", header, table)
    print(format_table_text(header, table))
    return 0


def setup(subparsers) -> None:
    p = subparsers.add_parser("train", help="train one configuration")
    add_data_arguments(p)
    add_config_arguments(p)
    p.add_argument("--balance", choices=("none", *STRATEGIES), default="none")
    p.add_argument("--database", default=config.DATABASE_PATH, help="run registry path")
    p.set_defaults(handler=train)

    p = subparsers.add_parser("ablate", help="run the ablation table")
    add_data_arguments(p)
    add_config_arguments(p)
    p.add_argument("--components", nargs="+", choices=ABLATION_FLAGS, help="rows to run (default: all)")
    p.add_argument("--seeds", type=int, default=3, help="seeds per row")
    p.add_argument("--balance", choices=("none", *STRATEGIES), default="none")
    p.add_argument("--database", default=config.DATABASE_PATH, help="run registry path")
    p.set_defaults(handler=ablate)
