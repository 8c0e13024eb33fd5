import argparse
import logging

from commands import add_data_arguments, load_splits, print_report
from dataset.manifest import class_count
from errors import DataError
from featurization.bundle import build_bundles
from training.checkpoint import load_checkpoint
from training.evaluate import EvalResult, evaluate, export_embeddings
from training.metrics import export_pr_curve
from utils.formatting import format_table_text

log = logging.getLogger(__name__)


def _evaluate(args: argparse.Namespace, with_embeddings: bool = False) -> tuple[str, EvalResult]:
    ckpt = load_checkpoint(args.checkpoint)
    cfg = ckpt.config
    parts = load_splits(args, cfg.seed)
    present = class_count(r for part in parts.values() for r in part)
    if present != ckpt.n_classes:
        raise DataError(f"checkpoint was trained for {ckpt.n_classes} classes, the dataset has {present}")
    records = parts[args.split]
    if not records:
        raise DataError(f"split {args.split!r} is empty")

    use_swa = cfg.is_enabled("swa") if args.weights == "primary" else args.weights == "swa"
    model = ckpt.to_model(use_swa=use_swa)
    bundles = build_bundles(records, cfg.similarity_threshold, cfg.descriptors)
    result = evaluate(model, bundles, cfg.batch_size, cfg.eval_workers, with_embeddings=with_embeddings)
    return ("swa" if use_swa else "raw"), result


async def eval_cmd(args: argparse.Namespace) -> int:
    variant, result = _evaluate(args)
    report = result.report
    print_report(f"{args.split}/{variant}", report)
    print(f"accuracy {report.accuracy:.4f} over {report.confusion.total} samples")
    rows = [
        [str(c), f"{p:.4f}", f"{r:.4f}", f"{f:.4f}"]
        for c, (p, r, f) in enumerate(zip(report.per_class.precision, report.per_class.recall, report.per_class.f1))
    ]
    print(format_table_text(("class", "precision", "recall", "f1"), rows))
    return 0


async def export_pr(args: argparse.Namespace) -> int:
    _, result = _evaluate(args)
    export_pr_curve(result.probabilities, result.labels, args.out)
    return 0


async def export_embeddings_cmd(args: argparse.Namespace) -> int:
    _, result = _evaluate(args, with_embeddings=True)
    export_embeddings(result, args.out)
    return 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--checkpoint", required=True)
    add_data_arguments(p)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument(
        "--weights",
        choices=("primary", "raw", "swa"),
        default="primary",
        help="primary means SWA weights when SWA was enabled",
    )


def setup(subparsers) -> None:
    p = subparsers.add_parser("eval", help="evaluate a checkpoint on one split")
    _common(p)
    p.set_defaults(handler=eval_cmd)

    p = subparsers.add_parser("export-pr", help="write the micro-averaged PR curve as CSV")
    _common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=export_pr)

    p = subparsers.add_parser("export-embeddings", help="write pooled expert-refined embeddings as CSV")
    _common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=export_embeddings_cmd)
