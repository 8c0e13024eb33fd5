import argparse
import logging
import pathlib

from config import MODALITIES
from dataset.manifest import load_manifest
from dataset.splits import DEFAULT_RATIOS, split_by_cluster
from dataset.synthetic import SyntheticSpec, generate_synthetic
from errors import ConfigError

log = logging.getLogger(__name__)


async def generate_data(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(
        n_classes=args.classes,
        samples_per_class=args.per_class,
        min_length=args.min_length,
        max_length=args.max_length,
        separation=args.separation,
        noise=args.noise,
        seed=args.seed,
        cluster_size=args.cluster_size,
        signal_modalities=tuple(args.signal or MODALITIES),
        dtype=args.dtype,
    )
    if args.embed_dim:
        spec.widths.update(esm=args.embed_dim, struct=args.embed_dim // 2 or 1, gcn=args.embed_dim // 2 or 1)
    try:
        records = generate_synthetic(spec, args.out, workers=args.workers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(f"{len(records)} samples written to {pathlib.Path(args.out) / 'manifest.jsonl'}")
    return 0


async def split(args: argparse.Namespace) -> int:
    records = load_manifest(args.manifest)
    assignment = split_by_cluster(records, ratios=tuple(args.ratios), seed=args.seed, strict=True)
    assignment.save(args.out)
    counts = {name: len(part) for name, part in assignment.partition(records).items()}
    print(" ".join(f"{name}={n}" for name, n in counts.items()))
    return 0


def setup(subparsers) -> None:
    p = subparsers.add_parser("generate-data", help="write a planted-structure synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--min-length", type=int, default=8)
    p.add_argument("--max-length", type=int, default=16)
    p.add_argument("--separation", type=float, default=5.0, help="norm of the class-mean vectors")
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cluster-size", type=int, default=4)
    p.add_argument("--signal", nargs="+", choices=MODALITIES, help="modalities carrying label signal")
    p.add_argument("--embed-dim", type=int, help="width of the esm slot (struct and gcn get half)")
    p.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(handler=generate_data)

    p = subparsers.add_parser("split", help="assign clusters to train/val/test")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="split JSON path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratios", type=float, nargs=3, default=list(DEFAULT_RATIOS), metavar=("TRAIN", "VAL", "TEST"))
    p.set_defaults(handler=split)
