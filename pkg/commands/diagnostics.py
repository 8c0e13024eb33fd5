import argparse
import logging

import config
from checks import run_gradcheck_suite
from database import Database
from utils.formatting import METRIC_COLUMNS, format_table_text

log = logging.getLogger(__name__)


async def gradcheck(args: argparse.Namespace) -> int:
    reports = run_gradcheck_suite(seed=args.seed, trials=args.trials)
    for report in reports:
        if args.verbose or not report.passed:
            print(report.summary())
    failed = [r for r in reports if not r.passed]
    print(f"{len(reports) - len(failed)}/{len(reports)} gradient checks passed")
    if failed:
        failed[0].raise_for_failure()
    return 0


async def runs(args: argparse.Namespace) -> int:
    async with Database(args.database) as db:
        if args.run is not None:
            metrics = await db.get_run_metrics(args.run)
            rows = [
                [key, *(("n/a" if v.get(c) is None else f"{v[c]:.4f}") for c in METRIC_COLUMNS)]
                for key, v in sorted(metrics.items())
            ]
            print(format_table_text(("split/weights", *METRIC_COLUMNS), rows))
            return 0
        entries = await db.list_runs(args.limit)
    rows = [
        [str(r["id"]), r["command"], r["label"] or "-", str(r["seed"]), r["ablate"] or "-", r["status"], r["started_at"]]
        for r in entries
    ]
    print(format_table_text(("id", "command", "label", "seed", "ablate", "status", "started"), rows))
    return 0


def setup(subparsers) -> None:
    p = subparsers.add_parser("gradcheck", help="run the gradient check suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("-v", "--verbose", action="store_true", help="print every case")
    p.set_defaults(handler=gradcheck)

    p = subparsers.add_parser("runs", help="list registered training runs")
    p.add_argument("--database", default=config.DATABASE_PATH)
    p.add_argument("--limit", type=int, default=20)
    p.add_argument("--run", type=int, help="show the final metrics of one run")
    p.set_defaults(handler=runs)
