import argparse
import asyncio
import importlib
import logging
import sys

import config
from errors import CameError, UsageError

log = logging.getLogger("came")

EXTENSIONS = [
    "commands.data",
    "commands.train",
    "commands.evaluate",
    "commands.diagnostics",
]


class ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors as ``UsageError`` instead of exiting with status 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="came",
        description="Multimodal antibody binding-site classifier: data, training, evaluation",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for ext in EXTENSIONS:
        importlib.import_module(ext).setup(subparsers)
        log.debug("Loaded command module: %s", ext)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=getattr(logging, config.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )
    try:
        args = build_parser().parse_args(argv)
        return asyncio.run(args.handler(args)) or 0
    except CameError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except Exception:
        log.exception("Unhandled error")
        return 4


if __name__ == "__main__":
    sys.exit(main())
