import argparse
import json
import logging
import sys
from typing import List, Optional

from app import config
from app.commands import chain, decohere, dilate, lindblad, measure
from app.core.errors import InterventionError, OutputFailed

logger = logging.getLogger(__name__)

COMMANDS = [measure, chain, dilate, decohere, lindblad]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app.main",
        description="Quantum interventions: Kraus maps, dilations, decoherence and the Lindblad limit",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def report_failure(command: str, e: InterventionError) -> int:
    logger.error(f"❌ {command} failed: {e}")
    sys.stderr.write(json.dumps(e.to_dict()) + "\n")
    return e.exit_status


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except InterventionError as e:
        return report_failure(args.command, e)
    except OSError as e:
        return report_failure(args.command, OutputFailed(f"{e.filename or 'output'}: {e.strerror or e}"))


def main() -> None:
    logging.basicConfig(
        level=getattr(logging, config.LOG_LEVEL, logging.WARNING),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    sys.exit(run())


if __name__ == "__main__":
    main()
