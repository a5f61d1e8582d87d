"""
Point d'entrée de la CLI wpc
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import structlog
from pydantic import ValidationError

from . import __version__
from .commands import CommandContext, explore, fusion, observe, pipeline, reference
from .config import DEFAULT_SEED, LOG_FORMAT, LOG_LEVEL, STORE_DIR, TOOL_NAME, configure_logging
from .database import get_store
from .exceptions import ParameterError, WPCError
from .services.report_generator import ReportGenerator

logger = structlog.get_logger(__name__)

COMMAND_GROUPS = (reference, observe, explore, fusion, pipeline)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description="Caractérisation de charge multi-niveaux: observation, référence, fusion, exploration",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--store", default=STORE_DIR, help="Répertoire du store de profils")
    parser.add_argument("--seed", type=int, help=f"Graine (défaut {DEFAULT_SEED})")
    parser.add_argument("--no-timestamp", action="store_true", dest="no_timestamp",
                        help="Omettre l'horodatage des rapports")
    parser.add_argument("--format", choices=["json", "csv", "text"], default="json", dest="fmt")
    parser.add_argument("--output-dir", dest="report_dir", help="Écrire aussi les rapports dans ce répertoire")
    parser.add_argument("--log-level", default=LOG_LEVEL)
    parser.add_argument("--log-format", choices=["console", "json"], default=LOG_FORMAT)

    subparsers = parser.add_subparsers(dest="command", required=True)
    for group in COMMAND_GROUPS:
        group.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level, args.log_format)

    ctx = CommandContext(
        store=get_store(args.store),
        reporter=ReportGenerator(timestamp=not args.no_timestamp),
        seed=args.seed if args.seed is not None else DEFAULT_SEED,
        fmt=args.fmt,
        output_dir=Path(args.report_dir) if args.report_dir else None,
        seed_given=args.seed is not None,
    )

    try:
        return args.handler(args, ctx)
    except WPCError as e:
        logger.error("command failed", command=args.command, error=e.detail, exit_code=e.exit_code)
        print(f"{TOOL_NAME}: erreur: {e.detail}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        logger.error("invalid parameters", command=args.command, error=str(e))
        print(f"{TOOL_NAME}: paramètres invalides: {e}", file=sys.stderr)
        return ParameterError.exit_code


if __name__ == "__main__":
    sys.exit(main())
