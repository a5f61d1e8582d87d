"""
Commandes des charges de référence: gen-ref, calibrate
"""

import argparse
from pathlib import Path

import structlog

from ..database import atomic_write_text
from ..exceptions import MissingDataError
from ..services.refgen import (
    CALIBRATION_THRESHOLD,
    average_relative_error,
    calibrate_x,
    expected_measurement,
    generate,
    theoretical_prediction,
)
from ..services.trace_io import save_trace
from . import CommandContext, add_generator_arguments, generator_config, output, parse_int_list, workload_kind

logger = structlog.get_logger(__name__)


def cmd_gen_ref(args: argparse.Namespace, ctx: CommandContext) -> int:
    """Générer une charge de référence et son fichier compagnon"""
    cfg = generator_config(args, ctx)
    trace = generate(cfg)
    destination = Path(args.output)
    size = save_trace(trace, destination)

    result = {
        "workload": cfg.workload_name,
        "config": cfg.model_dump(mode="json"),
        "events": len(trace),
        "bytes": size,
        "prediction": theoretical_prediction(cfg),
        "expected": expected_measurement(cfg),
        "trace": destination.name,
    }
    sidecar = destination.with_name(destination.name + ".json")
    atomic_write_text(sidecar, ctx.reporter.render_json(result, inputs={"command": "gen-ref"}))
    logger.info("reference trace written", path=str(destination), events=len(trace), bytes=size)
    output(ctx, f"{cfg.workload_name}-reference", result, template="reference.txt.j2", inputs={"command": "gen-ref"})
    return 0


def cmd_calibrate(args: argparse.Namespace, ctx: CommandContext) -> int:
    """Choisir X par la règle des 2 %"""
    base = generator_config(args, ctx, x=args.candidates[0] if args.candidates else 1)
    result = calibrate_x(
        workload_kind(args.kind),
        args.candidates,
        iterations=base.iterations,
        seed=base.seed,
        base=base,
        repeats=args.repeats,
        threshold=args.threshold,
    )
    payload = result.model_dump(mode="json")
    payload["average_error"] = average_relative_error(result.rows)
    if result.calibrated:
        payload["average_error_retained"] = average_relative_error(result.rows, min_x=result.chosen_x)
    output(
        ctx,
        f"calibration-{args.kind}",
        payload,
        rows=payload["rows"],
        template="calibration.txt.j2",
        inputs={"command": "calibrate", "base": base.model_dump(mode="json")},
    )
    if not result.calibrated:
        raise MissingDataError(f"Aucun candidat sous le seuil de {args.threshold:.0%}")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("gen-ref", help="Générer une charge de référence")
    add_generator_arguments(parser)
    parser.add_argument("-o", "--output", required=True, help="Fichier de trace (.wpc ou .jsonl)")
    parser.set_defaults(handler=cmd_gen_ref)

    parser = subparsers.add_parser("calibrate", help="Calibrer le paramètre X")
    add_generator_arguments(parser, with_x=False)
    parser.add_argument("--candidates", type=parse_int_list, required=True, help="X candidats croissants")
    parser.add_argument("--repeats", type=int, default=1, help="Graines par candidat")
    parser.add_argument("--threshold", type=float, default=CALIBRATION_THRESHOLD)
    parser.set_defaults(handler=cmd_calibrate)
