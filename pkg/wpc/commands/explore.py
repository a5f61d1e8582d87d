"""
Commande d'exploration: sweep
"""

import argparse

from ..config import DEFAULT_PLATFORM
from ..exceptions import ParameterError
from ..services.uarch_sim import DEFAULT_THETA, MIN_SWEEP_POINTS, resolve_platform, sweep_parameter
from . import CommandContext, add_generator_arguments, generator_config, output, parse_int_list


def cmd_sweep(args: argparse.Namespace, ctx: CommandContext) -> int:
    """Balayer X et détecter le coude du working set"""
    if len(args.xs) < MIN_SWEEP_POINTS:
        raise ParameterError(f"Au moins {MIN_SWEEP_POINTS} points de balayage sont nécessaires (reçu {len(args.xs)})")
    base = generator_config(args, ctx, x=args.xs[0])
    variant = resolve_platform(args.platform or DEFAULT_PLATFORM, args.prefetch == "on")
    rows, knee = sweep_parameter(base, args.xs, variant, theta=args.theta, store=ctx.store)

    table = [row.model_dump(mode="json") for row in rows]
    result = {
        "kind": base.workload_kind.value,
        "config": variant.label,
        "knee": knee.model_dump(mode="json"),
        "points": table,
    }
    output(
        ctx,
        f"sweep-{args.kind}-{variant.label}",
        result,
        rows=table,
        template="sweep.txt.j2",
        inputs={"command": "sweep", "base": base.model_dump(mode="json"), "xs": args.xs},
    )
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("sweep", help="Balayer X sur une plateforme")
    add_generator_arguments(parser, with_x=False)
    parser.add_argument("--xs", type=parse_int_list, required=True, help="Valeurs de X croissantes")
    parser.add_argument("--platform")
    parser.add_argument("--prefetch", choices=["on", "off"], default="off")
    parser.add_argument("--theta", type=float, default=DEFAULT_THETA)
    parser.set_defaults(handler=cmd_sweep)
