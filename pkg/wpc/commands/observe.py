"""
Commandes d'observation: analyze, simulate, ingest
"""

import argparse

import structlog

from ..config import DEFAULT_PLATFORM
from ..exceptions import MissingDataError, WPCIOError
from ..models import LOCALITY_METRICS, MetricName
from ..schemas import CacheConfig, PredictorConfig, SimVariant
from ..services.locality import LocalityAnalyzer, iter_observations, mpki_from_counters
from ..services.trace_io import open_trace, read_counters
from ..services.uarch_sim import PLATFORM_PRESETS, config_sweep, relative_mpki_difference, resolve_platform
from . import CommandContext, output

logger = structlog.get_logger(__name__)


def _parse_metrics(value: str):
    try:
        return [MetricName(item.strip()) for item in value.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"Métriques invalides: {value} ({', '.join(metric.value for metric in LOCALITY_METRICS)})"
        )


def cmd_analyze(args: argparse.Namespace, ctx: CommandContext) -> int:
    """Mesurer la localité d'une trace et enregistrer les observations"""
    with open_trace(args.trace) as source:
        observations = iter_observations(LocalityAnalyzer(args.metrics, args.config).run(source).values())
    if args.workload:
        observations = [obs.model_copy(update={"workload_name": args.workload}) for obs in observations]
    ctx.store.put_many(observations)
    stored = [observation.model_dump(mode="json", by_alias=True) for observation in observations]

    output(ctx, "observations", stored, rows=stored, template="observations.txt.j2",
           inputs={"command": "analyze", "trace": str(args.trace)})
    if not any(observation["defined"] for observation in stored):
        raise MissingDataError("Aucune métrique définie sur cette trace")
    return 0


def _variants(args: argparse.Namespace):
    platforms = args.platform or [DEFAULT_PLATFORM]
    prefetch = {"on": [True], "off": [False], "both": [False, True]}[args.prefetch]
    variants = []
    for name in platforms:
        for enabled in prefetch:
            variant = resolve_platform(name, enabled)
            if args.l1i_kb or args.l1d_kb or args.assoc or args.bp_entries:
                variant = _override(variant, args)
            variants.append(variant)
    return variants


def _override(variant: SimVariant, args: argparse.Namespace) -> SimVariant:
    def cache(config: CacheConfig, kb):
        update = {}
        if kb:
            update["capacity_bytes"] = kb * 1024
        if args.assoc:
            update["associativity"] = args.assoc
        return CacheConfig(**{**config.model_dump(), **update})

    l1i = cache(variant.l1i, args.l1i_kb)
    l1d = cache(variant.l1d, args.l1d_kb)
    predictor = PredictorConfig(table_entries=args.bp_entries) if args.bp_entries else variant.predictor
    return SimVariant(
        label=f"L1I {l1i.label} / L1D {l1d.label} / BP {predictor.table_entries}",
        l1i=l1i, l1d=l1d, predictor=predictor,
    )


def cmd_simulate(args: argparse.Namespace, ctx: CommandContext) -> int:
    """Simuler la microarchitecture sur une trace"""
    variants = _variants(args)
    with open_trace(args.trace) as source:
        # Un TraceReader ne se lit qu'une fois
        trace = source.read_all() if hasattr(source, "read_all") else source
    table = config_sweep(trace, variants, max_workers=args.workers)

    rows = []
    for result in table.values():
        if args.workload:
            result = result.model_copy(update={"workload_name": args.workload})
        ctx.store.put_sim_result(result)
        ctx.store.put_many(result.to_observations())
        rows.append(result.model_dump(mode="json", by_alias=True))

    payload = rows[0] if len(rows) == 1 else {"results": rows}
    if len(rows) == 2:
        first, second = table.values()
        payload["relative_difference"] = relative_mpki_difference(first, second)
    output(ctx, "simulation", payload, rows=rows,
           template="simulation.txt.j2" if len(rows) == 1 else None,
           inputs={"command": "simulate", "trace": str(args.trace), "variants": [v.label for v in variants]})
    return 0


def cmd_ingest(args: argparse.Namespace, ctx: CommandContext) -> int:
    """Enregistrer des compteurs matériels comme observations UARCH"""
    try:
        with open(args.counters, "r", encoding="utf-8") as source:
            records = read_counters(source)
    except OSError as e:
        raise WPCIOError(f"Impossible de lire {args.counters}: {e}") from e
    observations = [observation for record in records for observation in mpki_from_counters(record)]
    ctx.store.put_many(observations)
    stored = [observation.model_dump(mode="json", by_alias=True) for observation in observations]
    output(ctx, "ingested", stored, rows=stored, template="observations.txt.j2",
           inputs={"command": "ingest", "counters": str(args.counters)})
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("analyze", help="Mesurer la localité d'une trace")
    parser.add_argument("trace", help="Trace binaire ou .jsonl")
    parser.add_argument("--metrics", type=_parse_metrics, default=list(LOCALITY_METRICS))
    parser.add_argument("--config", default="default", help="Libellé de configuration")
    parser.add_argument("--workload", help="Nom de charge (par défaut celui de la trace)")
    parser.set_defaults(handler=cmd_analyze)

    parser = subparsers.add_parser("simulate", help="Simuler caches et prédicteur")
    parser.add_argument("trace")
    parser.add_argument("--platform", action="append",
                        help=f"Préréglage, répétable ({', '.join(sorted(PLATFORM_PRESETS))})")
    parser.add_argument("--prefetch", choices=["on", "off", "both"], default="off")
    parser.add_argument("--l1i-kb", type=int, dest="l1i_kb")
    parser.add_argument("--l1d-kb", type=int, dest="l1d_kb")
    parser.add_argument("--assoc", type=int)
    parser.add_argument("--bp-entries", type=int, dest="bp_entries")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--workload")
    parser.set_defaults(handler=cmd_simulate)

    parser = subparsers.add_parser("ingest", help="Ingérer un CSV de compteurs")
    parser.add_argument("--counters", required=True)
    parser.set_defaults(handler=cmd_ingest)
