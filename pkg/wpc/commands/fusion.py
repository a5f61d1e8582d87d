"""
Commandes de fusion: fuse, suite, breakdown, correlate
"""

import argparse
from typing import Dict, List, Optional, Tuple

import structlog

from ..exceptions import ParameterError, UndefinedCorrelationError
from ..models import Level, MetricFamily
from ..schemas import BreakdownNode, CorrelationReport, ImpactVector, KernelNoise, LevelEntry, MetricVector
from ..services.fusion import (
    average_impacts,
    breakdown_by_tags,
    breakdown_differential,
    build_breakdown_tree,
    correlation_matrix,
    dominant_level,
    impact_factors,
    kernel_noise_share,
    level_gap_ratios,
    normalized_mpki_breakdown,
    pearson,
)
from ..services.trace_io import load_trace
from . import FAMILY_CHOICES, CommandContext, output, parse_levels

logger = structlog.get_logger(__name__)

ALL_LEVELS = [Level.IR, Level.ISA, Level.UARCH]


def _parse_assignment(value: str) -> Tuple[Level, str]:
    """LEVEL=VALEUR"""
    level, sep, rest = value.partition("=")
    if not sep or not rest:
        raise argparse.ArgumentTypeError(f"Attendu NIVEAU=VALEUR: {value}")
    try:
        return Level(level.strip().upper()), rest
    except ValueError:
        raise argparse.ArgumentTypeError(f"Niveau inconnu: {level}")


def _metric_vector(
    args: argparse.Namespace, ctx: CommandContext, family: MetricFamily, workload: Optional[str] = None
) -> MetricVector:
    workload = workload or args.workload
    entries = []
    for level in sorted(args.levels, key=lambda lvl: lvl.code):
        metric = family.metric_for(level)
        observed = ctx.store.find(workload, level, metric, args.config)
        reference = ctx.store.find(args.reference, level, metric, args.reference_config)
        entries.append(LevelEntry(
            level=level,
            observed=observed.value if observed.defined else 0.0,
            reference=reference.value if reference.defined else 0.0,
            defined=observed.defined,
        ))
    return MetricVector(entries=entries, metric=family.value, workload_name=workload)


def _impact_report(args, vector: MetricVector, impacts: ImpactVector) -> dict:
    uarch = next((entry for entry in vector.entries if entry.level == Level.UARCH), None)
    mpki_table = None
    if uarch is not None:
        mpki_table = [row.model_dump(mode="json") for row in normalized_mpki_breakdown(impacts, uarch.observed)]
    return {
        "workload": args.workload,
        "metric": vector.metric,
        "reference": args.reference,
        "entries": [
            {**entry.model_dump(mode="json"), **impact.model_dump(mode="json")}
            for entry, impact in zip(vector.entries, impacts.entries)
        ],
        "dominant": dominant_level(impacts).value,
        "mpki": uarch.observed if uarch is not None else None,
        "mpki_table": mpki_table,
    }


def cmd_fuse(args: argparse.Namespace, ctx: CommandContext) -> int:
    """Facteurs d'impact normalisés d'une charge face à sa référence"""
    family = MetricFamily(args.metric)
    vector = _metric_vector(args, ctx, family)
    impacts = impact_factors(vector)
    result = _impact_report(args, vector, impacts)
    output(ctx, f"{args.workload}-{family.value}-impacts", result, rows=result["entries"],
           template="impacts.txt.j2", inputs={"command": "fuse", "levels": [lvl.value for lvl in args.levels]})
    return 0


def cmd_suite(args: argparse.Namespace, ctx: CommandContext) -> int:
    """Impacts moyens et écarts entre niveaux sur un ensemble de charges"""
    family = MetricFamily(args.metric)
    vectors = [_metric_vector(args, ctx, family, workload) for workload in args.workloads]
    impacts = [impact_factors(vector) for vector in vectors]
    average = average_impacts(impacts)

    rows = [
        {
            "workload": vector.workload_name,
            **{entry.level.value: entry.impact for entry in impact.entries},
            "dominant": dominant_level(impact).value,
        }
        for vector, impact in zip(vectors, impacts)
    ]
    result = {
        "metric": family.value,
        "reference": args.reference,
        "levels": [entry.level.value for entry in average.entries],
        "workloads": rows,
        "average": {entry.level.value: entry.impact for entry in average.entries},
        "average_dominant": dominant_level(average).value,
        "level_gaps": level_gap_ratios(vectors),
    }
    output(ctx, f"suite-{family.value}-impacts", result, rows=rows, template="suite.txt.j2",
           inputs={"command": "suite", "workloads": args.workloads})
    return 0


def _splits(args: argparse.Namespace, ctx: CommandContext, family: MetricFamily, impacts: ImpactVector):
    splits: Dict[Level, List[BreakdownNode]] = {}
    noise: Dict[Level, KernelNoise] = {}
    requested = [*(args.tags or []), *(args.differential or []), *(args.kernel or [])]
    for level, _ in requested:
        if level not in args.levels:
            raise ParameterError(f"Niveau {level.value} absent de --levels")

    for level, path in args.tags or []:
        if level in splits:
            raise ParameterError(f"Plusieurs décompositions pour le niveau {level.value}")
        splits[level] = breakdown_by_tags(load_trace(path), family.metric_for(level), impacts.impact_of(level))

    for level, option in args.differential or []:
        if level in splits:
            raise ParameterError(f"Plusieurs décompositions pour le niveau {level.value}")
        parts = option.split(":")
        if len(parts) not in (2, 3):
            raise ParameterError(f"Attendu COMPOSANT:CHARGE_ABLATÉE[:RÉSIDU]: {option}")
        component, ablated_workload = parts[0], parts[1]
        residual = parts[2] if len(parts) == 3 else "residual"
        metric = family.metric_for(level)
        full = ctx.store.find(args.workload, level, metric, args.config)
        ablated = ctx.store.find(ablated_workload, level, metric, args.config)
        splits[level] = list(breakdown_differential(full, ablated, impacts.impact_of(level), component, residual))

    for level, path in args.kernel or []:
        noise[level] = kernel_noise_share(load_trace(path), family.metric_for(level))
    return splits, noise


def cmd_breakdown(args: argparse.Namespace, ctx: CommandContext) -> int:
    """Arbre de décomposition par niveau puis par composant"""
    family = MetricFamily(args.metric)
    vector = _metric_vector(args, ctx, family)
    impacts = impact_factors(vector)
    splits, noise = _splits(args, ctx, family, impacts)
    tree = build_breakdown_tree(args.workload, impacts, splits, noise)

    payload = tree.model_dump(mode="json")
    rows = [{"component": leaf.name, "impact": leaf.impact, "method": leaf.method.value if leaf.method else None}
            for leaf in tree.leaves()]
    output(ctx, f"{args.workload}-{family.value}-breakdown", payload, rows=rows,
           template="breakdown.txt.j2", inputs={"command": "breakdown", "reference": args.reference})
    return 0


def _series(args: argparse.Namespace, ctx: CommandContext, family: MetricFamily, level: Level,
            config: Optional[str]) -> List[Optional[float]]:
    values = []
    for workload in args.workloads:
        observation = ctx.store.find(workload, level, family.metric_for(level), config)
        values.append(observation.value if observation.defined else None)
    return values


def cmd_correlate(args: argparse.Namespace, ctx: CommandContext) -> int:
    """Corrélation de Pearson entre niveaux sur un ensemble de charges"""
    family = MetricFamily(args.metric)
    if len(args.levels) < 2:
        raise ParameterError("Au moins deux niveaux sont nécessaires")
    configs = (args.configs or []) + [None] * len(args.levels)
    series = {
        level.value: _series(args, ctx, family, level, configs[position])
        for position, level in enumerate(args.levels)
    }

    # Les charges sans valeur définie à un niveau sont écartées
    keep = [i for i in range(len(args.workloads)) if all(values[i] is not None for values in series.values())]
    note = None
    if len(keep) < len(args.workloads):
        dropped = [args.workloads[i] for i in range(len(args.workloads)) if i not in keep]
        note = f"charges sans valeur définie écartées: {', '.join(dropped)}"
    filtered = {name: [values[i] for i in keep] for name, values in series.items()}

    if len(args.levels) == 2:
        xs, ys = filtered.values()
        r = None
        try:
            r = pearson(xs, ys)
        except (UndefinedCorrelationError, ParameterError) as e:
            note = "; ".join(filter(None, [note, e.detail]))
            logger.warning("correlation undefined", metric=family.value, detail=e.detail)
        report = CorrelationReport(
            metric=family.value,
            levels=args.levels,
            workloads=[args.workloads[i] for i in keep],
            xs=xs,
            ys=ys,
            r=r,
            note=note,
        )
        payload = report.model_dump(mode="json")
        rows = [{"workload": w, "x": x, "y": y} for w, x, y in zip(report.workloads, xs, ys)]
        output(ctx, f"correlation-{family.value}", payload, rows=rows, template="correlation.txt.j2",
               inputs={"command": "correlate"})
        return 0

    matrix, notes = correlation_matrix(filtered)
    payload = {
        "metric": family.value,
        "levels": [level.value for level in args.levels],
        "workloads": [args.workloads[i] for i in keep],
        "matrix": {row: {col: matrix.loc[row, col] for col in matrix.columns} for row in matrix.index},
        "notes": ([note] if note else []) + notes,
    }
    output(ctx, f"correlation-{family.value}", payload, rows=matrix.reset_index(names="level"),
           inputs={"command": "correlate"})
    return 0


def _add_fusion_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--workload", required=True)
    parser.add_argument("--reference", required=True, help="Charge de référence")
    parser.add_argument("--metric", choices=FAMILY_CHOICES, required=True)
    parser.add_argument("--levels", type=parse_levels, default=list(ALL_LEVELS))
    parser.add_argument("--config", help="Libellé de configuration de la charge")
    parser.add_argument("--reference-config", dest="reference_config")


def register(subparsers) -> None:
    parser = subparsers.add_parser("fuse", help="Facteurs d'impact normalisés")
    _add_fusion_arguments(parser)
    parser.set_defaults(handler=cmd_fuse)

    parser = subparsers.add_parser("suite", help="Impacts moyens sur un ensemble de charges")
    parser.add_argument("--workloads", type=lambda value: [w for w in value.split(",") if w], required=True)
    parser.add_argument("--reference", required=True, help="Charge de référence")
    parser.add_argument("--metric", choices=FAMILY_CHOICES, required=True)
    parser.add_argument("--levels", type=parse_levels, default=list(ALL_LEVELS))
    parser.add_argument("--config", help="Libellé de configuration des charges")
    parser.add_argument("--reference-config", dest="reference_config")
    parser.set_defaults(handler=cmd_suite)

    parser = subparsers.add_parser("breakdown", help="Décomposition par composant")
    _add_fusion_arguments(parser)
    parser.add_argument("--tags", type=_parse_assignment, action="append", help="NIVEAU=TRACE")
    parser.add_argument("--differential", type=_parse_assignment, action="append",
                        help="NIVEAU=COMPOSANT:CHARGE_ABLATÉE[:RÉSIDU]")
    parser.add_argument("--kernel", type=_parse_assignment, action="append", help="NIVEAU=TRACE")
    parser.set_defaults(handler=cmd_breakdown)

    parser = subparsers.add_parser("correlate", help="Corrélation de Pearson entre niveaux")
    parser.add_argument("--metric", choices=FAMILY_CHOICES, required=True)
    parser.add_argument("--levels", type=parse_levels, required=True)
    parser.add_argument("--workloads", type=lambda value: [w for w in value.split(",") if w], required=True)
    parser.add_argument("--configs", type=lambda value: [c or None for c in value.split(",")],
                        help="Libellé de configuration par niveau")
    parser.set_defaults(handler=cmd_correlate)
