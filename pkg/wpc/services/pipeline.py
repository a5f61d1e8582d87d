"""
Service d'orchestration d'une passe complète observation -> référence -> fusion -> exploration
"""

from pathlib import Path
from typing import Dict, List, Optional

import structlog

from ..database import ProfileStore
from ..exceptions import MissingDataError, ParameterError, WPCIOError
from ..models import Level, MetricFamily
from ..schemas import (
    CounterRecord,
    GeneratorConfig,
    ImpactVector,
    LevelEntry,
    MetricObservation,
    MetricVector,
    PipelineConfig,
    SimResult,
)
from .fusion import dominant_level, impact_factors, normalized_mpki_breakdown
from .locality import LocalityAnalyzer, mpki_from_counters
from .refgen import generate
from .report_generator import ReportGenerator
from .trace_io import open_trace, read_counters
from .uarch_sim import resolve_platform, simulate_variant

logger = structlog.get_logger(__name__)


def _uarch_observations(cfg: PipelineConfig, store: ProfileStore) -> List[MetricObservation]:
    """MPKI de la charge cible: compteurs ingérés sinon simulation de la trace la plus basse"""
    if cfg.counters_path:
        try:
            with open(cfg.counters_path, "r", encoding="utf-8") as source:
                records: List[CounterRecord] = read_counters(source)
        except OSError as e:
            raise WPCIOError(f"Impossible de lire {cfg.counters_path}: {e}") from e
        matching = [record for record in records if record.workload_name == cfg.workload_name]
        if not matching:
            key = (cfg.workload_name, Level.UARCH.value, "*", "*")
            raise MissingDataError(f"Aucun compteur pour {cfg.workload_name}", key=key)
        return mpki_from_counters(matching[0])

    level = max(cfg.target_traces, key=lambda lvl: lvl.code)
    variant = resolve_platform(cfg.platform, cfg.prefetch)
    with open_trace(cfg.target_traces[level]) as source:
        result = simulate_variant(source, variant)
    result = result.model_copy(update={"workload_name": cfg.workload_name})
    store.put_sim_result(result)
    return result.to_observations()


def run_pipeline(
    cfg: PipelineConfig,
    store: ProfileStore,
    reporter: Optional[ReportGenerator] = None,
) -> Dict[str, ImpactVector]:
    """Exécuter une passe complète; retourne un ImpactVector par famille de métriques"""
    levels = sorted(set(cfg.target_traces) | {Level.UARCH}, key=lambda level: level.code)
    variant = resolve_platform(cfg.platform, cfg.prefetch)
    logger.info(
        "pipeline started",
        workload=cfg.workload_name,
        levels=[level.value for level in levels],
        families=sorted(cfg.references),
    )

    # Observation: niveaux de trace
    observed: Dict[tuple, MetricObservation] = {}
    for level, path in sorted(cfg.target_traces.items(), key=lambda item: item[0].code):
        metrics = [MetricFamily(family).metric_for(level) for family in cfg.references]
        with open_trace(path) as source:
            results = LocalityAnalyzer(metrics).run(source)
        for metric, observation in results.items():
            observed[(level, metric)] = observation.model_copy(update={"workload_name": cfg.workload_name})

    for observation in _uarch_observations(cfg, store):
        observed[(Level.UARCH, observation.metric)] = observation
    store.put_many(observed.values())

    # Référence puis fusion, famille par famille
    impacts: Dict[str, ImpactVector] = {}
    for family_key, reference_cfg in sorted(cfg.references.items()):
        family = MetricFamily(family_key)
        if reference_cfg.workload_kind != family.workload_kind:
            raise ParameterError(
                f"La référence {family.value} doit être de type {family.workload_kind.value}"
            )
        entries = []
        for level in levels:
            metric = family.metric_for(level)
            reference = _reference_value(reference_cfg, family, level, variant, store)
            observation = observed[(level, metric)]
            entries.append(LevelEntry(
                level=level,
                observed=observation.value if observation.defined else 0.0,
                reference=reference.value if reference.defined else 0.0,
                defined=observation.defined,
            ))
        vector = MetricVector(entries=entries, metric=family.value, workload_name=cfg.workload_name)
        impacts[family.value] = impact_factors(vector)

        if reporter is not None:
            uarch_entry = entries[-1]
            result = {
                "workload": cfg.workload_name,
                "metric": family.value,
                "reference": reference_cfg.workload_name,
                "entries": [
                    {**entry.model_dump(mode="json"), **impact.model_dump(mode="json")}
                    for entry, impact in zip(entries, impacts[family.value].entries)
                ],
                "dominant": dominant_level(impacts[family.value]).value,
                "mpki": uarch_entry.observed,
                "mpki_table": [
                    row.model_dump(mode="json")
                    for row in normalized_mpki_breakdown(impacts[family.value], uarch_entry.observed)
                ],
            }
            reporter.emit(
                f"{cfg.workload_name}-{family.value}-impacts",
                cfg.formats,
                result,
                rows=result["entries"],
                template="impacts.txt.j2",
                inputs={"pipeline": cfg.model_dump(mode="json")},
            )

    logger.info(
        "pipeline done",
        workload=cfg.workload_name,
        impacts={
            family: {entry.level.value: round(entry.impact, 4) for entry in vector.entries}
            for family, vector in impacts.items()
        },
    )
    return impacts


def _reference_value(
    reference_cfg: GeneratorConfig,
    family: MetricFamily,
    level: Level,
    variant,
    store: ProfileStore,
) -> MetricObservation:
    """Valeur S_i de la charge de référence au niveau demandé"""
    metric = family.metric_for(level)
    if level == Level.UARCH:
        trace = generate(reference_cfg.model_copy(update={"level": Level.ISA}))
        result: SimResult = simulate_variant(trace, variant)
        observation = next(obs for obs in result.to_observations() if obs.metric == metric)
    else:
        trace = generate(reference_cfg.model_copy(update={"level": level}))
        observation = LocalityAnalyzer([metric]).run(trace)[metric]
    store.put(observation)
    return observation


def load_pipeline_config(path) -> PipelineConfig:
    """Lire une configuration de pipeline JSON (clés = noms des champs)"""
    path = Path(path)
    try:
        content = path.read_text(encoding="utf-8")
    except OSError as e:
        raise WPCIOError(f"Impossible de lire {path}: {e}") from e
    return PipelineConfig.model_validate_json(content)
