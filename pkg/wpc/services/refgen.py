"""
Service de génération des charges de référence standard
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from ..exceptions import ParameterError
from ..models import EVENT_DTYPE, FLAG_TAKEN, UNTAGGED, EventKind, Level, MetricName, Trace, WorkloadKind
from ..schemas import CalibrationResult, CalibrationRow, GeneratorConfig, is_power_of_two
from .locality import LocalityAnalyzer
from .rng import SplitMix64

logger = structlog.get_logger(__name__)

# Disposition des adresses
DATA_BASE = 0x1000_0000
CODE_BASE = 0x40_0000
HARNESS_BASE = CODE_BASE - 256
STACK_BASE = 0x7FFF_0000
BRANCH_TARGET = CODE_BASE + 0x100
INSTRUCTION_BYTES = 4
LINE_BYTES = 64

CALIBRATION_THRESHOLD = 0.02


def harness_base(cfg: GeneratorConfig) -> int:
    """Première adresse des instructions de boucle.

    La zone contient h instructions puis harness_mem instructions d'accès.
    Elle commence à CODE_BASE - 256 et descend par lignes entières quand
    h + harness_mem ne tient pas dans ces 256 octets.
    """
    span = INSTRUCTION_BYTES * (cfg.h + cfg.harness_mem)
    return min(HARNESS_BASE, (CODE_BASE - span) & ~(LINE_BYTES - 1))


def function_span(cfg: GeneratorConfig) -> int:
    """Écart effectif entre points d'entrée: function_stride doublé jusqu'à contenir b instructions"""
    span = cfg.function_stride
    while span < INSTRUCTION_BYTES * cfg.b:
        span *= 2
    return span


def check_config(cfg: GeneratorConfig, expected: Optional[WorkloadKind] = None) -> None:
    """Vérifier les invariants propres au type de charge"""
    if expected is not None and cfg.workload_kind != expected:
        raise ParameterError(f"Type de charge attendu {expected.value}, reçu {cfg.workload_kind.value}")
    if cfg.workload_kind == WorkloadKind.BRANCH:
        if cfg.x > cfg.m:
            raise ParameterError(f"x={cfg.x} dépasse m={cfg.m}")
    elif cfg.x < 1:
        raise ParameterError(f"x doit être >= 1 (reçu {cfg.x})")
    if not is_power_of_two(cfg.element_stride):
        raise ParameterError("element_stride doit être une puissance de deux")
    if not is_power_of_two(cfg.function_stride):
        raise ParameterError("function_stride doit être une puissance de deux")
    if cfg.level == Level.UARCH:
        raise ParameterError("Les charges de référence sont produites aux niveaux IR ou ISA")
    if INSTRUCTION_BYTES * (cfg.h + cfg.harness_mem) > CODE_BASE:
        raise ParameterError(f"h + harness_mem dépasse la zone de code sous {CODE_BASE:#x}")


def _harness_block(cfg: GeneratorConfig, body: int) -> np.ndarray:
    """Tableau (itérations, h + body) pré-rempli avec les instructions de boucle"""
    events = np.zeros(cfg.iterations * (cfg.h + body), dtype=EVENT_DTYPE)
    grid = events.reshape(cfg.iterations, cfg.h + body)
    base = harness_base(cfg)
    for j in range(cfg.h):
        grid["instr_addr"][:, j] = base + INSTRUCTION_BYTES * j
    return events


def _trace(cfg: GeneratorConfig, events: np.ndarray) -> Trace:
    trace = Trace(cfg.level, cfg.workload_name, (UNTAGGED,), events, cfg.seed)
    logger.info(
        "reference workload generated",
        kind=cfg.workload_kind.value,
        x=cfg.x,
        iterations=cfg.iterations,
        events=len(trace),
        seed=cfg.seed,
    )
    return trace


def generate_data_locality(cfg: GeneratorConfig) -> Trace:
    """Accès aléatoires uniformes à un tableau de x éléments"""
    check_config(cfg, WorkloadKind.DATA)
    k = cfg.harness_mem
    events = _harness_block(cfg, k + 1)
    grid = events.reshape(cfg.iterations, cfg.h + k + 1)

    # Accès de boucle (compteur non promu en registre)
    for j in range(k):
        column = cfg.h + j
        grid["kind"][:, column] = EventKind.LOAD if j % 2 == 0 else EventKind.STORE
        grid["instr_addr"][:, column] = harness_base(cfg) + INSTRUCTION_BYTES * column
        grid["data_addr"][:, column] = STACK_BASE + 8 * j

    u = SplitMix64(cfg.seed).uniform_below(cfg.x, cfg.iterations)
    last = cfg.h + k
    grid["kind"][:, last] = EventKind.LOAD
    grid["instr_addr"][:, last] = CODE_BASE
    grid["data_addr"][:, last] = np.uint64(DATA_BASE) + np.uint64(cfg.element_stride) * u
    return _trace(cfg, events)


def generate_instruction_locality(cfg: GeneratorConfig) -> Trace:
    """Appels aléatoires parmi x fonctions de b instructions"""
    check_config(cfg, WorkloadKind.INSTRUCTION)
    events = _harness_block(cfg, cfg.b)
    grid = events.reshape(cfg.iterations, cfg.h + cfg.b)

    u = SplitMix64(cfg.seed).uniform_below(cfg.x, cfg.iterations)
    entries = np.uint64(CODE_BASE) + np.uint64(function_span(cfg)) * u
    for j in range(cfg.b):
        grid["instr_addr"][:, cfg.h + j] = entries + np.uint64(INSTRUCTION_BYTES * j)
    return _trace(cfg, events)


def generate_branch_locality(cfg: GeneratorConfig) -> Trace:
    """Un branchement statique pris si r < x, r uniforme dans [0, m)"""
    check_config(cfg, WorkloadKind.BRANCH)
    events = _harness_block(cfg, 1)
    grid = events.reshape(cfg.iterations, cfg.h + 1)

    r = SplitMix64(cfg.seed).uniform_below(cfg.m, cfg.iterations)
    grid["kind"][:, cfg.h] = EventKind.BRANCH
    grid["instr_addr"][:, cfg.h] = CODE_BASE
    grid["data_addr"][:, cfg.h] = BRANCH_TARGET
    grid["flags"][:, cfg.h] = np.where(r < np.uint64(cfg.x), FLAG_TAKEN, 0).astype(np.uint8)
    return _trace(cfg, events)


GENERATORS: Dict[WorkloadKind, Callable[[GeneratorConfig], Trace]] = {
    WorkloadKind.DATA: generate_data_locality,
    WorkloadKind.INSTRUCTION: generate_instruction_locality,
    WorkloadKind.BRANCH: generate_branch_locality,
}

METRICS: Dict[WorkloadKind, MetricName] = {
    WorkloadKind.DATA: MetricName.DATA_REUSE_DIST,
    WorkloadKind.INSTRUCTION: MetricName.INSTR_REUSE_DIST,
    WorkloadKind.BRANCH: MetricName.BRANCH_ENTROPY,
}


def generate(cfg: GeneratorConfig) -> Trace:
    return GENERATORS[cfg.workload_kind](cfg)


def theoretical_prediction(cfg: GeneratorConfig) -> float:
    """Prédiction théorique de la métrique de localité"""
    check_config(cfg)
    if cfg.workload_kind == WorkloadKind.DATA:
        return float(cfg.x)
    if cfg.workload_kind == WorkloadKind.INSTRUCTION:
        return float(cfg.x * cfg.b)
    ratio = cfg.x / cfg.m
    return 2.0 * min(ratio, 1.0 - ratio)


def expected_measurement(cfg: GeneratorConfig) -> float:
    """Valeur mesurée attendue, corrections de boucle incluses (n infini)"""
    base = theoretical_prediction(cfg)
    if cfg.workload_kind == WorkloadKind.INSTRUCTION:
        return base + cfg.h
    if cfg.workload_kind == WorkloadKind.DATA:
        return base + cfg.harness_mem
    return base


def _censored_gap_stats(x: int, n: int) -> Tuple[float, float]:
    """Nombre et somme attendus des écarts (en itérations) pour une valeur tirée
    uniformément parmi x à chaque itération, sur n itérations (premières
    occurrences exclues), cumulés sur les x valeurs"""
    q = 1.0 - 1.0 / x
    d = np.arange(1, n, dtype=np.float64)
    weights = (n - d) * np.power(q, d - 1) / x
    return float(weights.sum()), float((weights * d).sum())


def finite_horizon_prediction(cfg: GeneratorConfig) -> float:
    """Distance de réutilisation attendue pour n itérations finies"""
    check_config(cfg)
    n = cfg.iterations
    if cfg.workload_kind == WorkloadKind.BRANCH:
        return theoretical_prediction(cfg)
    count, total = _censored_gap_stats(cfg.x, n)
    if cfg.workload_kind == WorkloadKind.DATA:
        k = cfg.harness_mem
        stride = k + 1
        gap_count = k * (n - 1) + count
        gap_sum = k * (n - 1) * stride + stride * total
    else:
        stride = cfg.h + cfg.b
        gap_count = cfg.h * (n - 1) + cfg.b * count
        gap_sum = cfg.h * (n - 1) * stride + cfg.b * stride * total
    if gap_count == 0:
        return float("nan")
    return gap_sum / gap_count


def relative_error(measured: float, predicted: float) -> float:
    if predicted == 0:
        return 0.0 if measured == 0 else float("inf")
    return abs(measured - predicted) / abs(predicted)


def average_relative_error(rows: Sequence[CalibrationRow], min_x: int = 0) -> Optional[float]:
    """Erreur relative moyenne sur les lignes x >= min_x"""
    errors = [row.relative_error for row in rows if row.x >= min_x and row.relative_error is not None]
    if not errors:
        return None
    return float(np.mean(errors))


def measure(trace: Trace, kind: WorkloadKind) -> Optional[float]:
    """Mesurer la métrique de localité associée au type de charge"""
    analyzer = LocalityAnalyzer([METRICS[kind]])
    observation = analyzer.run(trace)[METRICS[kind]]
    return observation.value


def calibrate_x(
    workload_kind: WorkloadKind,
    candidate_xs: Sequence[int],
    iterations: int,
    seed: int,
    base: Optional[GeneratorConfig] = None,
    repeats: int = 1,
    threshold: float = CALIBRATION_THRESHOLD,
) -> CalibrationResult:
    """Choisir le plus petit X dont l'erreur mesurée/prédite est < 2%"""
    candidates = list(candidate_xs)
    if not candidates:
        raise ParameterError("Aucun candidat X")
    if any(b <= a for a, b in zip(candidates, candidates[1:])):
        raise ParameterError("Les candidats X doivent être strictement croissants")
    if repeats < 1:
        raise ParameterError("repeats doit être >= 1")

    template = base or GeneratorConfig(workload_kind=workload_kind, x=candidates[0], iterations=iterations)
    rows: List[CalibrationRow] = []
    chosen = None
    for x in candidates:
        measurements = []
        for repeat in range(repeats):
            cfg = template.model_copy(update={
                "workload_kind": workload_kind,
                "x": x,
                "iterations": iterations,
                "seed": seed + repeat,
            })
            value = measure(generate(cfg), workload_kind)
            if value is not None:
                measurements.append(value)
        predicted = theoretical_prediction(cfg)
        measured = float(np.mean(measurements)) if measurements else None
        error = relative_error(measured, predicted) if measured is not None else None
        qualifies = error is not None and error < threshold
        rows.append(CalibrationRow(
            x=x, predicted=predicted, measured=measured, relative_error=error, qualifies=qualifies,
        ))
        if qualifies and chosen is None:
            chosen = x
        logger.debug("calibration candidate", x=x, predicted=predicted, measured=measured, error=error)

    result = CalibrationResult(workload_kind=workload_kind, chosen_x=chosen, threshold=threshold, rows=rows)
    if chosen is None:
        logger.warning("calibration failed", kind=workload_kind.value, candidates=candidates)
    else:
        logger.info("calibration done", kind=workload_kind.value, chosen_x=chosen)
    return result
