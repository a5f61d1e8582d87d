"""
Service de simulation de la microarchitecture (caches L1, prédicteur de branchement)
"""

from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from ..config import CHUNK_EVENTS
from ..database import ProfileStore
from ..exceptions import ParameterError
from ..models import FLAG_TAKEN, EventKind, Trace, WorkloadKind
from ..schemas import (
    CacheConfig,
    GeneratorConfig,
    KneeResult,
    PredictorConfig,
    SimResult,
    SimVariant,
    SweepPoint,
)
from .locality import LocalityAnalyzer
from .refgen import METRICS, generate

logger = structlog.get_logger(__name__)

DEFAULT_THETA = 5.0
MIN_SWEEP_POINTS = 4

PLATFORM_PRESETS: Dict[str, SimVariant] = {
    "gold5120t-like": SimVariant(
        label="gold5120t-like",
        l1i=CacheConfig(capacity_bytes=32 * 1024, line_bytes=64, associativity=8),
        l1d=CacheConfig(capacity_bytes=32 * 1024, line_bytes=64, associativity=8),
        predictor=PredictorConfig(table_entries=4096),
    ),
    "kunpeng920-like": SimVariant(
        label="kunpeng920-like",
        l1i=CacheConfig(capacity_bytes=64 * 1024, line_bytes=64, associativity=4),
        l1d=CacheConfig(capacity_bytes=64 * 1024, line_bytes=64, associativity=4),
        predictor=PredictorConfig(table_entries=4096),
    ),
}


def resolve_platform(name: str, prefetch: bool = False) -> SimVariant:
    """Variante correspondant à un préréglage de plateforme"""
    try:
        preset = PLATFORM_PRESETS[name]
    except KeyError:
        raise ParameterError(
            f"Plateforme inconnue: {name} (connues: {', '.join(sorted(PLATFORM_PRESETS))})"
        )
    if not prefetch:
        return preset
    return SimVariant(
        label=f"{preset.label}+pf",
        l1i=preset.l1i.model_copy(update={"prefetch_next_line": True}),
        l1d=preset.l1d.model_copy(update={"prefetch_next_line": True}),
        predictor=preset.predictor,
    )


class SetAssociativeCache:
    """Cache associatif par ensembles, remplacement LRU.

    Chaque ensemble est un OrderedDict du plus ancien (début) au plus
    récent (fin). Le préchargement de la ligne suivante se fait sur défaut
    de demande et installe la ligne en position LRU.
    """

    def __init__(self, config: CacheConfig):
        self.config = config
        self.offset_bits = np.uint64(config.line_bytes.bit_length() - 1)
        self.set_mask = config.sets - 1
        self.associativity = config.associativity
        self.prefetch = config.prefetch_next_line
        self._sets: List[OrderedDict] = [OrderedDict() for _ in range(config.sets)]
        self._last_line: Optional[int] = None
        # Un seul bloc en tout: le préchargement évincerait la ligne courante
        self._collapse = not (self.prefetch and config.sets == 1 and config.associativity == 1)
        self.accesses = 0
        self.misses = 0
        self.prefetches = 0

    def access_line(self, line: int) -> bool:
        """Accès à une ligne; retourne True sur succès"""
        ways = self._sets[line & self.set_mask]
        if line in ways:
            ways.move_to_end(line)
            return True
        self.misses += 1
        if len(ways) >= self.associativity:
            ways.popitem(last=False)
        ways[line] = None
        if self.prefetch:
            self._prefetch(line + 1)
        return False

    def _prefetch(self, line: int) -> None:
        ways = self._sets[line & self.set_mask]
        if line in ways:
            return
        if len(ways) >= self.associativity:
            ways.popitem(last=False)
        ways[line] = None
        ways.move_to_end(line, last=False)
        self.prefetches += 1

    def access(self, address: int) -> bool:
        self.accesses += 1
        line = address >> int(self.offset_bits)
        self._last_line = line
        return self.access_line(line)

    def feed(self, addresses: np.ndarray) -> None:
        """Accéder à un bloc d'adresses dans l'ordre"""
        if addresses.size == 0:
            return
        lines = addresses.astype(np.uint64) >> self.offset_bits
        self.accesses += int(lines.size)
        if self._collapse:
            # Les accès répétés à la ligne qui vient d'être accédée sont des succès
            keep = np.ones(lines.size, dtype=bool)
            keep[1:] = lines[1:] != lines[:-1]
            if self._last_line is not None and int(lines[0]) == self._last_line:
                keep[0] = False
            lines_to_visit = lines[keep]
        else:
            lines_to_visit = lines
        for line in lines_to_visit.tolist():
            self.access_line(line)
        self._last_line = int(lines[-1])

    def resident_lines(self) -> int:
        return sum(len(ways) for ways in self._sets)


class BimodalPredictor:
    """Table de compteurs saturants à 2 bits indexée par (adresse / 4)"""

    def __init__(self, config: PredictorConfig):
        self.config = config
        self.mask = config.table_entries - 1
        self.table = [config.initial_state] * config.table_entries
        self.branches = 0
        self.mispredictions = 0

    def predict(self, address: int) -> bool:
        return self.table[(address >> 2) & self.mask] >= 2

    def update(self, address: int, taken: bool) -> bool:
        """Prédire puis mettre à jour; retourne True si la prédiction était correcte"""
        index = (address >> 2) & self.mask
        counter = self.table[index]
        correct = (counter >= 2) == taken
        self.table[index] = min(3, counter + 1) if taken else max(0, counter - 1)
        self.branches += 1
        if not correct:
            self.mispredictions += 1
        return correct

    def feed(self, addresses: np.ndarray, taken: np.ndarray) -> None:
        for address, outcome in zip(addresses.tolist(), taken.tolist()):
            self.update(address, outcome)


def simulate(
    source,
    l1i: CacheConfig,
    l1d: CacheConfig,
    pred: PredictorConfig,
    config_label: Optional[str] = None,
    chunk_events: int = CHUNK_EVENTS,
) -> SimResult:
    """Simuler L1I, L1D et prédicteur sur une Trace ou un TraceReader"""
    icache = SetAssociativeCache(l1i)
    dcache = SetAssociativeCache(l1d)
    predictor = BimodalPredictor(pred)
    instructions = 0

    for records in source.chunks(chunk_events):
        instructions += int(records.size)
        icache.feed(records["instr_addr"])
        kinds = records["kind"]
        memory = (kinds == EventKind.LOAD) | (kinds == EventKind.STORE)
        dcache.feed(records["data_addr"][memory])
        branch = kinds == EventKind.BRANCH
        predictor.feed(records["instr_addr"][branch], (records["flags"][branch] & FLAG_TAKEN) != 0)

    label = config_label or f"L1I {l1i.label} / L1D {l1d.label} / BP {pred.table_entries}"
    result = SimResult(
        workload=source.workload_name,
        config=label,
        instructions=instructions,
        l1i_accesses=icache.accesses,
        l1i_misses=icache.misses,
        l1d_accesses=dcache.accesses,
        l1d_misses=dcache.misses,
        branches=predictor.branches,
        mispredictions=predictor.mispredictions,
    )
    logger.info(
        "simulation done",
        workload=source.workload_name,
        config=label,
        instructions=instructions,
        l1i_mpki=round(result.l1i_mpki, 4),
        l1d_mpki=round(result.l1d_mpki, 4),
        branch_mpki=round(result.branch_mpki, 4),
    )
    return result


def simulate_variant(source, variant: SimVariant) -> SimResult:
    return simulate(source, variant.l1i, variant.l1d, variant.predictor, config_label=variant.label)


def detect_knee(sweep: Sequence[Tuple[float, float]], theta: float = DEFAULT_THETA) -> KneeResult:
    """Coude du working set: plus grand x dont le MPKI reste sous theta * plancher"""
    points = list(sweep)
    if len(points) < MIN_SWEEP_POINTS:
        raise ParameterError(f"Au moins {MIN_SWEEP_POINTS} points de balayage sont nécessaires (reçu {len(points)})")
    xs = [x for x, _ in points]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ParameterError("Les x du balayage doivent être strictement croissants")
    if theta <= 1:
        raise ParameterError("theta doit être > 1")

    floor = min(mpki for _, mpki in points)
    limit = theta * floor
    below = [x for x, mpki in points if mpki <= limit]
    if len(below) == len(points):
        logger.info("no knee", floor=floor, theta=theta)
        return KneeResult(knee_x=None, floor=floor, theta=theta)
    return KneeResult(knee_x=max(below), floor=floor, theta=theta)


def config_sweep(
    source: Union[Trace, GeneratorConfig],
    variants: Sequence[SimVariant],
    max_workers: Optional[int] = None,
) -> Dict[str, SimResult]:
    """Simuler chaque variante sur la même trace; résultats indexés par libellé"""
    if not variants:
        raise ParameterError("Au moins une variante est nécessaire")
    if isinstance(source, GeneratorConfig):
        source = generate(source)

    with ThreadPoolExecutor(max_workers=max_workers or 1) as executor:
        results = list(executor.map(lambda variant: simulate_variant(source, variant), variants))

    table: Dict[str, SimResult] = {}
    for variant, result in zip(variants, results):
        table[variant.label] = result
    return table


MPKI_COLUMNS = ("l1i_mpki", "l1d_mpki", "branch_mpki")

_KIND_COLUMN = {
    WorkloadKind.INSTRUCTION: "l1i_mpki",
    WorkloadKind.DATA: "l1d_mpki",
    WorkloadKind.BRANCH: "branch_mpki",
}


def mpki_column(kind: WorkloadKind) -> str:
    return _KIND_COLUMN[kind]


def sweep_parameter(
    base: GeneratorConfig,
    xs: Sequence[int],
    variant: SimVariant,
    theta: float = DEFAULT_THETA,
    store: Optional[ProfileStore] = None,
) -> Tuple[List[SweepPoint], KneeResult]:
    """Balayer X: générer, mesurer la localité, simuler; coude sur le MPKI associé.

    Avec un store, chaque point y est enregistré (localité au niveau de la
    trace, MPKI au niveau UARCH) sous le nom de la charge de référence.
    """
    metric = METRICS[base.workload_kind]
    values = list(xs)
    if len(values) < MIN_SWEEP_POINTS:
        raise ParameterError(f"Au moins {MIN_SWEEP_POINTS} points de balayage sont nécessaires (reçu {len(values)})")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ParameterError("Les x du balayage doivent être strictement croissants")

    rows: List[SweepPoint] = []
    for x in values:
        cfg = base.model_copy(update={"x": x})
        trace = generate(cfg)
        locality = LocalityAnalyzer([metric], variant.label).run(trace)[metric]
        result = simulate_variant(trace, variant)
        if store is not None:
            store.put_many([locality, *result.to_observations()])
        rows.append(SweepPoint(
            x=x,
            config=variant.label,
            reuse_metric=locality.value,
            l1i_mpki=result.l1i_mpki,
            l1d_mpki=result.l1d_mpki,
            branch_mpki=result.branch_mpki,
        ))
        logger.debug("sweep point", x=x, config=variant.label)

    column = mpki_column(base.workload_kind)
    knee = detect_knee([(row.x, getattr(row, column)) for row in rows], theta)
    logger.info(
        "sweep done",
        kind=base.workload_kind.value,
        config=variant.label,
        points=len(rows),
        knee=knee.knee_x,
    )
    return rows, knee


def relative_mpki_difference(a: SimResult, b: SimResult) -> Dict[str, float]:
    """|a - b| / max(a, b) pour chaque colonne MPKI (0 si les deux sont nuls)"""
    differences = {}
    for column in MPKI_COLUMNS:
        first, second = getattr(a, column), getattr(b, column)
        largest = max(first, second)
        differences[column] = abs(first - second) / largest if largest > 0 else 0.0
    return differences
