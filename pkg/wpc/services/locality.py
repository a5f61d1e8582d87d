"""
Service de mesure de la localité (instructions, données, branchements)
"""

from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from ..config import CHUNK_EVENTS
from ..exceptions import ParameterError
from ..models import FLAG_TAKEN, EventKind, Level, MetricName, Trace
from ..schemas import BranchRecord, BranchStats, CounterRecord, MetricObservation

logger = structlog.get_logger(__name__)


class ReuseTracker:
    """Repli en une passe des écarts de réutilisation entre accès consécutifs
    à une même clé; les indices sont continus d'un bloc à l'autre"""

    def __init__(self):
        self.position = 0
        self.gap_sum = 0
        self.gap_count = 0
        self._last: Dict[int, int] = {}

    def feed(self, keys: np.ndarray) -> np.ndarray:
        """Ajouter un bloc de clés; retourne l'écart de chaque accès (0 = premier accès)"""
        n = keys.size
        gaps = np.zeros(n, dtype=np.int64)
        if n == 0:
            return gaps

        indices = np.arange(self.position, self.position + n, dtype=np.int64)
        order = np.argsort(keys, kind="stable")
        sorted_keys = keys[order]
        sorted_indices = indices[order]

        repeat = np.zeros(n, dtype=bool)
        repeat[1:] = sorted_keys[1:] == sorted_keys[:-1]
        sorted_gaps = np.zeros(n, dtype=np.int64)
        sorted_gaps[1:] = sorted_indices[1:] - sorted_indices[:-1]
        sorted_gaps[~repeat] = 0

        # Premières occurrences du bloc: raccord avec les blocs précédents
        firsts = np.flatnonzero(~repeat)
        first_keys = sorted_keys[firsts].tolist()
        previous = np.array([self._last.get(key, -1) for key in first_keys], dtype=np.int64)
        seen = previous >= 0
        sorted_gaps[firsts[seen]] = sorted_indices[firsts[seen]] - previous[seen]

        lasts = np.append(firsts[1:] - 1, n - 1)
        self._last.update(zip(first_keys, sorted_indices[lasts].tolist()))

        gaps[order] = sorted_gaps
        self.position += n
        reused = gaps > 0
        self.gap_sum += int(gaps[reused].sum())
        self.gap_count += int(reused.sum())
        return gaps

    @property
    def mean(self) -> Optional[float]:
        if self.gap_count == 0:
            return None
        return self.gap_sum / self.gap_count


class BranchTracker:
    """Comptes pris/total par branchement statique"""

    def __init__(self):
        self._taken: Dict[int, int] = {}
        self._total: Dict[int, int] = {}

    def feed(self, addrs: np.ndarray, taken: np.ndarray) -> None:
        if addrs.size == 0:
            return
        unique, inverse = np.unique(addrs, return_inverse=True)
        totals = np.bincount(inverse, minlength=unique.size)
        takens = np.bincount(inverse, weights=taken.astype(np.float64), minlength=unique.size)
        for addr, total, count in zip(unique.tolist(), totals.tolist(), takens.tolist()):
            self._total[addr] = self._total.get(addr, 0) + int(total)
            self._taken[addr] = self._taken.get(addr, 0) + int(round(count))

    @property
    def executions(self) -> int:
        return sum(self._total.values())

    def stats(self) -> BranchStats:
        return BranchStats(branches=[
            BranchRecord(instr_addr=addr, taken=self._taken[addr], total=self._total[addr])
            for addr in sorted(self._total)
        ])

    def weighted_entropy(self) -> Optional[float]:
        """Moyenne de H pondérée par le nombre d'exécutions"""
        executions = self.executions
        if executions == 0:
            return None
        mass = 0.0
        for addr, total in self._total.items():
            p = self._taken[addr] / total
            mass += 2.0 * min(p, 1.0 - p) * total
        return mass / executions


TraceSource = Union[Trace, "TraceReader"]  # noqa: F821


class LocalityAnalyzer:
    """Calcul en une passe des métriques de localité d'une trace"""

    def __init__(self, metrics: Sequence[MetricName] = (
        MetricName.INSTR_REUSE_DIST, MetricName.DATA_REUSE_DIST, MetricName.BRANCH_ENTROPY,
    ), config_label: str = "default"):
        unknown = [metric for metric in metrics if not MetricName(metric).is_locality]
        if unknown:
            raise ParameterError(f"Métriques non mesurables sur une trace: {unknown}")
        self.metrics = [MetricName(metric) for metric in metrics]
        self.config_label = config_label
        self.instructions = ReuseTracker()
        self.data = ReuseTracker()
        self.branches = BranchTracker()

    def feed(self, records: np.ndarray) -> None:
        if MetricName.INSTR_REUSE_DIST in self.metrics:
            self.instructions.feed(records["instr_addr"])
        kinds = records["kind"]
        if MetricName.DATA_REUSE_DIST in self.metrics:
            memory = (kinds == EventKind.LOAD) | (kinds == EventKind.STORE)
            self.data.feed(records["data_addr"][memory])
        if MetricName.BRANCH_ENTROPY in self.metrics:
            branch = kinds == EventKind.BRANCH
            self.branches.feed(records["instr_addr"][branch], (records["flags"][branch] & FLAG_TAKEN) != 0)

    def observations(self, workload_name: str, level: Level) -> Dict[MetricName, MetricObservation]:
        values = {
            MetricName.INSTR_REUSE_DIST: (self.instructions.mean, self.instructions.gap_count),
            MetricName.DATA_REUSE_DIST: (self.data.mean, self.data.gap_count),
            MetricName.BRANCH_ENTROPY: (self.branches.weighted_entropy(), self.branches.executions),
        }
        result = {}
        for metric in self.metrics:
            value, samples = values[metric]
            if value is None:
                result[metric] = MetricObservation.undefined(workload_name, level, metric, self.config_label)
            else:
                result[metric] = MetricObservation(
                    workload=workload_name, level=level, metric=metric, value=value,
                    samples=samples, config=self.config_label,
                )
        return result

    def run(self, source, chunk_events: int = CHUNK_EVENTS) -> Dict[MetricName, MetricObservation]:
        """Analyser une Trace ou un TraceReader en flux"""
        for records in source.chunks(chunk_events):
            self.feed(records)
            logger.debug("chunk analyzed", workload=source.workload_name, events=records.size)
        observations = self.observations(source.workload_name, source.level)
        logger.info(
            "locality analyzed",
            workload=source.workload_name,
            level=source.level.value,
            metrics={metric.value: obs.value for metric, obs in observations.items()},
        )
        return observations


def instruction_reuse_distance(trace: Trace, config_label: str = "default") -> MetricObservation:
    """Écart moyen entre deux exécutions consécutives d'une même adresse d'instruction"""
    return LocalityAnalyzer([MetricName.INSTR_REUSE_DIST], config_label).run(trace)[MetricName.INSTR_REUSE_DIST]


def data_reuse_distance(trace: Trace, config_label: str = "default") -> MetricObservation:
    """Écart moyen, compté en accès mémoire, entre deux accès à une même adresse"""
    return LocalityAnalyzer([MetricName.DATA_REUSE_DIST], config_label).run(trace)[MetricName.DATA_REUSE_DIST]


def branch_entropy(trace: Trace, config_label: str = "default") -> Tuple[MetricObservation, BranchStats]:
    """Entropie linéaire de branchement pondérée par les exécutions"""
    analyzer = LocalityAnalyzer([MetricName.BRANCH_ENTROPY], config_label)
    observation = analyzer.run(trace)[MetricName.BRANCH_ENTROPY]
    return observation, analyzer.branches.stats()


def mpki_from_counters(record: CounterRecord) -> List[MetricObservation]:
    """MPKI L1I, L1D et branchements à partir de compteurs ingérés"""
    if record.instructions <= 0:
        raise ParameterError("instructions doit être strictement positif")
    return [
        MetricObservation(
            workload=record.workload_name,
            level=Level.UARCH,
            metric=metric,
            value=misses * 1000.0 / record.instructions,
            samples=record.instructions,
            config=record.config_label,
        )
        for metric, misses in (
            (MetricName.L1I_MPKI, record.l1i_misses),
            (MetricName.L1D_MPKI, record.l1d_misses),
            (MetricName.BRANCH_MPKI, record.branch_mispredictions),
        )
    ]


# === ATTRIBUTION PAR ÉVÉNEMENT ===

def attributed_gaps(trace: Trace, metric: MetricName) -> Tuple[np.ndarray, np.ndarray]:
    """Masse de chaque événement participant et masque des participants.

    Pour les distances de réutilisation la masse est l'écart porté par
    l'accès qui réutilise (0 pour un premier accès). Pour l'entropie c'est
    l'entropie H du branchement statique exécuté.
    """
    metric = MetricName(metric)
    if metric == MetricName.INSTR_REUSE_DIST:
        mask = np.ones(len(trace), dtype=bool)
        return ReuseTracker().feed(trace.instr_addrs).astype(np.float64), mask
    if metric == MetricName.DATA_REUSE_DIST:
        mask = trace.memory_mask
        return ReuseTracker().feed(trace.data_addrs[mask]).astype(np.float64), mask
    if metric == MetricName.BRANCH_ENTROPY:
        mask = trace.branch_mask
        addrs = trace.instr_addrs[mask]
        if addrs.size == 0:
            return np.zeros(0, dtype=np.float64), mask
        unique, inverse = np.unique(addrs, return_inverse=True)
        totals = np.bincount(inverse, minlength=unique.size)
        takens = np.bincount(inverse, weights=trace.taken[mask].astype(np.float64), minlength=unique.size)
        p = takens / totals
        entropy = 2.0 * np.minimum(p, 1.0 - p)
        return entropy[inverse], mask
    raise ParameterError(f"Métrique non attribuable: {metric.value}")


def gap_histogram(trace: Trace, metric: MetricName, max_gap: int) -> np.ndarray:
    """Histogramme des écarts 1..max_gap, la dernière case cumulant la queue (>= max_gap)"""
    if metric == MetricName.BRANCH_ENTROPY:
        raise ParameterError("Pas d'histogramme d'écarts pour l'entropie")
    gaps, _ = attributed_gaps(trace, metric)
    gaps = gaps[gaps > 0].astype(np.int64)
    clipped = np.minimum(gaps, max_gap)
    counts = np.bincount(clipped, minlength=max_gap + 1)[1:]
    return counts


def iter_observations(observations: Iterable[MetricObservation]) -> List[MetricObservation]:
    return sorted(observations, key=lambda obs: (obs.level.code, obs.metric.value))
