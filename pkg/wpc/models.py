"""
Modèle de données des traces multi-niveaux
"""

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ParameterError


# Enums pour les niveaux, types d'événements et métriques
class Level(str, enum.Enum):
    IR = "IR"
    ISA = "ISA"
    UARCH = "UARCH"

    @property
    def code(self) -> int:
        return _LEVEL_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "Level":
        for level, value in _LEVEL_CODES.items():
            if value == code:
                return level
        raise ValueError(f"Code de niveau inconnu: {code}")


_LEVEL_CODES = {Level.IR: 0, Level.ISA: 1, Level.UARCH: 2}


class EventKind(enum.IntEnum):
    COMPUTE = 0
    LOAD = 1
    STORE = 2
    BRANCH = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def from_label(cls, label: str) -> "EventKind":
        return cls[label.upper()]


class WorkloadKind(str, enum.Enum):
    DATA = "DataLocality"
    INSTRUCTION = "InstructionLocality"
    BRANCH = "BranchLocality"


class MetricName(str, enum.Enum):
    INSTR_REUSE_DIST = "InstrReuseDist"
    DATA_REUSE_DIST = "DataReuseDist"
    BRANCH_ENTROPY = "BranchEntropy"
    L1I_MPKI = "L1I_MPKI"
    L1D_MPKI = "L1D_MPKI"
    BRANCH_MPKI = "Branch_MPKI"

    @property
    def is_locality(self) -> bool:
        return self in LOCALITY_METRICS


LOCALITY_METRICS = (MetricName.INSTR_REUSE_DIST, MetricName.DATA_REUSE_DIST, MetricName.BRANCH_ENTROPY)


class MetricFamily(str, enum.Enum):
    """Famille de localité: une métrique de trace (IR/ISA) et une métrique MPKI (UARCH)"""

    INSTRUCTION = "inst"
    DATA = "data"
    BRANCH = "branch"

    def metric_for(self, level: Level) -> MetricName:
        trace_metric, mpki_metric = _FAMILY_METRICS[self]
        return mpki_metric if level == Level.UARCH else trace_metric

    @property
    def workload_kind(self) -> WorkloadKind:
        return _FAMILY_WORKLOADS[self]

    @classmethod
    def of(cls, metric: MetricName) -> "MetricFamily":
        for family, metrics in _FAMILY_METRICS.items():
            if metric in metrics:
                return family
        raise ValueError(f"Métrique sans famille: {metric}")


_FAMILY_METRICS = {
    MetricFamily.INSTRUCTION: (MetricName.INSTR_REUSE_DIST, MetricName.L1I_MPKI),
    MetricFamily.DATA: (MetricName.DATA_REUSE_DIST, MetricName.L1D_MPKI),
    MetricFamily.BRANCH: (MetricName.BRANCH_ENTROPY, MetricName.BRANCH_MPKI),
}

_FAMILY_WORKLOADS = {
    MetricFamily.INSTRUCTION: WorkloadKind.INSTRUCTION,
    MetricFamily.DATA: WorkloadKind.DATA,
    MetricFamily.BRANCH: WorkloadKind.BRANCH,
}


class BreakdownMethod(str, enum.Enum):
    TAG_SHARE = "TagShare"
    DIFFERENTIAL = "Differential"
    RESIDUAL = "Residual"


# Enregistrement binaire de 20 octets, little-endian, sans alignement
EVENT_DTYPE = np.dtype([
    ("kind", "u1"),
    ("flags", "u1"),
    ("tag_id", "<u2"),
    ("instr_addr", "<u8"),
    ("data_addr", "<u8"),
])

FLAG_TAKEN = 0x01
FLAG_KERNEL = 0x02

UNTAGGED = "untagged"


class TraceEvent(NamedTuple):
    """Une instruction exécutée"""
    kind: EventKind
    instr_addr: int
    data_or_target_addr: int = 0
    taken: bool = False
    kernel_mode: bool = False
    tag_id: int = 0

    @property
    def flags(self) -> int:
        return (FLAG_TAKEN if self.taken else 0) | (FLAG_KERNEL if self.kernel_mode else 0)


def events_to_array(events: Iterable[TraceEvent]) -> np.ndarray:
    """Convertir des TraceEvent en tableau structuré"""
    rows = [
        (int(e.kind), e.flags, e.tag_id, e.instr_addr, e.data_or_target_addr)
        for e in events
    ]
    return np.array(rows, dtype=EVENT_DTYPE)


def array_to_events(records: np.ndarray) -> Iterator[TraceEvent]:
    """Itérer sur un tableau structuré sous forme de TraceEvent"""
    for kind, flags, tag_id, instr_addr, data_addr in records.tolist():
        yield TraceEvent(
            kind=EventKind(kind),
            instr_addr=instr_addr,
            data_or_target_addr=data_addr,
            taken=bool(flags & FLAG_TAKEN),
            kernel_mode=bool(flags & FLAG_KERNEL),
            tag_id=tag_id,
        )


def validate_records(records: np.ndarray, tag_count: int, offset: int = 0) -> None:
    """Vérifier les invariants d'un bloc d'enregistrements"""
    if records.size == 0:
        return
    bad_kind = np.flatnonzero(records["kind"] > EventKind.BRANCH)
    if bad_kind.size:
        raise ParameterError(f"Type d'événement inconnu à l'index {offset + int(bad_kind[0])}")
    bad_tag = np.flatnonzero(records["tag_id"] >= tag_count)
    if bad_tag.size:
        raise ParameterError(
            f"tag_id hors table à l'index {offset + int(bad_tag[0])} (table de {tag_count} tags)"
        )
    compute = records["kind"] == EventKind.COMPUTE
    bad_compute = np.flatnonzero(compute & (records["data_addr"] != 0))
    if bad_compute.size:
        raise ParameterError(
            f"Événement Compute avec adresse de donnée non nulle à l'index {offset + int(bad_compute[0])}"
        )


@dataclass(frozen=True, eq=False)
class Trace:
    """Séquence ordonnée d'événements à un niveau donné (immuable)"""

    level: Level
    workload_name: str
    tag_table: Tuple[str, ...] = ()
    events: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=EVENT_DTYPE))
    seed: Optional[int] = None

    def __post_init__(self):
        events = np.ascontiguousarray(self.events, dtype=EVENT_DTYPE)
        validate_records(events, len(self.tag_table))
        events.flags.writeable = False
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "tag_table", tuple(self.tag_table))
        object.__setattr__(self, "level", Level(self.level))

    @classmethod
    def from_events(
        cls,
        level: Level,
        workload_name: str,
        tag_table: Sequence[str],
        events: Iterable[TraceEvent],
        seed: Optional[int] = None,
    ) -> "Trace":
        return cls(level, workload_name, tuple(tag_table), events_to_array(list(events)), seed)

    def __len__(self) -> int:
        return int(self.events.size)

    def __iter__(self) -> Iterator[TraceEvent]:
        return array_to_events(self.events)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.level == other.level
            and self.workload_name == other.workload_name
            and self.tag_table == other.tag_table
            and self.seed == other.seed
            and np.array_equal(self.events, other.events)
        )

    __hash__ = None

    # Vues en colonnes
    @property
    def kinds(self) -> np.ndarray:
        return self.events["kind"]

    @property
    def instr_addrs(self) -> np.ndarray:
        return self.events["instr_addr"]

    @property
    def data_addrs(self) -> np.ndarray:
        return self.events["data_addr"]

    @property
    def tag_ids(self) -> np.ndarray:
        return self.events["tag_id"]

    @property
    def taken(self) -> np.ndarray:
        return (self.events["flags"] & FLAG_TAKEN) != 0

    @property
    def kernel_mode(self) -> np.ndarray:
        return (self.events["flags"] & FLAG_KERNEL) != 0

    @property
    def memory_mask(self) -> np.ndarray:
        kinds = self.kinds
        return (kinds == EventKind.LOAD) | (kinds == EventKind.STORE)

    @property
    def branch_mask(self) -> np.ndarray:
        return self.kinds == EventKind.BRANCH

    def chunks(self, size: int) -> Iterator[np.ndarray]:
        """Découper les événements en blocs (vues, sans copie)"""
        for start in range(0, len(self), size):
            yield self.events[start:start + size]
