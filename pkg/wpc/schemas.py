"""
Schémas Pydantic pour configurations, observations et résultats
"""

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, computed_field, model_validator

from .models import BreakdownMethod, Level, MetricName, WorkloadKind


def is_power_of_two(value: int) -> bool:
    return value > 0 and (value & (value - 1)) == 0


# Schémas de génération
class GeneratorConfig(BaseModel):
    """Paramètres d'une charge de référence standard"""
    workload_kind: WorkloadKind = Field(..., description="Type de charge de référence")
    x: int = Field(..., ge=0, description="Paramètre contrôlé X")
    iterations: int = Field(..., ge=1, description="Nombre d'itérations n")
    b: int = Field(default=5, ge=1, description="Instructions par corps de fonction")
    h: int = Field(default=2, ge=0, description="Instructions de boucle par itération")
    m: int = Field(default=1000, ge=2, description="Borne de l'intervalle du seuil de branchement")
    element_stride: int = Field(default=8, ge=1, description="Octets entre éléments de données")
    function_stride: int = Field(default=32, ge=1, description="Octets entre points d'entrée de fonctions")
    harness_mem: int = Field(default=0, ge=0, description="Accès mémoire de boucle par itération (charge de données)")
    seed: int = Field(default=42, ge=0, lt=1 << 64, description="Graine du générateur")
    level: Level = Field(default=Level.IR, description="Niveau inscrit dans la trace")

    class Config:
        extra = "forbid"

    @property
    def workload_name(self) -> str:
        return f"ref-{self.workload_kind.value}-x{self.x}"


class CalibrationRow(BaseModel):
    """Ligne de la table d'erreurs de calibration"""
    x: int
    predicted: float
    measured: Optional[float]
    relative_error: Optional[float]
    qualifies: bool


class CalibrationResult(BaseModel):
    """Résultat de calibration de X"""
    workload_kind: WorkloadKind
    chosen_x: Optional[int] = None
    threshold: float = 0.02
    rows: List[CalibrationRow] = Field(default_factory=list)

    @property
    def calibrated(self) -> bool:
        return self.chosen_x is not None


# Schémas de compteurs et d'observations
class CounterRecord(BaseModel):
    """Compteurs matériels ingérés"""
    workload_name: str
    instructions: int = Field(..., gt=0)
    l1i_misses: int = Field(..., ge=0)
    l1d_misses: int = Field(..., ge=0)
    branch_mispredictions: int = Field(..., ge=0)
    config_label: str = "default"


class MetricObservation(BaseModel):
    """Une valeur de localité à un niveau"""
    workload_name: str = Field(..., alias="workload")
    level: Level
    metric: MetricName
    value: Optional[float] = Field(None, ge=0)
    defined: bool = True
    sample_count: int = Field(0, ge=0, alias="samples")
    config_label: str = Field("default", alias="config")

    class Config:
        populate_by_name = True

    @model_validator(mode="after")
    def check_value(self) -> "MetricObservation":
        if not self.defined:
            if self.value is not None:
                raise ValueError("Une observation non définie ne porte pas de valeur")
            return self
        if self.value is None:
            raise ValueError("Une observation définie doit porter une valeur")
        if self.metric == MetricName.BRANCH_ENTROPY and self.value > 1.0 + 1e-12:
            raise ValueError("L'entropie de branchement doit être dans [0, 1]")
        if self.metric in (MetricName.INSTR_REUSE_DIST, MetricName.DATA_REUSE_DIST) \
                and self.sample_count > 0 and self.value < 1.0:
            raise ValueError("La distance de réutilisation est >= 1")
        return self

    @property
    def key(self) -> tuple:
        return (self.workload_name, self.level.value, self.metric.value, self.config_label)

    @classmethod
    def undefined(cls, workload: str, level: Level, metric: MetricName, config: str = "default") -> "MetricObservation":
        return cls(workload=workload, level=level, metric=metric, value=None, defined=False,
                   samples=0, config=config)


class BranchRecord(BaseModel):
    """Statistiques d'un branchement statique"""
    instr_addr: int
    taken: int = Field(..., ge=0)
    total: int = Field(..., gt=0)

    @computed_field
    @property
    def p(self) -> float:
        return self.taken / self.total

    @computed_field
    @property
    def entropy(self) -> float:
        return 2.0 * min(self.p, 1.0 - self.p)


class BranchStats(BaseModel):
    """Statistiques par branchement statique"""
    branches: List[BranchRecord] = Field(default_factory=list)

    def by_address(self) -> Dict[int, BranchRecord]:
        return {record.instr_addr: record for record in self.branches}


# Schémas de microarchitecture
class CacheConfig(BaseModel):
    """Géométrie d'un cache simulé"""
    capacity_bytes: int = Field(default=32 * 1024)
    line_bytes: int = Field(default=64)
    associativity: int = Field(default=8, ge=1)
    replacement: Literal["LRU"] = "LRU"
    prefetch_next_line: bool = False

    class Config:
        frozen = True

    @model_validator(mode="after")
    def check_geometry(self) -> "CacheConfig":
        if not is_power_of_two(self.capacity_bytes):
            raise ValueError("capacity_bytes doit être une puissance de deux")
        if not is_power_of_two(self.line_bytes):
            raise ValueError("line_bytes doit être une puissance de deux")
        if self.capacity_bytes < self.line_bytes * self.associativity:
            raise ValueError("capacity_bytes < line_bytes * associativity")
        lines = self.capacity_bytes // self.line_bytes
        if lines % self.associativity:
            raise ValueError("associativity doit diviser le nombre de lignes")
        if not is_power_of_two(lines // self.associativity):
            raise ValueError("Le nombre d'ensembles doit être une puissance de deux")
        return self

    @property
    def sets(self) -> int:
        return self.capacity_bytes // (self.line_bytes * self.associativity)

    @property
    def label(self) -> str:
        suffix = "+pf" if self.prefetch_next_line else ""
        return f"{self.capacity_bytes // 1024}KB/{self.line_bytes}B/{self.associativity}w{suffix}"


class PredictorConfig(BaseModel):
    """Prédicteur bimodal à compteurs saturants"""
    table_entries: int = Field(default=4096)
    counter_bits: Literal[2] = 2
    initial_state: int = Field(default=1, ge=0, le=3, description="1 = faiblement non pris")

    class Config:
        frozen = True

    @model_validator(mode="after")
    def check_table(self) -> "PredictorConfig":
        if not is_power_of_two(self.table_entries):
            raise ValueError("table_entries doit être une puissance de deux")
        return self


class SimVariant(BaseModel):
    """Une variante de configuration pour une exploration"""
    label: str
    l1i: CacheConfig = Field(default_factory=CacheConfig)
    l1d: CacheConfig = Field(default_factory=CacheConfig)
    predictor: PredictorConfig = Field(default_factory=PredictorConfig)


class SimResult(BaseModel):
    """Compteurs simulés et MPKI dérivés"""
    workload_name: str = Field("", alias="workload")
    config_label: str = Field("default", alias="config")
    instructions: int = Field(0, ge=0)
    l1i_accesses: int = Field(0, ge=0)
    l1i_misses: int = Field(0, ge=0)
    l1d_accesses: int = Field(0, ge=0)
    l1d_misses: int = Field(0, ge=0)
    branches: int = Field(0, ge=0)
    mispredictions: int = Field(0, ge=0)

    class Config:
        populate_by_name = True

    @model_validator(mode="after")
    def check_counts(self) -> "SimResult":
        if self.l1i_misses > self.l1i_accesses or self.l1d_misses > self.l1d_accesses:
            raise ValueError("misses > accesses")
        if self.mispredictions > self.branches:
            raise ValueError("mispredictions > branches")
        return self

    def _mpki(self, misses: int) -> float:
        return misses * 1000.0 / self.instructions if self.instructions else 0.0

    @computed_field
    @property
    def l1i_mpki(self) -> float:
        return self._mpki(self.l1i_misses)

    @computed_field
    @property
    def l1d_mpki(self) -> float:
        return self._mpki(self.l1d_misses)

    @computed_field
    @property
    def branch_mpki(self) -> float:
        return self._mpki(self.mispredictions)

    def to_observations(self) -> List[MetricObservation]:
        """Observations UARCH (une par MPKI)"""
        defined = self.instructions > 0
        return [
            MetricObservation(
                workload=self.workload_name,
                level=Level.UARCH,
                metric=metric,
                value=value if defined else None,
                defined=defined,
                samples=self.instructions,
                config=self.config_label,
            )
            for metric, value in (
                (MetricName.L1I_MPKI, self.l1i_mpki),
                (MetricName.L1D_MPKI, self.l1d_mpki),
                (MetricName.BRANCH_MPKI, self.branch_mpki),
            )
        ]


class KneeResult(BaseModel):
    """Coude du working set détecté sur un balayage"""
    knee_x: Optional[float] = None
    floor: float
    theta: float

    @property
    def found(self) -> bool:
        return self.knee_x is not None


class SweepPoint(BaseModel):
    """Point d'un balayage de paramètre"""
    x: int
    config: str
    reuse_metric: Optional[float] = None
    l1i_mpki: float
    l1d_mpki: float
    branch_mpki: float


# Schémas de fusion
class LevelEntry(BaseModel):
    """Valeur observée X_i et référence S_i à un niveau"""
    level: Level
    observed: float = Field(..., ge=0)
    reference: float
    defined: bool = True


class MetricVector(BaseModel):
    """Vecteur par niveau transmis à la fusion"""
    entries: List[LevelEntry] = Field(..., min_length=2)
    metric: Optional[str] = None
    workload_name: Optional[str] = None

    @model_validator(mode="after")
    def check_levels(self) -> "MetricVector":
        codes = [entry.level.code for entry in self.entries]
        if len(set(codes)) != len(codes) or codes != sorted(codes):
            raise ValueError("Les niveaux doivent être distincts et ordonnés (IR, ISA, UARCH)")
        return self


class ImpactEntry(BaseModel):
    """Valeur relative R_i et facteur d'impact normalisé I_i"""
    level: Level
    relative: float
    impact: float = Field(..., ge=0)


class ImpactVector(BaseModel):
    """Facteurs d'impact normalisés par niveau"""
    entries: List[ImpactEntry]
    metric: Optional[str] = None
    workload_name: Optional[str] = None

    def impact_of(self, level: Level) -> float:
        for entry in self.entries:
            if entry.level == level:
                return entry.impact
        raise KeyError(level)


class BreakdownNode(BaseModel):
    """Noeud de l'arbre d'attribution par composant"""
    name: str
    impact: float
    method: Optional[BreakdownMethod] = None
    children: List["BreakdownNode"] = Field(default_factory=list)
    warning: Optional[str] = None
    note: Optional[str] = None

    def leaves(self) -> List["BreakdownNode"]:
        if not self.children:
            return [self]
        result = []
        for child in self.children:
            result.extend(child.leaves())
        return result

    def check_conservation(self, tol: float = 1e-9) -> bool:
        """Vérifier que les enfants somment au parent à chaque profondeur"""
        if not self.children:
            return self.impact >= -tol
        total = sum(child.impact for child in self.children)
        if abs(total - self.impact) > tol:
            return False
        return all(child.check_conservation(tol) for child in self.children)


BreakdownNode.model_rebuild()


class KernelNoise(BaseModel):
    """Part du bruit OS (mode noyau)"""
    share: float = Field(..., ge=0, le=1)
    raw_share: float = Field(..., ge=0, le=1)
    threshold: float = 0.001


class MPKIShare(BaseModel):
    """Ligne d'une table de MPKI normalisés"""
    component: str
    impact: float
    normalized_mpki: float
    reported_mpki: float = Field(..., description="Valeur arrondie pour l'affichage")


class CorrelationReport(BaseModel):
    """Résultat d'une analyse de corrélation"""
    metric: str
    levels: List[Level]
    workloads: List[str]
    xs: List[float]
    ys: List[float]
    r: Optional[float] = None
    note: Optional[str] = None


# Schémas de pipeline
class ExperimentVariant(BaseModel):
    """Variante d'exploration transmise en configuration"""
    label: str
    platform: str = "gold5120t-like"
    prefetch: bool = False


class PipelineConfig(BaseModel):
    """Configuration d'une passe ORFE complète"""
    workload_name: str
    references: Dict[str, GeneratorConfig] = Field(..., description="Référence par famille (inst, data, branch)")
    target_traces: Dict[Level, str] = Field(..., description="Chemin de trace cible par niveau")
    counters_path: Optional[str] = None
    platform: str = "gold5120t-like"
    prefetch: bool = False
    output_dir: str = "reports"
    formats: List[Literal["json", "csv", "text"]] = Field(default_factory=lambda: ["json", "text"])

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def check_levels(self) -> "PipelineConfig":
        # UARCH provient des compteurs ou de la simulation
        levels = set(self.target_traces) | {Level.UARCH}
        if len(levels) < 2:
            raise ValueError("Au moins deux niveaux sont nécessaires")
        unknown = set(self.references) - {"inst", "data", "branch"}
        if unknown:
            raise ValueError(f"Familles de métriques inconnues: {sorted(unknown)}")
        return self
