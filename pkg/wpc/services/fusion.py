"""
Service de fusion: facteurs d'impact normalisés, corrélations et décompositions
"""

import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog
from scipy import stats

from ..exceptions import (
    DegenerateInputError,
    ParameterError,
    ReferenceInvalidError,
    UndefinedCorrelationError,
    UndefinedMetricError,
)
from ..models import UNTAGGED, BreakdownMethod, Level, MetricName, Trace
from ..schemas import (
    BreakdownNode,
    ImpactEntry,
    ImpactVector,
    KernelNoise,
    MetricObservation,
    MetricVector,
    MPKIShare,
)
from .locality import attributed_gaps

logger = structlog.get_logger(__name__)

KERNEL_NOISE_THRESHOLD = 0.001
CONSERVATION_TOL = 1e-9
OS_NOISE = "OS noise"


def presentation_round(value: float, digits: int = 1) -> float:
    """Arrondi d'affichage (les calculs restent en pleine précision)"""
    return round(value, digits)


def _relative_values(vector: MetricVector) -> List[float]:
    relatives = []
    for entry in vector.entries:
        if entry.reference <= 0:
            raise ReferenceInvalidError(entry.level.value, entry.reference)
        if not entry.defined:
            raise UndefinedMetricError(entry.level.value, vector.metric or "?")
        relatives.append(entry.observed / entry.reference)
    return relatives


def impact_factors(vector: MetricVector) -> ImpactVector:
    """R_i = X_i / S_i puis I_i = R_i / somme(R)"""
    relatives = _relative_values(vector)
    total = math.fsum(relatives)
    if total <= 0:
        raise DegenerateInputError("Toutes les valeurs observées sont nulles")
    entries = [
        ImpactEntry(level=entry.level, relative=relative, impact=relative / total)
        for entry, relative in zip(vector.entries, relatives)
    ]
    logger.info(
        "impact factors",
        workload=vector.workload_name,
        metric=vector.metric,
        impacts={entry.level.value: round(entry.impact, 4) for entry in entries},
    )
    return ImpactVector(entries=entries, metric=vector.metric, workload_name=vector.workload_name)


def dominant_level(impacts: ImpactVector) -> Level:
    """Niveau portant le plus grand facteur d'impact"""
    return max(impacts.entries, key=lambda entry: entry.impact).level


def average_impacts(vectors: Sequence[ImpactVector]) -> ImpactVector:
    """Moyenne par niveau sur un ensemble de charges, renormalisée"""
    if not vectors:
        raise ParameterError("Aucun vecteur d'impact")
    levels = [entry.level for entry in vectors[0].entries]
    for vector in vectors[1:]:
        if [entry.level for entry in vector.entries] != levels:
            raise ParameterError("Les vecteurs d'impact doivent couvrir les mêmes niveaux")
    relatives = np.mean([[entry.relative for entry in vector.entries] for vector in vectors], axis=0)
    means = np.mean([[entry.impact for entry in vector.entries] for vector in vectors], axis=0)
    total = float(means.sum())
    if total <= 0:
        raise DegenerateInputError("Moyenne des impacts nulle")
    return ImpactVector(
        entries=[
            ImpactEntry(level=level, relative=float(relative), impact=float(mean) / total)
            for level, relative, mean in zip(levels, relatives, means)
        ],
        metric=vectors[0].metric,
        workload_name="average",
    )


def level_gap_ratios(vectors: Sequence[MetricVector]) -> Dict[str, Optional[float]]:
    """Rapport moyen R_suivant / R_précédent entre niveaux adjacents"""
    ratios: Dict[str, List[float]] = {}
    for vector in vectors:
        relatives = _relative_values(vector)
        for (prev, current), (r_prev, r_current) in zip(
            zip(vector.entries, vector.entries[1:]), zip(relatives, relatives[1:])
        ):
            key = f"{prev.level.value}->{current.level.value}"
            ratios.setdefault(key, [])
            if r_prev > 0:
                ratios[key].append(r_current / r_prev)
    return {key: (float(np.mean(values)) if values else None) for key, values in ratios.items()}


# === CORRÉLATIONS ===

def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Coefficient de corrélation de Pearson"""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.size != y.size:
        raise ParameterError(f"Longueurs différentes ({x.size} et {y.size})")
    if x.size < 2:
        raise ParameterError("Au moins deux points sont nécessaires")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelationError("Variance nulle: corrélation indéfinie")
    r, _ = stats.pearsonr(x, y)
    return float(np.clip(r, -1.0, 1.0))


def correlation_matrix(series: Dict[str, Sequence[float]]) -> Tuple[pd.DataFrame, List[str]]:
    """Matrice de Pearson par paires; les paires indéfinies valent None"""
    names = list(series)
    matrix = pd.DataFrame(index=names, columns=names, dtype=object)
    notes = []
    for a in names:
        for b in names:
            try:
                matrix.loc[a, b] = pearson(series[a], series[b])
            except UndefinedCorrelationError as e:
                matrix.loc[a, b] = None
                if a <= b:
                    notes.append(f"{a}/{b}: {e.detail}")
    return matrix, notes


# === DÉCOMPOSITIONS ===

def _check_parent(parent_impact: float) -> None:
    if not 0.0 <= parent_impact <= 1.0:
        raise ParameterError(f"Impact parent hors de [0, 1]: {parent_impact}")


def breakdown_by_tags(trace: Trace, metric: MetricName, parent_impact: float) -> List[BreakdownNode]:
    """Répartir l'impact parent selon la masse d'écarts portée par chaque tag"""
    _check_parent(parent_impact)
    gaps, mask = attributed_gaps(trace, metric)
    tags = trace.tag_ids[mask]
    mass = np.bincount(tags, weights=gaps, minlength=len(trace.tag_table)) if tags.size else np.zeros(0)
    total = float(mass.sum()) if mass.size else 0.0

    used = [int(tag) for tag in np.unique(tags)] if tags.size else []
    if total <= 0 or used in ([], [0]):
        note = None if total > 0 else "aucune masse attribuable"
        name = trace.tag_table[used[0]] if len(used) == 1 else UNTAGGED
        return [BreakdownNode(name=name, impact=parent_impact, method=BreakdownMethod.TAG_SHARE, note=note)]

    children = []
    assigned = 0.0
    for position, tag in enumerate(used):
        if position == len(used) - 1:
            impact = parent_impact - assigned
        else:
            impact = parent_impact * float(mass[tag]) / total
            assigned += impact
        children.append(BreakdownNode(name=trace.tag_table[tag], impact=impact, method=BreakdownMethod.TAG_SHARE))
    logger.info(
        "tag breakdown",
        workload=trace.workload_name,
        metric=MetricName(metric).value,
        shares={child.name: round(child.impact, 6) for child in children},
    )
    return children


def breakdown_differential(
    full: MetricObservation,
    ablated: MetricObservation,
    parent_impact: float,
    component_name: str,
    residual_name: str = "residual",
) -> Tuple[BreakdownNode, BreakdownNode]:
    """Part d'un composant obtenue en le retirant de l'exécution"""
    _check_parent(parent_impact)
    if full.metric != ablated.metric or full.level != ablated.level:
        raise ParameterError("Les observations doivent porter sur la même métrique et le même niveau")
    if not ablated.defined:
        raise UndefinedMetricError(ablated.level.value, ablated.metric.value)
    if not full.defined or not full.value:
        raise DegenerateInputError("La valeur complète doit être strictement positive")

    raw = (full.value - ablated.value) / full.value
    warning = None
    if raw < 0:
        warning = "ablation défavorable: part ramenée à 0"
        logger.warning("differential share clamped", component=component_name, raw_share=raw)
    share = max(0.0, raw)
    component = parent_impact * share
    return (
        BreakdownNode(name=component_name, impact=component, method=BreakdownMethod.DIFFERENTIAL, warning=warning),
        BreakdownNode(name=residual_name, impact=parent_impact - component, method=BreakdownMethod.RESIDUAL),
    )


def kernel_noise_share(
    trace: Trace,
    metric: MetricName = MetricName.INSTR_REUSE_DIST,
    threshold: float = KERNEL_NOISE_THRESHOLD,
) -> KernelNoise:
    """Part de la masse d'écarts portée par les événements en mode noyau"""
    gaps, mask = attributed_gaps(trace, metric)
    kernel = trace.kernel_mode[mask]
    total = float(gaps.sum())
    if total > 0:
        raw = float(gaps[kernel].sum()) / total
    else:
        raw = float(kernel.mean()) if kernel.size else 0.0
    share = 0.0 if raw <= threshold else raw
    return KernelNoise(share=share, raw_share=raw, threshold=threshold)


def build_breakdown_tree(
    workload_name: str,
    impacts: ImpactVector,
    splits: Optional[Dict[Level, List[BreakdownNode]]] = None,
    kernel_noise: Optional[Dict[Level, KernelNoise]] = None,
    tol: float = CONSERVATION_TOL,
) -> BreakdownNode:
    """Arbre racine -> niveaux -> composants.

    Le bruit OS d'un niveau devient un enfant supplémentaire; les autres
    enfants sont réduits d'autant.
    """
    splits = splits or {}
    kernel_noise = kernel_noise or {}
    levels = []
    for entry in impacts.entries:
        children = [child.model_copy(deep=True) for child in splits.get(entry.level, [])]
        if children:
            total = sum(child.impact for child in children)
            if abs(total - entry.impact) > tol:
                raise ParameterError(
                    f"Les composants du niveau {entry.level.value} ne somment pas à son impact "
                    f"({total} != {entry.impact})"
                )
        noise = kernel_noise.get(entry.level)
        if noise is not None:
            if not children:
                children = [BreakdownNode(name=entry.level.value, impact=entry.impact, method=BreakdownMethod.RESIDUAL)]
            keep = 1.0 - noise.share
            for child in children:
                _scale(child, keep)
            children.append(BreakdownNode(
                name=OS_NOISE,
                impact=entry.impact * noise.share,
                method=BreakdownMethod.TAG_SHARE,
                note=f"part brute {noise.raw_share:.6f}",
            ))
        levels.append(BreakdownNode(name=entry.level.value, impact=entry.impact, children=children))

    root = BreakdownNode(name=workload_name, impact=math.fsum(entry.impact for entry in impacts.entries), children=levels)
    if not root.check_conservation(tol):
        raise ParameterError("Arbre de décomposition non conservatif")
    return root


def _scale(node: BreakdownNode, factor: float) -> None:
    node.impact *= factor
    for child in node.children:
        _scale(child, factor)


def normalized_mpki_breakdown(
    impacts: Union[ImpactVector, BreakdownNode, Sequence[Tuple[str, float]]],
    mpki: float,
) -> List[MPKIShare]:
    """MPKI normalisé par composant: impact * MPKI"""
    if mpki < 0:
        raise ParameterError("Le MPKI doit être positif ou nul")
    if isinstance(impacts, ImpactVector):
        rows = [(entry.level.value, entry.impact) for entry in impacts.entries]
    elif isinstance(impacts, BreakdownNode):
        scale = impacts.impact if impacts.impact > 0 else 1.0
        rows = [(leaf.name, leaf.impact / scale) for leaf in impacts.leaves()]
    else:
        rows = list(impacts)
    return [
        MPKIShare(
            component=name,
            impact=impact,
            normalized_mpki=impact * mpki,
            reported_mpki=presentation_round(impact * mpki),
        )
        for name, impact in rows
    ]
