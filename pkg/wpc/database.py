"""
Store de profils sur fichiers (observations et résultats de simulation)
"""

import json
import os
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple
from urllib.parse import quote, unquote

import structlog
from pydantic import ValidationError

from .config import STORE_DIR
from .exceptions import MissingDataError, ParameterError, WPCIOError
from .models import Level, MetricName
from .schemas import MetricObservation, SimResult

logger = structlog.get_logger(__name__)

INDEX_FILE = "index.json"
OBSERVATIONS_DIR = "observations"
SIMULATIONS_DIR = "simulations"


def _segment(value: str) -> str:
    """Nom de fichier réversible et sans collision"""
    return quote(value, safe="") or "%00"


def _unsegment(segment: str) -> str:
    return "" if segment == "%00" else unquote(segment)


def atomic_write_text(path: Path, content: str) -> None:
    """Écrire dans un fichier temporaire puis renommer"""
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_name = None
    try:
        fd, temp_name = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(content)
        os.replace(temp_name, path)
    except OSError as e:
        if temp_name and os.path.exists(temp_name):
            os.remove(temp_name)
        raise WPCIOError(f"Écriture impossible de {path}: {e}") from e


class ProfileStore:
    """Observations indexées par (workload, level, metric, config)"""

    def __init__(self, root=STORE_DIR):
        self.root = Path(root)

    # Chemins
    def observation_path(self, workload: str, level: Level, metric: MetricName, config: str) -> Path:
        return (
            self.root / OBSERVATIONS_DIR / _segment(workload) / Level(level).value
            / f"{MetricName(metric).value}__{_segment(config)}.json"
        )

    def simulation_path(self, workload: str, config: str) -> Path:
        return self.root / SIMULATIONS_DIR / f"{_segment(workload)}__{_segment(config)}.json"

    # Écriture
    def _write(self, observation: MetricObservation) -> Path:
        path = self.observation_path(*observation.key)
        atomic_write_text(path, observation.model_dump_json(by_alias=True, indent=2))
        logger.info(
            "observation stored",
            workload=observation.workload_name,
            level=observation.level.value,
            metric=observation.metric.value,
            config=observation.config_label,
        )
        return path

    def put(self, observation: MetricObservation) -> Path:
        path = self._write(observation)
        self.rebuild_index()
        return path

    def put_many(self, observations: Iterable[MetricObservation]) -> List[Path]:
        """Écrire un lot d'observations; l'index est reconstruit une seule fois"""
        paths = [self._write(observation) for observation in observations]
        if paths:
            self.rebuild_index()
        return paths

    def put_sim_result(self, result: SimResult) -> Path:
        path = self.simulation_path(result.workload_name, result.config_label)
        atomic_write_text(path, result.model_dump_json(by_alias=True, indent=2))
        logger.info("simulation stored", workload=result.workload_name, config=result.config_label)
        return path

    # Lecture
    def _load(self, path: Path) -> MetricObservation:
        try:
            return MetricObservation.model_validate_json(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise WPCIOError(f"Lecture impossible de {path}: {e}") from e
        except ValidationError as e:
            raise WPCIOError(f"Observation illisible {path}: {e}") from e

    def get(self, workload: str, level: Level, metric: MetricName, config: str = "default") -> MetricObservation:
        path = self.observation_path(workload, level, metric, config)
        if not path.exists():
            key = (workload, Level(level).value, MetricName(metric).value, config)
            raise MissingDataError(f"Entrée absente du store: {key}", key=key)
        return self._load(path)

    def find(
        self, workload: str, level: Level, metric: MetricName, config: Optional[str] = None
    ) -> MetricObservation:
        """Comme get; sans config, l'entrée doit être unique"""
        if config is not None:
            return self.get(workload, level, metric, config)
        matches = self.list(workload=workload, level=level, metric=metric)
        if not matches:
            key = (workload, Level(level).value, MetricName(metric).value, "*")
            raise MissingDataError(f"Entrée absente du store: {key}", key=key)
        if len(matches) > 1:
            configs = sorted(observation.config_label for observation in matches)
            raise ParameterError(f"Plusieurs configurations pour {workload}/{Level(level).value}: {configs}")
        return matches[0]

    def get_sim_result(self, workload: str, config: str) -> SimResult:
        path = self.simulation_path(workload, config)
        if not path.exists():
            raise MissingDataError(f"Simulation absente du store: {(workload, config)}", key=(workload, config))
        try:
            return SimResult.model_validate_json(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise WPCIOError(f"Lecture impossible de {path}: {e}") from e

    def list(
        self,
        workload: Optional[str] = None,
        level: Optional[Level] = None,
        metric: Optional[MetricName] = None,
    ) -> List[MetricObservation]:
        """Observations filtrées; seuls les fichiers dont la clé correspond sont lus"""
        selected = []
        for path in self._scan():
            key_workload, key_level, key_metric, _ = self.key_from_path(path)
            if workload is not None and key_workload != workload:
                continue
            if level is not None and key_level != Level(level):
                continue
            if metric is not None and key_metric != MetricName(metric):
                continue
            selected.append(self._load(path))
        return selected

    # Index
    def _scan(self) -> List[Path]:
        base = self.root / OBSERVATIONS_DIR
        if not base.exists():
            return []
        return sorted(path for path in base.glob("*/*/*.json") if not path.name.startswith(".tmp-"))

    def key_from_path(self, path: Path) -> Tuple[str, Level, MetricName, str]:
        """Clé (workload, level, metric, config) encodée dans le chemin"""
        try:
            level = Level(path.parent.name)
        except ValueError as e:
            raise WPCIOError(f"Niveau inconnu dans le chemin {path}") from e
        stem = path.name[: -len(".json")]
        for metric in MetricName:
            prefix = f"{metric.value}__"
            if stem.startswith(prefix):
                return _unsegment(path.parent.parent.name), level, metric, _unsegment(stem[len(prefix):])
        raise WPCIOError(f"Métrique inconnue dans le chemin {path}")

    def rebuild_index(self) -> List[Dict[str, str]]:
        """Reconstruire l'index à partir des noms de fichiers du répertoire"""
        entries = []
        for path in self._scan():
            workload, level, metric, config = self.key_from_path(path)
            entries.append({
                "workload": workload,
                "level": level.value,
                "metric": metric.value,
                "config": config,
                "path": path.relative_to(self.root).as_posix(),
            })
        atomic_write_text(self.root / INDEX_FILE, json.dumps({"entries": entries}, indent=2))
        return entries

    def index(self) -> List[Dict[str, str]]:
        path = self.root / INDEX_FILE
        if not path.exists():
            return []
        try:
            return json.loads(path.read_text(encoding="utf-8"))["entries"]
        except (OSError, ValueError, KeyError) as e:
            raise WPCIOError(f"Index illisible {path}: {e}") from e


def get_store(root: Optional[str] = None) -> ProfileStore:
    """Store configuré (répertoire WPC_STORE_DIR par défaut)"""
    return ProfileStore(root or STORE_DIR)
