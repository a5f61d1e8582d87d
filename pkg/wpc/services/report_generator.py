"""
Service de génération de rapports (JSON, CSV, texte)
"""

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import pandas as pd
import structlog
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from .. import __version__
from ..config import TOOL_NAME
from ..database import atomic_write_text
from ..exceptions import ParameterError, WPCIOError

logger = structlog.get_logger(__name__)

TEMPLATES_DIR = Path(__file__).resolve().parent.parent / "templates"
FORMATS = ("json", "csv", "text")

Rows = Union[pd.DataFrame, Sequence[Dict[str, Any]]]


class ReportGenerator:
    """Générateur de rapports avec bloc de provenance"""

    def __init__(self, output_dir: Optional[Path] = None, timestamp: bool = True):
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.timestamp = timestamp

        # Configuration Jinja2
        self.jinja_env = Environment(
            loader=FileSystemLoader(str(TEMPLATES_DIR)),
            autoescape=False,
            trim_blocks=True,
            lstrip_blocks=True,
            undefined=StrictUndefined,
            keep_trailing_newline=True,
        )
        self.jinja_env.filters["fmt"] = _fmt

    def provenance(self, inputs: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        block: Dict[str, Any] = {"tool": TOOL_NAME, "version": __version__}
        if self.timestamp:
            block["generated_at"] = datetime.now(timezone.utc).isoformat()
        block["inputs"] = inputs or {}
        return block

    # Rendu
    def render_json(self, result: Any, inputs: Optional[Dict[str, Any]] = None) -> str:
        document = {"provenance": self.provenance(inputs), "result": result}
        return json.dumps(document, indent=2, sort_keys=False, default=str) + "\n"

    def render_csv(self, rows: Rows) -> str:
        frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
        return frame.to_csv(index=False)

    def render_text(self, template: str, context: Dict[str, Any]) -> str:
        return self.jinja_env.get_template(template).render(**context)

    def render(
        self,
        fmt: str,
        result: Any,
        rows: Optional[Rows] = None,
        template: Optional[str] = None,
        inputs: Optional[Dict[str, Any]] = None,
    ) -> str:
        if fmt == "json":
            return self.render_json(result, inputs)
        if fmt == "csv":
            if rows is None:
                raise ParameterError("Pas de table CSV pour ce rapport")
            return self.render_csv(rows)
        if fmt == "text":
            if template is None:
                raise ParameterError("Pas de modèle texte pour ce rapport")
            return self.render_text(template, {"result": result, "rows": _records(rows)})
        raise ParameterError(f"Format non supporté: {fmt}")

    # Écriture
    def write(self, name: str, fmt: str, content: str) -> Path:
        if self.output_dir is None:
            raise WPCIOError("Aucun répertoire de sortie configuré")
        suffix = {"json": ".json", "csv": ".csv", "text": ".txt"}[fmt]
        path = self.output_dir / f"{name}{suffix}"
        atomic_write_text(path, content)
        logger.info("report written", path=str(path), format=fmt)
        return path

    def emit(
        self,
        name: str,
        formats: Iterable[str],
        result: Any,
        rows: Optional[Rows] = None,
        template: Optional[str] = None,
        inputs: Optional[Dict[str, Any]] = None,
    ) -> List[Path]:
        """Écrire le rapport dans chacun des formats demandés"""
        paths = []
        for fmt in formats:
            if fmt == "csv" and rows is None:
                continue
            paths.append(self.write(name, fmt, self.render(fmt, result, rows, template, inputs)))
        return paths


def _records(rows: Optional[Rows]) -> List[Dict[str, Any]]:
    if rows is None:
        return []
    if isinstance(rows, pd.DataFrame):
        return rows.to_dict(orient="records")
    return list(rows)


def _fmt(value: Any, digits: int = 4) -> str:
    if value is None:
        return "n/d"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)
