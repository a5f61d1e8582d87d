"""
Commandes CLI, un module par groupe de verbes
"""

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from ..database import ProfileStore
from ..exceptions import ParameterError, WPCIOError
from ..models import Level, MetricFamily, WorkloadKind
from ..schemas import GeneratorConfig
from ..services.report_generator import FORMATS, ReportGenerator, Rows

FAMILY_CHOICES = [family.value for family in MetricFamily]


@dataclass
class CommandContext:
    """Dépendances partagées par les commandes"""
    store: ProfileStore
    reporter: ReportGenerator
    seed: int
    fmt: str = "json"
    output_dir: Optional[Path] = None
    seed_given: bool = False


def output(
    ctx: CommandContext,
    name: str,
    result: Any,
    rows: Optional[Rows] = None,
    template: Optional[str] = None,
    inputs: Optional[Dict[str, Any]] = None,
) -> None:
    """Écrire le rapport sur stdout et, si demandé, dans le répertoire de sortie"""
    fmt = ctx.fmt
    if (fmt == "csv" and rows is None) or (fmt == "text" and template is None):
        fmt = "json"
    sys.stdout.write(ctx.reporter.render(fmt, result, rows, template, inputs))
    if ctx.output_dir is not None:
        ctx.reporter.output_dir = ctx.output_dir
        ctx.reporter.emit(name, FORMATS, result, rows, template, inputs)


# === ARGUMENTS ===

def parse_int_list(value: str) -> List[int]:
    try:
        return [int(item) for item in value.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Liste d'entiers invalide: {value}")


def parse_levels(value: str) -> List[Level]:
    try:
        return [Level(item.strip().upper()) for item in value.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Niveaux invalides: {value} (IR, ISA, UARCH)")


def workload_kind(family: str) -> WorkloadKind:
    return MetricFamily(family).workload_kind


def add_generator_arguments(parser: argparse.ArgumentParser, with_x: bool = True) -> None:
    """Options communes décrivant une charge de référence"""
    parser.add_argument("--kind", choices=FAMILY_CHOICES, required=True, help="Famille de la charge")
    if with_x:
        parser.add_argument("--x", type=int, help="Paramètre contrôlé X")
    parser.add_argument("--iters", type=int, help="Nombre d'itérations")
    parser.add_argument("--b", type=int, help="Instructions par fonction")
    parser.add_argument("--h", type=int, help="Instructions de boucle par itération")
    parser.add_argument("--m", type=int, help="Borne du seuil de branchement")
    parser.add_argument("--element-stride", type=int, dest="element_stride")
    parser.add_argument("--function-stride", type=int, dest="function_stride")
    parser.add_argument("--harness-mem", type=int, dest="harness_mem")
    parser.add_argument("--level", choices=[Level.IR.value, Level.ISA.value], help="Niveau inscrit dans la trace")
    parser.add_argument("--gen-config", dest="gen_config", help="Fichier JSON de GeneratorConfig")


_GENERATOR_FLAGS = {
    "iters": "iterations",
    "b": "b",
    "h": "h",
    "m": "m",
    "element_stride": "element_stride",
    "function_stride": "function_stride",
    "harness_mem": "harness_mem",
    "level": "level",
}


def generator_config(args: argparse.Namespace, ctx: CommandContext, x: Optional[int] = None) -> GeneratorConfig:
    """GeneratorConfig à partir du fichier éventuel puis des options"""
    values: Dict[str, Any] = {}
    if getattr(args, "gen_config", None):
        try:
            values.update(GeneratorConfig.model_validate_json(
                Path(args.gen_config).read_text(encoding="utf-8")
            ).model_dump())
        except OSError as e:
            raise WPCIOError(f"Impossible de lire {args.gen_config}: {e}") from e
    values["workload_kind"] = workload_kind(args.kind)
    values.setdefault("seed", ctx.seed)
    if ctx.seed_given:
        values["seed"] = ctx.seed
    for flag, field in _GENERATOR_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[field] = value
    if x is not None:
        values["x"] = x
    elif getattr(args, "x", None) is not None:
        values["x"] = args.x
    values.setdefault("iterations", 1_000_000)
    if "x" not in values:
        raise ParameterError("--x est requis")
    try:
        return GeneratorConfig(**values)
    except ValidationError as e:
        raise ParameterError(f"Configuration de charge invalide: {e}") from e
