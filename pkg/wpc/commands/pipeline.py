"""
Commande de passe complète: run
"""

import argparse
from pathlib import Path

from ..services.pipeline import load_pipeline_config, run_pipeline
from . import CommandContext, output


def cmd_run(args: argparse.Namespace, ctx: CommandContext) -> int:
    """Exécuter une passe complète à partir d'une configuration JSON"""
    cfg = load_pipeline_config(args.config)
    ctx.reporter.output_dir = Path(args.output_dir or cfg.output_dir)
    impacts = run_pipeline(cfg, ctx.store, ctx.reporter)
    result = {
        "workload": cfg.workload_name,
        "impacts": {family: vector.model_dump(mode="json") for family, vector in impacts.items()},
    }
    rows = [
        {"metric": family, "level": entry.level.value, "relative": entry.relative, "impact": entry.impact}
        for family, vector in impacts.items()
        for entry in vector.entries
    ]
    output(ctx, f"{cfg.workload_name}-summary", result, rows=rows, inputs={"command": "run", "config": str(args.config)})
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("run", help="Passe complète observation, référence, fusion")
    parser.add_argument("--config", required=True, help="Fichier JSON de PipelineConfig")
    parser.add_argument("--output-dir", dest="output_dir", help="Répertoire des rapports")
    parser.set_defaults(handler=cmd_run)
