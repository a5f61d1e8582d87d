"""
Configuration de l'application et des journaux
"""

import logging
import os
import sys

import structlog
from dotenv import load_dotenv

load_dotenv()

# Configuration générale
STORE_DIR = os.getenv("WPC_STORE_DIR", ".wpc-store")
LOG_LEVEL = os.getenv("WPC_LOG_LEVEL", "INFO")
LOG_FORMAT = os.getenv("WPC_LOG_FORMAT", "console")
DEFAULT_SEED = int(os.getenv("WPC_DEFAULT_SEED", 42))
DEFAULT_PLATFORM = os.getenv("WPC_PLATFORM", "gold5120t-like")
CHUNK_EVENTS = int(os.getenv("WPC_CHUNK_EVENTS", 1 << 20))

TOOL_NAME = "wpc"


def configure_logging(level: str = LOG_LEVEL, fmt: str = LOG_FORMAT) -> None:
    """Configurer structlog (sortie sur stderr, stdout reste réservé aux rapports)"""
    renderer = (
        structlog.processors.JSONRenderer()
        if fmt == "json"
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.getLevelName(level.upper())
        ),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
