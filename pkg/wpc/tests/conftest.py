"""
Configuration des tests
"""

import json
from typing import Callable, List

import pytest

from ..config import configure_logging
from ..database import ProfileStore
from ..main import main
from ..models import EventKind, Level, Trace, TraceEvent
from ..schemas import GeneratorConfig
from ..services.report_generator import ReportGenerator

configure_logging("WARNING")


@pytest.fixture(autouse=True)
def _reset_logging():
    """Rebinder structlog sur le stderr courant (main() peut l'avoir lié à un flux capsys fermé)"""
    configure_logging("WARNING")
    yield


@pytest.fixture(scope="function")
def store(tmp_path) -> ProfileStore:
    """Store de profils vide dans un répertoire temporaire"""
    return ProfileStore(tmp_path / "store")


@pytest.fixture(scope="function")
def reporter(tmp_path) -> ReportGenerator:
    """Générateur de rapports sans horodatage"""
    return ReportGenerator(output_dir=tmp_path / "reports", timestamp=False)


@pytest.fixture
def small_trace() -> Trace:
    """Trace ISA de quelques événements (deux tags, un événement noyau)"""
    events = [
        TraceEvent(EventKind.COMPUTE, 0x1000, tag_id=1),
        TraceEvent(EventKind.LOAD, 0x1004, 0x8000, tag_id=1),
        TraceEvent(EventKind.BRANCH, 0x1008, 0x1000, taken=True, tag_id=2),
        TraceEvent(EventKind.COMPUTE, 0x1000, tag_id=1),
        TraceEvent(EventKind.STORE, 0x1004, 0x8000, tag_id=2),
        TraceEvent(EventKind.BRANCH, 0x1008, 0x1000, taken=False, kernel_mode=True, tag_id=2),
    ]
    return Trace.from_events(Level.ISA, "small", ("untagged", "app", "lib"), events, seed=3)


@pytest.fixture
def empty_trace() -> Trace:
    return Trace(Level.IR, "empty", ("untagged",))


@pytest.fixture
def generator_config() -> Callable[..., GeneratorConfig]:
    """Fabrique de GeneratorConfig à petite échelle"""
    def _make(kind: str = "inst", x: int = 100, iterations: int = 20_000, **overrides) -> GeneratorConfig:
        kinds = {
            "inst": "InstructionLocality",
            "data": "DataLocality",
            "branch": "BranchLocality",
        }
        return GeneratorConfig(workload_kind=kinds[kind], x=x, iterations=iterations, **overrides)
    return _make


class CliResult:
    """Résultat d'un appel à la CLI"""

    def __init__(self, exit_code: int, out: str, err: str):
        self.exit_code = exit_code
        self.out = out
        self.err = err

    @property
    def json(self):
        return json.loads(self.out)

    @property
    def result(self):
        return self.json["result"]


@pytest.fixture
def cli(tmp_path, capsys) -> Callable[..., CliResult]:
    """Appeler main() avec un store temporaire et sans horodatage"""
    store_dir = tmp_path / "store"

    def _run(*args: str) -> CliResult:
        argv: List[str] = ["--store", str(store_dir), "--no-timestamp", "--log-level", "WARNING", *args]
        capsys.readouterr()
        code = main(argv)
        captured = capsys.readouterr()
        return CliResult(code, captured.out, captured.err)

    _run.store = ProfileStore(store_dir)
    return _run
