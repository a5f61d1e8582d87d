"""
Tests pour la passe complète observation, référence, fusion
"""

import json

import pytest
from pydantic import ValidationError

from ..exceptions import MissingDataError, ParameterError, WPCIOError
from ..models import Level, MetricName
from ..schemas import GeneratorConfig, PipelineConfig
from ..services.pipeline import load_pipeline_config, run_pipeline
from ..services.refgen import finite_horizon_prediction, generate
from ..services.trace_io import save_trace

pytestmark = pytest.mark.integration

REFERENCE = {"workload_kind": "InstructionLocality", "x": 50, "iterations": 2000}


@pytest.fixture
def target_traces(tmp_path):
    """Traces IR et ISA d'une charge d'instructions (x = 200)"""
    paths = {}
    for level in (Level.IR, Level.ISA):
        cfg = GeneratorConfig(workload_kind="InstructionLocality", x=200, iterations=2000, level=level)
        path = tmp_path / f"app-{level.value}.wpc"
        save_trace(generate(cfg), path)
        paths[level] = str(path)
    return paths


def make_config(target_traces, /, **overrides):
    values = {
        "workload_name": "app",
        "references": {"inst": REFERENCE},
        "target_traces": target_traces,
        **overrides,
    }
    return PipelineConfig(**values)


class TestRunPipeline:
    """Tests pour run_pipeline"""

    def test_simulated_uarch(self, target_traces, store, reporter):
        """Test niveau UARCH simulé à partir de la trace ISA"""
        impacts = run_pipeline(make_config(target_traces, formats=["json", "text"]), store, reporter)
        vector = impacts["inst"]
        assert [entry.level for entry in vector.entries] == [Level.IR, Level.ISA, Level.UARCH]
        assert sum(entry.impact for entry in vector.entries) == pytest.approx(1.0)
        assert all(entry.relative > 1 for entry in vector.entries[:2])

        target = GeneratorConfig(workload_kind="InstructionLocality", x=200, iterations=2000)
        expected = finite_horizon_prediction(target)
        assert store.get("app", Level.IR, MetricName.INSTR_REUSE_DIST).value == pytest.approx(expected, rel=0.05)
        assert store.get_sim_result("app", "gold5120t-like").instructions == 2000 * 7
        assert store.get("ref-InstructionLocality-x50", Level.ISA, MetricName.INSTR_REUSE_DIST).defined

        names = sorted(path.name for path in reporter.output_dir.iterdir())
        assert names == ["app-inst-impacts.json", "app-inst-impacts.txt"]

    def test_without_reporter(self, target_traces, store):
        impacts = run_pipeline(make_config(target_traces), store)
        assert set(impacts) == {"inst"}

    def test_counters(self, target_traces, store, tmp_path):
        """Test niveau UARCH lu depuis les compteurs"""
        counters = tmp_path / "counters.csv"
        counters.write_text(
            "workload,instructions,l1i_misses,l1d_misses,branch_mispredictions,config\n"
            "other,1000,1,1,1,gold\n"
            "app,1000000,16900,2000,500,gold\n",
            encoding="utf-8",
        )
        impacts = run_pipeline(make_config(target_traces, counters_path=str(counters)), store)
        uarch = impacts["inst"].entries[-1]
        assert uarch.level == Level.UARCH
        assert store.get("app", Level.UARCH, MetricName.L1I_MPKI, "gold").value == pytest.approx(16.9)
        with pytest.raises(MissingDataError):
            store.get_sim_result("app", "gold5120t-like")

    def test_counters_without_workload(self, target_traces, store, tmp_path):
        counters = tmp_path / "counters.csv"
        counters.write_text(
            "workload,instructions,l1i_misses,l1d_misses,branch_mispredictions,config\n"
            "other,1000,1,1,1,gold\n",
            encoding="utf-8",
        )
        with pytest.raises(MissingDataError) as exc:
            run_pipeline(make_config(target_traces, counters_path=str(counters)), store)
        assert exc.value.key[0] == "app"

    def test_reference_kind_mismatch(self, target_traces, store):
        data_reference = {"workload_kind": "DataLocality", "x": 50, "iterations": 100}
        with pytest.raises(ParameterError):
            run_pipeline(make_config(target_traces, references={"inst": data_reference}), store)

    def test_single_trace_level(self, target_traces, store):
        """Test deux niveaux: ISA et UARCH"""
        impacts = run_pipeline(make_config({Level.ISA: target_traces[Level.ISA]}), store)
        assert [entry.level for entry in impacts["inst"].entries] == [Level.ISA, Level.UARCH]


class TestPipelineConfig:
    """Tests pour le chargement de la configuration"""

    def test_load(self, target_traces, tmp_path):
        path = tmp_path / "pipeline.json"
        path.write_text(json.dumps({
            "workload_name": "app",
            "references": {"inst": REFERENCE},
            "target_traces": {level.value: trace for level, trace in target_traces.items()},
        }), encoding="utf-8")
        cfg = load_pipeline_config(path)
        assert cfg.references["inst"].x == 50
        assert set(cfg.target_traces) == {Level.IR, Level.ISA}
        assert cfg.formats == ["json", "text"]

    def test_missing_file(self, tmp_path):
        with pytest.raises(WPCIOError):
            load_pipeline_config(tmp_path / "absent.json")

    @pytest.mark.parametrize("overrides", [
        {"references": {"cache": REFERENCE}},
        {"target_traces": {}},
        {"colour": "red"},
    ])
    def test_invalid(self, target_traces, overrides):
        with pytest.raises(ValidationError):
            make_config(target_traces, **overrides)
