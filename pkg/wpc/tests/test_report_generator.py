"""
Tests unitaires pour le générateur de rapports
"""

import json

import pandas as pd
import pytest

from .. import __version__
from ..exceptions import ParameterError, WPCIOError
from ..services.report_generator import ReportGenerator


class TestReportGenerator:
    """Tests pour ReportGenerator"""

    def test_provenance(self, reporter):
        block = reporter.provenance({"seed": 7})
        assert block == {"tool": "wpc", "version": __version__, "inputs": {"seed": 7}}

    def test_timestamp(self):
        assert "generated_at" in ReportGenerator().provenance()

    def test_json_deterministic(self, reporter):
        """Test rapports identiques sans horodatage"""
        first = reporter.render_json({"a": 1.5}, {"seed": 1})
        second = reporter.render_json({"a": 1.5}, {"seed": 1})
        assert first == second
        assert json.loads(first)["result"] == {"a": 1.5}

    def test_csv(self, reporter):
        content = reporter.render("csv", None, rows=[{"x": 1, "mpki": 0.5}, {"x": 2, "mpki": 4.0}])
        assert content.splitlines() == ["x,mpki", "1,0.5", "2,4.0"]

    def test_csv_from_dataframe(self, reporter):
        frame = pd.DataFrame({"level": ["IR"], "r": [0.9]})
        assert reporter.render_csv(frame).splitlines()[0] == "level,r"

    def test_csv_without_rows(self, reporter):
        with pytest.raises(ParameterError):
            reporter.render("csv", {"a": 1})

    def test_text_template(self, reporter):
        result = {
            "kind": "DataLocality",
            "config": "gold5120t-like",
            "knee": {"knee_x": 4000, "floor": 0.01, "theta": 5.0},
        }
        rows = [{"x": 1000, "reuse_metric": 1000.0, "l1i_mpki": 0.0, "l1d_mpki": 0.01, "branch_mpki": 0.0}]
        text = reporter.render("text", result, rows=rows, template="sweep.txt.j2")
        assert "coude : x = 4000" in text
        assert "0.010" in text

    def test_text_undefined_value(self, reporter):
        result = [{"workload": "w", "level": "IR", "metric": "BranchEntropy", "value": None, "defined": False,
                   "samples": 0, "config": "default"}]
        text = reporter.render("text", result, template="observations.txt.j2")
        assert "n/d" in text
        assert "non définie" in text

    def test_unknown_format(self, reporter):
        with pytest.raises(ParameterError):
            reporter.render("xml", {})

    def test_emit(self, reporter):
        """Test écriture dans chaque format"""
        result = {"workload": "w", "config": "c", "instructions": 10, "l1i_misses": 1, "l1i_accesses": 10,
                  "l1i_mpki": 100.0, "l1d_misses": 0, "l1d_accesses": 0, "l1d_mpki": 0.0,
                  "mispredictions": 0, "branches": 0, "branch_mpki": 0.0}
        paths = reporter.emit("simulation", ["json", "csv", "text"], result, rows=[result],
                              template="simulation.txt.j2")
        assert [path.name for path in paths] == ["simulation.json", "simulation.csv", "simulation.txt"]
        assert all(path.exists() for path in paths)

    def test_emit_skips_csv_without_rows(self, reporter):
        paths = reporter.emit("r", ["json", "csv"], {"a": 1})
        assert [path.suffix for path in paths] == [".json"]

    def test_write_without_directory(self):
        with pytest.raises(WPCIOError):
            ReportGenerator(timestamp=False).write("r", "json", "{}")
