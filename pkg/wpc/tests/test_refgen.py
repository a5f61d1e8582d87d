"""
Tests unitaires pour les charges de référence
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ..exceptions import ParameterError
from ..models import EventKind, Level, WorkloadKind
from ..schemas import CalibrationRow, GeneratorConfig
from ..services.refgen import (
    CODE_BASE,
    DATA_BASE,
    STACK_BASE,
    average_relative_error,
    calibrate_x,
    expected_measurement,
    finite_horizon_prediction,
    function_span,
    generate,
    harness_base,
    measure,
    relative_error,
    theoretical_prediction,
)


class TestGenerators:
    """Tests pour la structure des traces générées"""

    def test_instruction_layout(self, generator_config):
        """Test boucle puis corps de fonction de b instructions"""
        cfg = generator_config("inst", x=16, iterations=100, h=2, b=5)
        trace = generate(cfg)
        assert len(trace) == 100 * 7
        grid = trace.instr_addrs.reshape(100, 7)
        assert (grid[:, :2] < CODE_BASE).all()
        entries = grid[:, 2]
        assert ((entries - CODE_BASE) % 32 == 0).all()
        assert ((entries - CODE_BASE) // 32 < 16).all()
        assert (np.diff(grid[:, 2:].astype(np.int64), axis=1) == 4).all()
        assert (trace.kinds == EventKind.COMPUTE).all()
        assert trace.workload_name == "ref-InstructionLocality-x16"
        assert trace.seed == 42

    def test_data_layout(self, generator_config):
        cfg = generator_config("data", x=64, iterations=500, h=1, harness_mem=2)
        trace = generate(cfg)
        grid = trace.events.reshape(500, 4)
        assert (grid["kind"][:, 0] == EventKind.COMPUTE).all()
        assert grid["kind"][0, 1:].tolist() == [EventKind.LOAD, EventKind.STORE, EventKind.LOAD]
        assert (grid["data_addr"][:, 1] == STACK_BASE).all()
        array = grid["data_addr"][:, 3]
        assert array.min() >= DATA_BASE
        assert array.max() < DATA_BASE + 64 * 8
        assert ((array - DATA_BASE) % 8 == 0).all()

    @pytest.mark.parametrize("kind,x", [("inst", 50), ("data", 50), ("branch", 300)])
    def test_user_mode_only(self, generator_config, kind, x):
        trace = generate(generator_config(kind, x=x, iterations=1_000, harness_mem=2 if kind == "data" else 0))
        assert not trace.kernel_mode.any()

    def test_long_function_bodies(self, generator_config):
        """Test b * 4 > function_stride: points d'entrée espacés sans recouvrement"""
        cfg = generator_config("inst", x=16, iterations=500, b=9)
        assert function_span(cfg) == 64
        grid = generate(cfg).instr_addrs.reshape(500, 11)
        entries = grid[:, 2]
        assert ((entries - CODE_BASE) % 64 == 0).all()
        bodies = {int(entry): tuple(row) for entry, row in zip(entries, grid[:, 2:].tolist())}
        addresses = [address for body in bodies.values() for address in body]
        assert len(addresses) == len(set(addresses))

    def test_large_harness(self, generator_config):
        """Test h + harness_mem au-delà de 256 octets: la zone descend par lignes"""
        cfg = generator_config("data", x=10, iterations=100, h=100, harness_mem=20)
        grid = generate(cfg).instr_addrs.reshape(100, 121)
        harness = grid[0, :120]
        assert harness_base(cfg) == CODE_BASE - 512
        assert harness_base(generator_config("data", x=10)) == CODE_BASE - 256
        assert len(set(harness.tolist())) == 120
        assert (harness < CODE_BASE).all()
        assert harness.min() >= harness_base(cfg)

    def test_branch_layout(self, generator_config):
        cfg = generator_config("branch", x=0, iterations=200)
        trace = generate(cfg)
        assert trace.branch_mask.sum() == 200
        assert not trace.taken.any()
        assert len(np.unique(trace.instr_addrs[trace.branch_mask])) == 1

    def test_level_recorded(self, generator_config):
        trace = generate(generator_config("inst", x=4, iterations=10, level=Level.ISA))
        assert trace.level == Level.ISA

    def test_determinism(self, generator_config):
        cfg = generator_config("branch", x=300, iterations=5_000, seed=11)
        assert generate(cfg) == generate(cfg)

    def test_invalid_parameters(self, generator_config):
        """Test paramètres rejetés"""
        with pytest.raises(ParameterError):
            generate(generator_config("data", x=0))
        with pytest.raises(ParameterError):
            generate(generator_config("branch", x=1001, m=1000))
        with pytest.raises(ParameterError):
            generate(generator_config("inst", x=10, function_stride=24))
        with pytest.raises(ParameterError):
            generate(generator_config("inst", x=10, level=Level.UARCH))


class TestPredictions:
    """Tests pour les prédictions théoriques"""

    def test_instruction(self, generator_config):
        cfg = generator_config("inst", x=400)
        assert theoretical_prediction(cfg) == 2000
        assert expected_measurement(cfg) == 2002

    def test_data(self, generator_config):
        cfg = generator_config("data", x=800, harness_mem=3)
        assert theoretical_prediction(cfg) == 800
        assert expected_measurement(cfg) == 803

    @pytest.mark.parametrize("x,expected", [(0, 0.0), (1000, 0.0), (500, 1.0), (250, 0.5), (60, 0.12)])
    def test_branch(self, generator_config, x, expected):
        assert theoretical_prediction(generator_config("branch", x=x)) == pytest.approx(expected)

    @pytest.mark.parametrize("kind", ["inst", "data"])
    def test_monotonic_in_x(self, generator_config, kind):
        predictions = [theoretical_prediction(generator_config(kind, x=x)) for x in (1, 2, 10, 100, 1000, 10_000)]
        assert predictions == sorted(predictions)
        assert len(set(predictions)) == len(predictions)

    @settings(deadline=None)
    @given(st.integers(0, 1000))
    def test_branch_symmetry(self, x):
        """Test entropie symétrique autour de m/2"""
        def predict(value):
            return theoretical_prediction(GeneratorConfig(workload_kind="BranchLocality", x=value, iterations=1, m=1000))
        assert predict(x) == pytest.approx(predict(1000 - x), abs=1e-12)

    def test_finite_horizon_converges(self, generator_config):
        """Test limite n -> infini"""
        cfg = generator_config("inst", x=50, iterations=200_000)
        assert finite_horizon_prediction(cfg) == pytest.approx(expected_measurement(cfg), rel=1e-3)

    def test_finite_horizon_censoring(self, generator_config):
        cfg = generator_config("data", x=100_000, iterations=1_000_000, h=0)
        assert finite_horizon_prediction(cfg) < 0.95 * theoretical_prediction(cfg)

    def test_relative_error(self):
        assert relative_error(102, 100) == pytest.approx(0.02)
        assert relative_error(0, 0) == 0.0
        assert relative_error(1, 0) == float("inf")

    def test_average_relative_error(self):
        rows = [
            CalibrationRow(x=10, predicted=1, measured=1.5, relative_error=0.5, qualifies=False),
            CalibrationRow(x=100, predicted=1, measured=1.01, relative_error=0.01, qualifies=True),
            CalibrationRow(x=1000, predicted=1, measured=1.03, relative_error=0.03, qualifies=False),
        ]
        assert average_relative_error(rows) == pytest.approx(0.18)
        assert average_relative_error(rows, min_x=100) == pytest.approx(0.02)
        assert average_relative_error(rows, min_x=5000) is None


class TestMeasurement:
    """Tests pour la concordance mesure / prédiction à petite échelle"""

    def test_instruction(self, generator_config):
        cfg = generator_config("inst", x=100, iterations=20_000)
        measured = measure(generate(cfg), WorkloadKind.INSTRUCTION)
        assert relative_error(measured, finite_horizon_prediction(cfg)) < 0.03

    def test_data(self, generator_config):
        cfg = generator_config("data", x=100, iterations=20_000)
        measured = measure(generate(cfg), WorkloadKind.DATA)
        assert relative_error(measured, finite_horizon_prediction(cfg)) < 0.03

    def test_data_with_harness(self, generator_config):
        cfg = generator_config("data", x=100, iterations=20_000, harness_mem=3)
        measured = measure(generate(cfg), WorkloadKind.DATA)
        assert relative_error(measured, expected_measurement(cfg)) < 0.03

    def test_long_function_bodies(self, generator_config):
        """Test b = 9 avec function_stride = 32: distance b * x + h conservée"""
        cfg = generator_config("inst", x=100, iterations=20_000, b=9)
        measured = measure(generate(cfg), WorkloadKind.INSTRUCTION)
        assert relative_error(measured, finite_horizon_prediction(cfg)) < 0.03

    def test_large_harness(self, generator_config):
        cfg = generator_config("inst", x=50, iterations=20_000, h=40)
        measured = measure(generate(cfg), WorkloadKind.INSTRUCTION)
        assert relative_error(measured, finite_horizon_prediction(cfg)) < 0.03

    def test_branch(self, generator_config):
        cfg = generator_config("branch", x=250, iterations=20_000)
        measured = measure(generate(cfg), WorkloadKind.BRANCH)
        assert measured == pytest.approx(0.5, abs=0.03)


class TestCalibration:
    """Tests pour la calibration de X"""

    def test_smallest_qualifying(self):
        """Test choix du plus petit X sous 2 %"""
        result = calibrate_x(WorkloadKind.INSTRUCTION, [10, 50, 200], iterations=100_000, seed=1)
        assert [row.x for row in result.rows] == [10, 50, 200]
        assert result.rows[0].qualifies is False
        assert result.chosen_x == 50
        assert result.calibrated

    def test_no_candidate(self):
        result = calibrate_x(WorkloadKind.INSTRUCTION, [1, 2], iterations=5_000, seed=1)
        assert result.chosen_x is None
        assert len(result.rows) == 2

    def test_repeats(self, generator_config):
        base = generator_config("data", x=1, iterations=1_000)
        result = calibrate_x(WorkloadKind.DATA, [20, 40], iterations=10_000, seed=5, base=base, repeats=2)
        assert all(row.measured is not None for row in result.rows)

    def test_invalid_candidates(self):
        with pytest.raises(ParameterError):
            calibrate_x(WorkloadKind.DATA, [100, 50], iterations=100, seed=1)
        with pytest.raises(ParameterError):
            calibrate_x(WorkloadKind.DATA, [], iterations=100, seed=1)
