"""
Tests unitaires pour les modèles et schémas
"""

import numpy as np
import pytest
from pydantic import ValidationError

from ..exceptions import ParameterError
from ..models import (
    EVENT_DTYPE,
    EventKind,
    Level,
    MetricFamily,
    MetricName,
    Trace,
    TraceEvent,
    WorkloadKind,
)
from ..schemas import (
    BreakdownNode,
    CacheConfig,
    GeneratorConfig,
    LevelEntry,
    MetricObservation,
    MetricVector,
    PipelineConfig,
    SimResult,
)


class TestEnums:
    """Tests pour les énumérations"""

    def test_level_codes(self):
        """Test codes de niveau"""
        assert [level.code for level in Level] == [0, 1, 2]
        assert Level.from_code(2) == Level.UARCH
        with pytest.raises(ValueError):
            Level.from_code(7)

    def test_event_labels(self):
        assert EventKind.LOAD.label == "Load"
        assert EventKind.from_label("Branch") == EventKind.BRANCH

    def test_metric_families(self):
        """Test correspondance famille -> métriques"""
        assert MetricFamily.INSTRUCTION.metric_for(Level.IR) == MetricName.INSTR_REUSE_DIST
        assert MetricFamily.INSTRUCTION.metric_for(Level.UARCH) == MetricName.L1I_MPKI
        assert MetricFamily.DATA.metric_for(Level.ISA) == MetricName.DATA_REUSE_DIST
        assert MetricFamily.BRANCH.metric_for(Level.UARCH) == MetricName.BRANCH_MPKI
        assert MetricFamily.BRANCH.workload_kind == WorkloadKind.BRANCH
        assert MetricFamily.of(MetricName.L1D_MPKI) == MetricFamily.DATA


class TestTrace:
    """Tests pour le modèle Trace"""

    def test_record_size(self):
        assert EVENT_DTYPE.itemsize == 20

    def test_from_events(self, small_trace):
        """Test construction et itération"""
        assert len(small_trace) == 6
        events = list(small_trace)
        assert events[2].kind == EventKind.BRANCH
        assert events[2].taken is True
        assert events[5].kernel_mode is True
        assert events[1].data_or_target_addr == 0x8000

    def test_masks(self, small_trace):
        assert small_trace.memory_mask.tolist() == [False, True, False, False, True, False]
        assert small_trace.branch_mask.sum() == 2
        assert small_trace.kernel_mode.sum() == 1

    def test_immutable(self, small_trace):
        with pytest.raises(ValueError):
            small_trace.events["instr_addr"][0] = 1

    def test_equality(self, small_trace):
        copy = Trace(small_trace.level, small_trace.workload_name, small_trace.tag_table,
                     small_trace.events.copy(), small_trace.seed)
        assert copy == small_trace
        other = Trace(small_trace.level, "other", small_trace.tag_table, small_trace.events, small_trace.seed)
        assert other != small_trace

    def test_tag_out_of_table(self):
        """Test tag_id hors de la table"""
        with pytest.raises(ParameterError):
            Trace.from_events(Level.IR, "w", ("untagged",), [TraceEvent(EventKind.COMPUTE, 0, tag_id=1)])

    def test_compute_with_data_address(self):
        with pytest.raises(ParameterError):
            Trace.from_events(Level.IR, "w", ("untagged",), [TraceEvent(EventKind.COMPUTE, 0, 0x10)])

    def test_chunks(self, small_trace):
        sizes = [chunk.size for chunk in small_trace.chunks(4)]
        assert sizes == [4, 2]
        assert np.array_equal(np.concatenate(list(small_trace.chunks(4))), small_trace.events)


class TestSchemas:
    """Tests pour les schémas Pydantic"""

    def test_generator_config_defaults(self):
        cfg = GeneratorConfig(workload_kind=WorkloadKind.INSTRUCTION, x=400, iterations=10)
        assert (cfg.b, cfg.h, cfg.m, cfg.element_stride, cfg.function_stride) == (5, 2, 1000, 8, 32)
        assert cfg.workload_name == "ref-InstructionLocality-x400"

    def test_generator_config_rejects_unknown_keys(self):
        with pytest.raises(ValidationError):
            GeneratorConfig(workload_kind=WorkloadKind.DATA, x=1, iterations=1, colour="red")

    def test_observation_aliases(self):
        """Test alias workload/samples/config"""
        obs = MetricObservation(workload="w", level=Level.IR, metric=MetricName.INSTR_REUSE_DIST,
                                value=12.0, samples=5, config="c")
        dumped = obs.model_dump(mode="json", by_alias=True)
        assert dumped["workload"] == "w"
        assert dumped["samples"] == 5
        assert obs.key == ("w", "IR", "InstrReuseDist", "c")

    def test_undefined_observation(self):
        obs = MetricObservation.undefined("w", Level.ISA, MetricName.BRANCH_ENTROPY)
        assert obs.defined is False
        assert obs.value is None
        with pytest.raises(ValidationError):
            MetricObservation(workload="w", level=Level.IR, metric=MetricName.INSTR_REUSE_DIST,
                              value=3.0, defined=False)

    def test_entropy_range(self):
        with pytest.raises(ValidationError):
            MetricObservation(workload="w", level=Level.IR, metric=MetricName.BRANCH_ENTROPY, value=1.5)

    def test_cache_geometry(self):
        """Test validation de la géométrie"""
        cfg = CacheConfig(capacity_bytes=32 * 1024, line_bytes=64, associativity=8)
        assert cfg.sets == 64
        assert cfg.label == "32KB/64B/8w"
        with pytest.raises(ValidationError):
            CacheConfig(capacity_bytes=30 * 1024)
        with pytest.raises(ValidationError):
            CacheConfig(capacity_bytes=64, line_bytes=64, associativity=2)

    def test_sim_result_mpki(self):
        result = SimResult(workload="w", config="c", instructions=2000, l1i_accesses=2000, l1i_misses=10,
                           l1d_accesses=100, l1d_misses=4, branches=50, mispredictions=1)
        assert result.l1i_mpki == pytest.approx(5.0)
        assert result.l1d_mpki == pytest.approx(2.0)
        assert result.branch_mpki == pytest.approx(0.5)
        observations = result.to_observations()
        assert [obs.metric for obs in observations] == [
            MetricName.L1I_MPKI, MetricName.L1D_MPKI, MetricName.BRANCH_MPKI,
        ]
        assert all(obs.level == Level.UARCH for obs in observations)

    def test_sim_result_counts(self):
        with pytest.raises(ValidationError):
            SimResult(instructions=10, l1i_accesses=1, l1i_misses=2)

    def test_metric_vector_order(self):
        """Test niveaux distincts et ordonnés"""
        with pytest.raises(ValidationError):
            MetricVector(entries=[
                LevelEntry(level=Level.ISA, observed=1, reference=1),
                LevelEntry(level=Level.IR, observed=1, reference=1),
            ])
        with pytest.raises(ValidationError):
            MetricVector(entries=[LevelEntry(level=Level.IR, observed=1, reference=1)])

    def test_breakdown_node(self):
        tree = BreakdownNode(name="root", impact=1.0, children=[
            BreakdownNode(name="a", impact=0.4, children=[
                BreakdownNode(name="a1", impact=0.1),
                BreakdownNode(name="a2", impact=0.3),
            ]),
            BreakdownNode(name="b", impact=0.6),
        ])
        assert [leaf.name for leaf in tree.leaves()] == ["a1", "a2", "b"]
        assert tree.check_conservation()
        tree.children[0].children[0].impact = 0.2
        assert not tree.check_conservation()

    def test_pipeline_config_families(self):
        with pytest.raises(ValidationError):
            PipelineConfig(
                workload_name="w",
                references={"disk": GeneratorConfig(workload_kind=WorkloadKind.DATA, x=8, iterations=10)},
                target_traces={Level.IR: "ir.wpc"},
            )
