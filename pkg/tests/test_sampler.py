import numpy as np
import pytest

from errors import ContractViolation, InsufficientStatistics
from events import Direction, Event
from lattice import Box
from sampler import (
    SHARD_SIZE,
    EstimatorResult,
    coupled_configs,
    decay_profile,
    estimate_event,
    estimate_kernels,
    sample_config,
    shard_plan,
    surface_tail,
)


class TestStreams:
    def test_deterministic(self, strip_box):
        a = sample_config(strip_box, 0.5, seed=11, stream_id=3)
        b = sample_config(strip_box, 0.5, seed=11, stream_id=3)
        assert a == b
        assert (a.seed, a.stream_id, a.p) == (11, 3, 0.5)

    def test_streams_differ(self):
        box = Box.cube(3, 3)
        configs = [sample_config(box, 0.5, seed=1, stream_id=s) for s in range(4)]
        assert len({c.code() for c in configs}) == 4

    def test_extreme_p(self, strip_box):
        assert sample_config(strip_box, 0.0, seed=1).n_open == 0
        assert sample_config(strip_box, 1.0, seed=1).n_open == strip_box.n_edges

    def test_p_out_of_range(self, strip_box):
        with pytest.raises(ContractViolation):
            sample_config(strip_box, 1.5, seed=1)
        with pytest.raises(ContractViolation):
            sample_config(strip_box, -0.1, seed=1)

    def test_coupling_is_monotone(self):
        box = Box.cube(2, 4)
        low, mid, high = coupled_configs(box, [0.2, 0.5, 0.8], seed=5)
        assert np.all(low.bits <= mid.bits)
        assert np.all(mid.bits <= high.bits)

    def test_shard_plan(self):
        plan = shard_plan(2 * SHARD_SIZE + 5)
        assert plan == [(0, SHARD_SIZE), (1, SHARD_SIZE), (2, 5)]
        assert shard_plan(0) == []


class TestEstimates:
    def test_edge_open(self, cube_box):
        event = Event("edge-open", edge=((0, 0, 0), 0))
        result = estimate_event(cube_box, event, 0.3, 20000, seed=2)
        assert result.ok
        assert abs(result.value - 0.3) <= 4 * result.std_error
        assert result.n_samples == 20000

    def test_thread_count_does_not_change_result(self, cube_box):
        event = Event("edge-open", edge=((0, 0, 0), 1))
        one = estimate_event(cube_box, event, 0.4, 20000, seed=9, threads=1)
        two = estimate_event(cube_box, event, 0.4, 20000, seed=9, threads=2)
        assert one.hits == two.hits

    def test_lookup_matches_direct(self, cube_box):
        event = Event("isolated-edge", edge=((0, 0, 0), 0))
        table = estimate_event(cube_box, event, 0.5, 3000, seed=4, lookup=True)
        direct = estimate_event(cube_box, event, 0.5, 3000, seed=4, lookup=False)
        assert table.hits == direct.hits

    def test_insufficient_conditioning(self):
        result = EstimatorResult.conditional(3, 10, 1000, seed=0, label="tail")
        assert not result.ok
        with pytest.raises(InsufficientStatistics):
            result.require()


class TestKernels:
    @pytest.fixture
    def estimate(self):
        return estimate_kernels(
            0.5, Direction.axis(2), [(1, 0), (2, 0), (3, 0)], Box.cube(2, 4), 3000, seed=8, margin=1,
        )

    def test_no_implication_failures(self, estimate):
        assert estimate.implication_failures == 0
        assert estimate.failure_examples == []

    def test_conventions(self, estimate):
        assert estimate.kernels["h"][(0, 0)] == 1.0
        assert (0, 0) not in estimate.kernels["f"].entries

    def test_f_below_h(self, estimate):
        h, f = estimate.kernels["h"], estimate.kernels["f"]
        for x in [(1, 0), (2, 0), (3, 0)]:
            assert f[x] <= h[x]
            assert estimate.kernels["f_bar"][x] <= estimate.kernels["h_bar"][x]

    def test_record_rows(self, estimate):
        record = estimate.to_record()
        assert record["n_samples"] == 3000
        assert {row["kind"] for row in record["records"]} >= {"h", "f", "g", "two-point"}

    def test_refuses_backward_points(self):
        with pytest.raises(ContractViolation):
            estimate_kernels(0.5, Direction.axis(2), [(-1, 0)], Box.cube(2, 4), 10, seed=1)


class TestSurfaceTail:
    def test_threshold_at_minimum_always_holds(self):
        result = surface_tail((1, 0), 0.0, 0.3, Box.cube(2, 3), 3000, seed=4, phi=6)
        assert result.ok
        assert result.value == 1.0

    def test_unreachable_threshold(self):
        result = surface_tail((1, 0), 100.0, 0.3, Box.cube(2, 3), 3000, seed=4, phi=6)
        assert result.value == 0.0

    def test_no_conditioning_hits(self):
        result = surface_tail((1, 0), 0.5, 0.0, Box.cube(2, 3), 200, seed=4, phi=6)
        assert not result.ok
        with pytest.raises(InsufficientStatistics):
            result.require()


class TestDecayProfile:
    def test_connection_decays_along_axis(self):
        series = decay_profile(0.3, (1.0, 0.0), [2, 1], Box.cube(2, 4), 4000, seed=6, margin=1)
        assert series.n == (1, 2)
        assert series.values[0] > series.values[1]
        assert series.source == "monte-carlo"
        assert len(series.std_errors) == 2
