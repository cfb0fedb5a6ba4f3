import math

import pytest

from errors import ContractViolation, DomainError
from events import (
    Direction,
    Event,
    check_margin,
    classify_events,
    detect_break_points,
    detect_t_bonds,
    finite_two_point,
    renewal_split,
    slab_crossings,
)
from lattice import Box, BondConfig, ClusterData, component, fill

U1 = Direction.axis(2, 0)


@pytest.fixture
def straight():
    """Open path 0 -> 3u1 in a box whose shell is far away."""
    box = Box.cube(2, 5)
    return BondConfig.from_path(box, [(0, 0), (1, 0), (2, 0), (3, 0)])


class TestDirection:
    def test_integer_form(self):
        t = Direction.of((3, 4))
        assert t.exact
        assert t.integer_form == (3, 4)
        assert t.u_axis == 1
        assert t.u == (0, 1)
        assert t.level((1, 1)) == 7

    def test_irrational_direction(self):
        t = Direction.of((1.0, math.sqrt(2)))
        assert not t.exact
        assert t.tol > 0
        assert t.level((1, 0)) == pytest.approx(1 / math.sqrt(3))

    def test_rejects_non_unit(self):
        with pytest.raises(ContractViolation):
            Direction((1.0, 1.0))
        with pytest.raises(ContractViolation):
            Direction.of((0, 0))

    def test_ties_go_to_first_axis(self):
        assert Direction.of((1, 1, 0)).u_axis == 0


class TestClassify:
    def test_long_path(self, straight):
        record = classify_events(straight, (3, 0), U1)
        assert record.break_points == ((1, 0), (2, 0))
        assert record.finite_connect
        assert record.h and record.f and record.g
        assert record.h_bar and record.h_tilde
        assert not record.f_bar and not record.f_tilde
        assert len(record.t_bonds) == 1
        assert record.implication_failures() == []

    def test_single_edge(self, straight):
        record = classify_events(straight, (1, 0), U1)
        assert not record.h and not record.f
        assert record.g
        assert record.h_bar and record.f_bar
        assert record.h_tilde and record.f_tilde
        assert record.implication_failures() == []

    def test_transverse_x_refused(self, straight):
        with pytest.raises(ContractViolation):
            classify_events(straight, (0, 1), U1)

    def test_closed_configuration(self):
        box = Box.cube(2, 3)
        config = BondConfig(box, [False] * box.n_edges)
        record = classify_events(config, (2, 0), U1)
        assert not any(record.flag(k) for k in ("h", "f", "g", "h_bar", "f_bar", "h_tilde", "f_tilde"))

    def test_surface_size(self, straight):
        # a straight 4-vertex segment in d=2 has boundary 2*4 + 2
        assert classify_events(straight, (3, 0), U1).surface_size == 10

    def test_t_bonds(self):
        bonds, left = detect_t_bonds([(1, 0), (2, 0), (4, 0)], U1)
        assert bonds == [((1, 0), 0)]
        assert left == [(1, 0)]


class TestFiniteTwoPoint:
    def test_margin(self, strip_box):
        check_margin(strip_box, (1, 0), 1)
        with pytest.raises(DomainError):
            check_margin(strip_box, (2, 0), 1)

    def test_shell_cluster_is_infinite(self, strip_box):
        config = BondConfig.from_path(strip_box, [(0, 0), (1, 0), (2, 0)])
        assert not finite_two_point(config, (1, 0), margin=1)

    def test_isolated_pair(self, strip_box):
        config = BondConfig.from_path(strip_box, [(0, 0), (1, 0)])
        assert finite_two_point(config, (1, 0), margin=1)
        assert Event("finite-two-point", x=(1, 0), margin=1)(config)


def path_cluster(box, path):
    return component(BondConfig.from_path(box, path), path[0])


class TestBreakPoints:
    def test_segment(self):
        cluster = path_cluster(Box.cube(2, 8), [(i, 0) for i in range(5)])
        assert detect_break_points(cluster, U1, (4, 0)) == [(1, 0), (2, 0), (3, 0)]

    def test_pendant_edge_spoils_its_neighbourhood(self):
        path = [(i, 0) for i in range(4)] + [(3, 1), (3, 0)] + [(i, 0) for i in range(4, 7)]
        cluster = path_cluster(Box.cube(2, 8), path)
        assert detect_break_points(cluster, U1, (6, 0)) == [(1, 0), (5, 0)]

    def test_empty_cluster(self):
        empty = ClusterData(frozenset(), frozenset(), frozenset(), False)
        assert detect_break_points(empty, U1, (4, 0)) == []

    def test_t_bonds_join_consecutive_points(self):
        bonds, left = detect_t_bonds([(1, 0), (2, 0), (3, 0)], U1)
        assert bonds == [((1, 0), 0), ((2, 0), 0)]
        assert left == [(1, 0), (2, 0)]
        assert detect_t_bonds([(1, 0)], U1) == ([], [])
        assert detect_t_bonds([(1, 0), (3, 0)], U1) == ([], [])


E1 = Direction.axis(3, 0)
RECTANGLE = (
    [(i, 0, 0) for i in range(7)]
    + [(6, 1, 0), (6, 2, 0)]
    + [(i, 2, 0) for i in range(5, -1, -1)]
    + [(0, 1, 0), (0, 0, 0)]
)


class TestSlabs:
    @pytest.fixture
    def rod(self):
        box = Box.cube(3, 6)
        return fill(path_cluster(box, [(i, 0, 0) for i in range(5)]), box)

    def test_rod_slabs_are_good(self, rod):
        report = slab_crossings(rod, E1, 2, (4, 0, 0))
        assert [(s.lo_level, s.hi_level) for s in report.slabs] == [(0, 2), (2, 4)]
        assert all(s.good for s in report.slabs)
        assert [s.n_crossings for s in report.slabs] == [1, 1]
        assert report.eta == 0.0

    def test_rectangle_has_a_bad_slab(self):
        box = Box.cube(3, 8)
        cluster = fill(path_cluster(box, RECTANGLE), box)
        report = slab_crossings(cluster, E1, 2, (6, 0, 0))
        assert len(report.slabs) == 3
        assert [s.n_crossings for s in report.slabs] == [1, 2, 1]
        assert [s.good for s in report.slabs] == [True, False, True]
        assert report.slabs[1].n_surface_components == 2
        assert report.eta == pytest.approx(1 / 3)

    def test_wide_slab_covers_everything(self, rod):
        assert len(slab_crossings(rod, E1, 10, (4, 0, 0)).slabs) == 1

    def test_contract(self, rod):
        with pytest.raises(ContractViolation):
            slab_crossings(rod, E1, 0, (4, 0, 0))
        bare = path_cluster(Box.cube(3, 6), [(0, 0, 0), (1, 0, 0)])
        with pytest.raises(ContractViolation):
            slab_crossings(bare, E1, 2, (1, 0, 0))


class TestRenewalSplit:
    def test_two_t_bonds(self):
        box = Box.cube(2, 6)
        config = BondConfig.from_path(box, [(i, 0) for i in range(6)])
        split = renewal_split(config, (5, 0), U1)
        assert split is not None
        assert split.z1 == (1, 0)
        assert split.z2 == (4, 0)
        assert split.consistent

    def test_no_split_without_two_t_bonds(self, straight):
        assert renewal_split(straight, (3, 0), U1) is None


class TestEvent:
    def test_needs_arguments(self):
        with pytest.raises(ContractViolation):
            Event("edge-open")
        with pytest.raises(ContractViolation):
            Event("h", x=(1, 0))
        with pytest.raises(ContractViolation):
            Event("no-such-event")

    def test_isolated_edge(self, cube_box):
        edge = ((0, 0, 0), 0)
        alone = BondConfig.from_open_edges(cube_box, [edge])
        crowded = BondConfig.from_open_edges(cube_box, [edge, ((1, 0, 0), 1)])
        event = Event("isolated-edge", edge=edge)
        assert event(alone)
        assert not event(crowded)

    def test_describe(self):
        assert Event("h", x=(2, 0), t=(1.0, 0.0)).describe() == "h x=2,0 t=1,0"
