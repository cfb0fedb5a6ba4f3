import pytest

from combinatorics import (
    AnimalEnumeration,
    check_invariants,
    from_class,
    phi_bar_estimate,
    phi_exact,
    phi_t_exact,
    psi_table,
    staircase_bound,
    staircase_path,
    subadditivity_table,
    surface_count_table,
    symmetry_class,
    symmetry_map,
)
from errors import ContractViolation
from events import Direction
from lattice import external_boundary_of, l1_norm


class TestStaircase:
    @pytest.mark.parametrize("x, bound", [((1, 0, 0), 10), ((2, 0, 0), 14), ((1, 0), 6), ((1, 1), 8)])
    def test_bound_matches_path(self, x, bound):
        assert staircase_bound(x) == bound
        assert staircase_path(x).boundary_size == bound

    def test_path_shape(self):
        path = staircase_path((2, -1))
        assert path.vertices == ((0, 0), (1, 0), (2, 0), (2, -1))
        assert len(path.edges) == 3

    def test_symmetry_class(self):
        assert symmetry_class((0, -2, 1)) == (2, 1, 0)


class TestPhi:
    def test_unit_step_d3(self):
        result = phi_exact((1, 0, 0), 4)
        assert (result.phi, result.psi, result.upsilon) == (10, 1, 2)
        assert result.certified
        assert check_invariants((1, 0, 0), result) == []

    def test_double_step_d3(self):
        result = phi_exact((2, 0, 0), 5)
        assert result.phi == 14
        assert result.psi == 2

    def test_symmetric_points_agree(self):
        assert phi_exact((0, 0, -1), 4).phi == phi_exact((1, 0, 0), 4).phi

    def test_unit_step_d2(self):
        assert phi_exact((1, 0), 4).phi == 6

    def test_origin(self):
        result = phi_exact((0, 0, 0), 3)
        assert (result.phi, result.psi, result.upsilon) == (0, 0, 1)
        assert check_invariants((0, 0, 0), result) == []

    @pytest.mark.parametrize("x", [(0, 0, 2), (0, -2, 0), (-1, 0, 0), (0, 1)])
    def test_minimizer_reaches_x(self, x):
        result = phi_exact(x, l1_norm(x) + 3)
        assert tuple(0 for _ in x) in result.minimizer
        assert x in result.minimizer
        assert len(result.minimizer) == result.achieved_at_volume
        assert len(external_boundary_of(result.minimizer)) == result.phi

    def test_symmetry_map_inverts(self):
        x = (0, -2, 1)
        rep, perm, signs = symmetry_map(x)
        assert rep == symmetry_class(x)
        assert from_class(rep, perm, signs) == x

    def test_budget_blocks_certificate(self):
        result = phi_exact((3, 0, 0), 8, budget=50)
        assert result.budget_exceeded
        assert not result.certified

    def test_half_space_target(self):
        assert phi_t_exact((1, 0, 0), Direction.axis(3), 4).phi == 10
        with pytest.raises(ContractViolation):
            phi_t_exact((0, 1, 0), Direction.axis(3), 4)

    def test_invariant_violations_reported(self):
        fake = phi_exact((1, 0, 0), 4)
        broken = type(fake)(phi=99, psi=0, upsilon=1, achieved_at_volume=1, certified=True)
        assert len(check_invariants((1, 0, 0), broken)) >= 2


class TestTables:
    def test_psi_table(self):
        table = psi_table((1, 0), 4)
        assert table.psi[6] == 1
        ks = sorted(table.psi_upper)
        assert all(table.psi_upper[a] <= table.psi_upper[b] for a, b in zip(ks, ks[1:]))
        assert table.complete

    def test_surface_counts(self):
        table = surface_count_table(2, 2)
        assert table.counts == {4: 1, 6: 2}

    def test_subadditivity(self):
        report = subadditivity_table([(1, 0), (0, 1), (1, 1)])
        assert len(report.rows) == 9
        assert report.violations == []
        assert report.defects == []
        diagonal = [r for r in report.rows if r.x == r.y]
        assert all(r.phi_x_minus_y == 0 and r.phi_x == r.phi_y for r in diagonal)

    def test_phi_bar(self):
        series = phi_bar_estimate((1.0, 0.0), [1, 2, 3], max_volume=6)
        assert series.n == (1, 2, 3)
        assert series.values == pytest.approx((6.0, 4.0, 10 / 3))
        assert series.monotone_fraction == 1.0
        assert not series.truncated

    def test_phi_bar_truncates(self):
        series = phi_bar_estimate((1.0, 0.0), [1, 2, 8], max_volume=4)
        assert series.truncated
        assert series.n == (1, 2)


class TestEnumeration:
    def test_translation_classes(self):
        # d=2 animals of volume <= 3: 1 monomer, 2 dominoes, 6 trominoes
        animals = list(AnimalEnumeration([(0, 0)], 3, translation_classes=True))
        assert len(animals) == 9

    def test_anchors_required(self):
        with pytest.raises(ContractViolation):
            AnimalEnumeration([], 3)
