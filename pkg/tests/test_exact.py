from fractions import Fraction

import pytest

from errors import BudgetExceeded, ContractViolation
from events import Event
from exact import (
    derivative_sign_check,
    enumerate_event,
    is_monotone,
    lower_bound_check,
    non_monotone_witness,
    verify_estimator,
)
from lattice import Box
from sampler import event_table

EDGE = ((0, 0, 0), 0)


class TestPolynomials:
    def test_edge_open(self, cube_box):
        result = enumerate_event(cube_box, Event("edge-open", edge=EDGE))
        assert result.n_edges == 12
        assert result.probability(Fraction(1, 3)) == Fraction(1, 3)
        assert result.power_coefficients()[:2] == [0, 1]
        assert all(c == 0 for c in result.power_coefficients()[2:])

    def test_isolated_edge(self, cube_box):
        result = enumerate_event(cube_box, Event("isolated-edge", edge=EDGE))
        p = Fraction(1, 2)
        assert result.probability(p) == p * (1 - p) ** 4
        assert result.derivative(p) == Fraction(-3, 16)
        assert not derivative_sign_check(result)

    def test_decimal_p_is_exact(self, cube_box):
        result = enumerate_event(cube_box, Event("edge-open", edge=EDGE))
        assert result.probability(0.3) == Fraction(3, 10)
        assert result.probability("7/10") == Fraction(7, 10)

    def test_finite_two_point_on_strip(self, strip_box):
        event = Event("finite-two-point", x=(1, 0), margin=1)
        result = enumerate_event(strip_box, event)
        assert result.probability(Fraction(1, 2)) == Fraction(1, 128)
        p = Fraction(3, 10)
        assert result.probability(p) == p * (1 - p) ** 6

    def test_too_many_edges(self):
        with pytest.raises(BudgetExceeded):
            enumerate_event(Box.cube(2, 2), Event("edge-open", edge=((0, 0), 0)))


class TestMonotonicity:
    def test_increasing_event(self, cube_box):
        assert is_monotone(event_table(cube_box, Event("edge-open", edge=EDGE)))

    def test_isolated_edge_is_not(self, cube_box):
        assert not is_monotone(event_table(cube_box, Event("isolated-edge", edge=EDGE)))

    def test_witnesses(self, strip_box):
        up, down = non_monotone_witness(strip_box, Event("finite-two-point", x=(1, 0), margin=1))
        assert up is not None and down is not None
        assert not up.smaller_has_event
        assert down.smaller_has_event
        assert down.larger.n_open == down.smaller.n_open + 1
        assert set(down.smaller.open_edges()) < set(down.larger.open_edges())


class TestChecks:
    def test_lower_bound_is_tight(self, strip_box):
        rows = lower_bound_check(strip_box, (1, 0), p_list=[Fraction(1, 2), Fraction(1, 5)], margin=1)
        assert all(r.holds for r in rows)
        assert rows[0].exact == pytest.approx(rows[0].bound)

    def test_verify_estimator(self, cube_box):
        check = verify_estimator(cube_box, Event("connect", x=(1, 1, 1)), 0.5, 20000, seed=3)
        assert check.passed
        assert check.sigmas <= 4.0

    def test_verify_needs_samples(self, cube_box):
        with pytest.raises(ContractViolation):
            verify_estimator(cube_box, Event("connect", x=(1, 1, 1)), 0.5, 0, seed=3)

    def test_lower_bound_refuses_origin(self, strip_box):
        with pytest.raises(ContractViolation):
            lower_bound_check(strip_box, (0, 0))
