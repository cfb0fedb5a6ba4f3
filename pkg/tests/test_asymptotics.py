import math

import numpy as np
import pytest

from asymptotics import (
    DecaySeries,
    TauSurface,
    cap_grid,
    compare_tau_models,
    convexity_check,
    curvature_check,
    direction_grid,
    dual_directions,
    equidecay_surface,
    oz_fit,
    oz_series,
    polar_support_check,
    rate_profile,
    tau_fit,
    tau_sanity,
)
from errors import ContractViolation, FitError

N_LIST = tuple(range(20, 121, 10))


def l1(x):
    return float(np.abs(x).sum())


def half_norm(x):
    return float(np.sqrt(np.abs(x)).sum() ** 2)


class TestSeries:
    def test_validation(self):
        with pytest.raises(ContractViolation):
            DecaySeries((1.0, 0.0), (3, 2), (0.1, 0.2))
        with pytest.raises(ContractViolation):
            DecaySeries((1.0, 0.0), (1, 2), (0.1,))
        with pytest.raises(ContractViolation):
            DecaySeries((1.0, 0.0), (1, 2), (0.1, 0.2), source="guess")

    def test_record(self):
        series = oz_series(0.4, 1.2, 2, [10, 20, 30, 40], step=(1, 1))
        back = DecaySeries.from_record(series.to_record())
        assert back == series
        assert series.step_length == pytest.approx(math.sqrt(2))

    def test_rate_profile(self):
        series = DecaySeries((1.0, 0.0), (1, 2), (math.exp(-0.5), math.exp(-1.0)))
        rates = [row["rate"] for row in rate_profile(series)]
        assert rates == pytest.approx([0.5, 0.5])


class TestFits:
    @pytest.mark.parametrize("dim", [2, 3])
    def test_oz_fit_recovers_parameters(self, dim):
        series = oz_series(0.3, 1.7, dim, N_LIST)
        fit = oz_fit(series, dim)
        assert fit.tau == pytest.approx(0.3, rel=1e-9)
        assert fit.phi == pytest.approx(1.7, rel=1e-8)
        assert not fit.mismatch

    def test_wrong_power_law_is_flagged(self):
        series = oz_series(0.3, 1.7, 2, N_LIST)
        assert oz_fit(series, 3).mismatch

    def test_corrections(self):
        values = tuple(
            v * (1 + 2.0 / n) for v, n in zip(oz_series(0.25, 0.9, 3, N_LIST).values, N_LIST)
        )
        series = DecaySeries((1.0, 0.0, 0.0), N_LIST, values)
        plain = oz_fit(series, 3)
        corrected = oz_fit(series, 3, correction_order=2)
        assert abs(corrected.tau - 0.25) < abs(plain.tau - 0.25)
        assert corrected.tau == pytest.approx(0.25, abs=1e-3)
        assert len(corrected.corrections) == 2

    def test_tau_fit_models(self):
        series = oz_series(0.3, 1.0, 3, N_LIST)
        assert tau_fit(series, oz_dim=3).tau == pytest.approx(0.3, rel=1e-9)
        naive = tau_fit(series)
        assert naive.model == "naive"
        assert naive.tau > 0.3

    def test_models_disagree_on_oz_series(self):
        record = compare_tau_models(oz_series(0.3, 1.0, 3, N_LIST), 3)
        assert record["oz"]["tau"] == pytest.approx(0.3, rel=1e-9)
        assert record["naive"]["model"] == "naive"
        assert record["difference"] > 0
        assert record["disagree"]

    def test_models_agree_without_log_term(self):
        record = compare_tau_models(oz_series(0.3, 1.0, 3, N_LIST), 1)
        assert record["difference"] == pytest.approx(0.0, abs=1e-12)
        assert not record["disagree"]

    def test_too_few_points(self):
        series = DecaySeries((1.0, 0.0), (1, 2, 3, 4), (0.5, 0.25, 0.0, -1.0))
        with pytest.raises(FitError):
            tau_fit(series)


class TestSurfaces:
    def test_cap_grid_stays_in_cap(self):
        for center in ([1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 0.0]):
            c = np.asarray(center) / np.linalg.norm(center)
            grid = cap_grid(center, 50, 0.4)
            assert grid.shape == (50, len(center))
            assert np.allclose(np.linalg.norm(grid, axis=1), 1.0)
            assert np.all(grid @ c >= math.cos(0.4) - 1e-12)

    def test_direction_grid(self):
        assert len(direction_grid(2)) == 8
        assert len(direction_grid(3)) == 26
        assert len(direction_grid(2, refine_around=[[1.0, 0.0]])) > 8

    def test_euclidean_norm_is_convex(self):
        surface = TauSurface.from_function(np.linalg.norm, direction_grid(3))
        report = convexity_check(surface)
        assert report.defects == []
        assert report.pairs_checked > 0

    def test_l1_equality_cases(self):
        surface = TauSurface.from_function(l1, direction_grid(2))
        report = convexity_check(surface)
        assert report.defects == []
        assert report.equality_cases

    def test_concave_gauge_is_flagged(self):
        surface = TauSurface.from_function(half_norm, direction_grid(2))
        assert convexity_check(surface).defects

    def test_convexity_needs_spanning_directions(self):
        surface = TauSurface.from_function(np.linalg.norm, [[1.0, 0.0], [2.0, 0.0]])
        with pytest.raises(ContractViolation):
            convexity_check(surface)

    def test_convexity_without_pairs_is_undecided(self):
        surface = TauSurface([[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]], np.ones(3))
        report = convexity_check(surface)
        assert report.pairs_checked == 0
        assert report.passed is None
        assert report.to_record()["passed"] is None

    def test_euclidean_convexity_passes(self):
        surface = TauSurface.from_function(np.linalg.norm, direction_grid(2))
        assert convexity_check(surface).passed is True

    def test_equidecay_surface(self):
        surface = TauSurface(direction_grid(2), np.full(8, 2.0))
        assert np.allclose(np.linalg.norm(equidecay_surface(surface), axis=1), 0.5)

    def test_sanity(self):
        assert tau_sanity(TauSurface(direction_grid(2), np.linspace(1, 2, 8))).ok
        assert not tau_sanity(TauSurface(direction_grid(2), np.linspace(0.001, 2, 8))).ok

    def test_polar_support_of_sphere(self):
        surface = TauSurface.from_function(np.linalg.norm, direction_grid(2))
        assert polar_support_check(surface).max_relative_gap < 1e-8


class TestCurvature:
    def test_circle(self):
        points = 2.0 * cap_grid([1.0, 0.0], 200, 0.6)
        result = curvature_check(points, [1.0, 0.0])
        assert result.curvatures == pytest.approx([0.5], rel=1e-2)
        assert result.positive()

    def test_sphere(self):
        points = cap_grid([1.0, 0.0, 0.0], 200, 0.6)
        result = curvature_check(points, [1.0, 0.0, 0.0])
        assert result.curvatures == pytest.approx([1.0, 1.0], rel=0.05)
        assert result.gaussian == pytest.approx(1.0, rel=0.1)

    def test_ellipsoid_tip(self):
        # semi-axes 1, 2, 2: curvature a/b^2 at the short end
        points = cap_grid([1.0, 0.0, 0.0], 200, 0.6) * np.array([1.0, 2.0, 2.0])
        result = curvature_check(points, [1.0, 0.0, 0.0])
        assert result.curvatures == pytest.approx([0.25, 0.25], rel=0.05)
        assert result.gaussian == pytest.approx(1 / 16, rel=0.1)

    def test_flat_line_has_no_curvature(self):
        points = np.column_stack([np.ones(40), np.linspace(-0.5, 0.5, 40)])
        result = curvature_check(points, [1.0, 0.0])
        assert abs(result.curvatures[0]) < 1e-8

    def test_too_few_points(self):
        with pytest.raises(FitError):
            curvature_check(cap_grid([1.0, 0.0, 0.0], 10, 0.3), [1.0, 0.0, 0.0])


class TestDuals:
    def test_euclidean_dual_is_itself(self):
        result = dual_directions([1.0, 0.0], np.linalg.norm)
        assert result.representative == pytest.approx([1.0, 0.0])

    def test_l1_diagonal_dual_is_corner(self):
        result = dual_directions([1.0, 1.0], l1)
        assert result.representative == pytest.approx([1 / math.sqrt(2), 1 / math.sqrt(2)])

    def test_table_without_x(self):
        dirs = direction_grid(2)
        with pytest.raises(ContractViolation):
            dual_directions([2.0, 1.0], (dirs, np.ones(len(dirs))))
