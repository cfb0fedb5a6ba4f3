import math

import numpy as np
import pytest

from errors import ContractViolation, SingularCovarianceError, TiltError
from kernel import Kernel
from renewal import (
    RenewalModel,
    build_model,
    convolve,
    finite_difference_check,
    gaussian_window_mass,
    generating_value,
    mass_gap_check,
    mean_cov,
    oz_predict,
    phi_prefactor,
    renewal_consistency,
    renewal_residual,
    renewal_solve,
    series_solve,
    series_tail_bound,
    solve_grid,
    solve_tilt_boundary,
    strict_convexity_probe,
    supermultiplicativity_check,
    synthetic_kernel,
    tail_certificate,
    tau_at,
    tilt,
    tilted_renewal_value,
    trace_tilt_surface,
)

# y = e^{s*} solves 0.6 y + 0.2 y^2 = 1 for the default d=2 full-rank kernel
Y_STAR = (-3 + math.sqrt(29)) / 2


class TestSolve:
    def test_geometric_powers(self, geometric):
        grid = solve_grid(geometric, 12)
        for n in range(13):
            assert grid[(n, 0)] == pytest.approx(0.5**n, rel=1e-12)
        assert grid[(3, 1)] == 0.0

    def test_residual_is_roundoff(self, three_atom):
        grid = solve_grid(three_atom, 30)
        assert renewal_residual(three_atom, grid) < 1e-12

    def test_series_agrees_with_solve(self, three_atom):
        exact = solve_grid(three_atom, 20)
        approx, bound = series_solve(three_atom, 20, 60)
        gap = float(np.max(np.abs(exact.values - approx.values)))
        assert gap <= bound + 1e-14

    def test_tail_bound(self, geometric):
        assert series_tail_bound(geometric, 3) == pytest.approx(0.5**4 / 0.5)
        assert series_tail_bound(Kernel(2, "f", {(1, 0): 1.0}), 3) == math.inf

    def test_rejects_mass_at_origin(self):
        with pytest.raises(ContractViolation):
            solve_grid(Kernel(2, "f", {(0, 0): 0.1, (1, 0): 0.2}), 5)

    def test_rejects_backward_steps(self):
        with pytest.raises(ContractViolation):
            solve_grid(Kernel(2, "f", {(1, 0): 0.2, (-1, 1): 0.1}), 5)

    def test_renewal_solve_sets_origin(self, full_rank_2d):
        h = renewal_solve(full_rank_2d, 10)
        assert h[(0, 0)] == 1.0
        assert h[(1, 0)] == pytest.approx(0.3)

    def test_convolution(self, geometric):
        square = convolve(geometric, geometric)
        assert square[(2, 0)] == pytest.approx(0.25)
        assert len(square) == 1

    def test_unknown_synthetic(self):
        with pytest.raises(ContractViolation):
            synthetic_kernel("no-such-kernel", 2)


class TestTilt:
    def test_geometric_boundary(self, geometric):
        s = solve_tilt_boundary(geometric)
        assert s == pytest.approx([math.log(2), 0.0])
        assert generating_value(geometric, s) == pytest.approx(1.0, abs=1e-12)

    def test_mass_one_refused(self):
        with pytest.raises(TiltError):
            solve_tilt_boundary(Kernel(2, "f", {(1, 0): 1.0}))

    def test_geometric_covariance_is_singular(self, geometric):
        s = solve_tilt_boundary(geometric)
        with pytest.raises(SingularCovarianceError):
            mean_cov(geometric, s)

    def test_full_rank_model(self, full_rank_2d):
        assert full_rank_2d.total_mass == pytest.approx(0.8)
        model = build_model(full_rank_2d)
        assert model.s_star == pytest.approx([math.log(Y_STAR), 0.0], abs=1e-10)
        mu1 = 0.6 * Y_STAR + 0.4 * Y_STAR**2
        assert model.mu == pytest.approx([mu1, 0.0], abs=1e-9)
        var2 = 0.3 * Y_STAR
        assert model.cov[1, 1] == pytest.approx(var2, rel=1e-9)
        assert model.phi == pytest.approx(math.sqrt(mu1 / (mu1**2 * var2)), rel=1e-9)
        assert model.phi == pytest.approx(1.475, abs=1e-3)

    def test_finite_differences(self, full_rank_3d):
        model = build_model(full_rank_3d)
        assert finite_difference_check(full_rank_3d, model.s_star).ok
        assert finite_difference_check(full_rank_3d, np.zeros(3)).ok

    def test_support_function_along_drift(self, full_rank_2d):
        model = build_model(full_rank_2d)
        assert tau_at(full_rank_2d, [1.0, 0.0]) == pytest.approx(model.tau_along_mu, abs=1e-6)

    def test_traced_points_lie_on_boundary(self, three_atom):
        points = trace_tilt_surface(three_atom, [[1.0, 0.0], [1.0, 0.3], [1.0, -0.3]])
        for point in points:
            assert generating_value(three_atom, point.s) == pytest.approx(1.0, abs=1e-9)
        assert points[0].mu_hat == pytest.approx([1.0, 0.0], abs=1e-9)


class TestPrediction:
    def test_oz_prediction_approaches_solve(self, full_rank_2d):
        model = build_model(full_rank_2d)
        grid = solve_grid(full_rank_2d, 160)
        errors = []
        for n in (40, 120):
            x = np.floor(n * model.mu + 1e-9).astype(int)
            errors.append(abs(grid[x] / oz_predict(model, n) - 1))
        assert errors[1] < errors[0]
        assert errors[1] < 0.05

    def test_tilted_walk_reproduces_solve(self, full_rank_2d):
        model = build_model(full_rank_2d)
        grid = solve_grid(full_rank_2d, 12)
        for x in [(6, 1), (8, 0), (5, -2)]:
            assert tilted_renewal_value(model, x) == pytest.approx(grid[x], rel=1e-9)


class TestChecks:
    def test_consistency_on_exact_h(self, three_atom):
        h = renewal_solve(three_atom, 12)
        rows = renewal_consistency(h, three_atom, [(2, 0), (3, 1), (4, 0)])
        for row in rows:
            assert row.h == pytest.approx(row.convolution, abs=1e-12)
            assert row.z is None

    def test_supermultiplicativity(self, geometric):
        h = renewal_solve(geometric, 8)
        rows = supermultiplicativity_check(h, [(1, 0), (2, 0), (3, 0), (4, 0)])
        assert rows
        assert all(r.holds for r in rows)

    def test_supermultiplicativity_violation(self):
        h = Kernel(2, "h", {(1, 0): 0.5, (2, 0): 0.1}, {(1, 0): 0.0, (2, 0): 0.0})
        rows = supermultiplicativity_check(h, [(1, 0), (2, 0)])
        assert [r.holds for r in rows] == [False]

    def test_mass_gap_on_geometric(self, geometric):
        report = mass_gap_check(geometric, renewal_solve(geometric, 6))
        assert report.ratios == {(1, 0): pytest.approx(1.0)}
        assert report.max_ratio == pytest.approx(1.0)
        assert report.defects == []

    def test_mass_gap_ratio_bounded(self, three_atom):
        report = mass_gap_check(three_atom, renewal_solve(three_atom, 8))
        assert 0 < report.max_ratio <= 1.0 + 1e-9

    def test_mass_gap_flags_missing_h(self, geometric):
        report = mass_gap_check(geometric, Kernel(2, "h", {(0, 0): 1.0}))
        assert report.defects

    def test_mass_gap_rate(self):
        f = Kernel(2, "f", {(n, 0): math.exp(-2 * n) for n in range(1, 7)})
        h = Kernel(2, "h", {(n, 0): math.exp(-n) for n in range(0, 7)})
        report = mass_gap_check(f, h)
        rate, _ = report.rates["1,0"]
        assert rate == pytest.approx(1.0)
        assert report.gap_positive

    def test_strict_convexity_coefficient(self, full_rank_2d):
        result = strict_convexity_probe(full_rank_2d, build_model(full_rank_2d))
        assert result.coefficient > 0
        assert all(g > 0 for g in result.gaps)
        assert result.positive


class TestPrefactor:
    def test_isotropic(self):
        for sigma in (0.5, 1.0, 2.0):
            model = RenewalModel(None, np.zeros(3), np.array([1.0, 0.0, 0.0]), sigma**2 * np.eye(3))
            assert phi_prefactor(model) == pytest.approx(sigma**-2)

    def test_scaling_covariance(self, full_rank_3d):
        model = build_model(full_rank_3d)
        wider = RenewalModel(None, model.s_star, model.mu, 4 * model.cov)
        assert wider.phi == pytest.approx(model.phi / 4)

    def test_singular(self):
        model = RenewalModel(None, np.zeros(2), np.array([1.0, 0.0]), np.diag([1.0, 0.0]))
        with pytest.raises(SingularCovarianceError):
            phi_prefactor(model)


class TestTails:
    def test_single_point(self, geometric):
        cert = tail_certificate(tilt(geometric, [0.0, 0.0]))
        assert cert.rate is None
        assert cert.boundary_mass == pytest.approx(1.0)
        assert cert.certified

    def test_geometric_shells(self):
        f = Kernel(2, "synthetic", {(n, 0): 0.5**n for n in range(1, 7)})
        cert = tail_certificate(tilt(f, [0.0, 0.0]))
        assert cert.rate == pytest.approx(math.log(2))
        assert cert.boundary_mass == pytest.approx(1 / 63)
        assert cert.certified

    def test_growing_shells(self):
        f = Kernel(2, "synthetic", {(n, 0): 0.01 * 2**n for n in range(1, 6)})
        assert not tail_certificate(tilt(f, [0.0, 0.0])).certified

    def test_gaussian_window(self, full_rank_2d):
        model = build_model(full_rank_2d)
        masses = []
        for n in (20, 80):
            x = tuple(int(c) for c in np.floor(n * model.mu + 1e-9))
            window = gaussian_window_mass(model, x)
            assert window.expected_steps == pytest.approx(n, abs=1.0)
            assert window.outside_mass < 0.01
            masses.append(window.outside_mass)
        assert masses[1] <= masses[0] + 1e-12
