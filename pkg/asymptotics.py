"""Decay-rate and Ornstein-Zernike fits, τ-surfaces and their convexity and curvature.

Pure post-processing over immutable series and surfaces.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import KDTree

from console import get_logger
from errors import ContractViolation, FitError

log = get_logger(__name__)

MIN_FIT_POINTS = 4
TAU_NORM_RATIO = 100.0


# ----------------------------------------------------------------------
# Weighted least squares
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class LinearFit:
    coef: np.ndarray
    cov: np.ndarray
    residuals: np.ndarray

    @property
    def errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0, None))


def weighted_lstsq(design: np.ndarray, y: Sequence[float], sigma: Optional[Sequence[float]] = None) -> LinearFit:
    """Least squares with 1/σ² weights; without σ the residual variance sets the scale."""
    X = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if sigma is not None:
        w = 1.0 / np.asarray(sigma, dtype=float)
        Xw, yw = X * w[:, None], y * w
    else:
        Xw, yw = X, y
    coef, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    resid = y - X @ coef
    gram_inv = np.linalg.pinv(Xw.T @ Xw)
    if sigma is None:
        rss = float(resid @ resid)
        gram_inv = gram_inv * (rss / (n - k) if n > k else 0.0)
    return LinearFit(coef, gram_inv, resid)


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    slope_err: float
    intercept_err: float


def weighted_line(x: Sequence[float], y: Sequence[float], sigma: Optional[Sequence[float]] = None) -> LineFit:
    x = np.asarray(x, dtype=float)
    fit = weighted_lstsq(np.column_stack([x, np.ones_like(x)]), y, sigma)
    err = fit.errors
    return LineFit(float(fit.coef[0]), float(fit.coef[1]), float(err[0]), float(err[1]))


# ----------------------------------------------------------------------
# Decay series
# ----------------------------------------------------------------------
SERIES_SOURCES = ("monte-carlo", "renewal-solve", "exact-enumeration", "synthetic")


@dataclass(frozen=True)
class DecaySeries:
    """values[i] ~ h(n[i] · step) (or h(⌊n x̂⌋) for Monte Carlo rays)."""

    direction: Tuple[float, ...]
    n: Tuple[int, ...]
    values: Tuple[float, ...]
    std_errors: Tuple[float, ...] = ()
    source: str = "synthetic"
    step: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if len(self.values) != len(self.n):
            raise ContractViolation("n and values differ in length")
        if self.std_errors and len(self.std_errors) != len(self.n):
            raise ContractViolation("n and std_errors differ in length")
        if any(b <= a for a, b in zip(self.n, self.n[1:])):
            raise ContractViolation("n must be strictly increasing")
        if self.source not in SERIES_SOURCES:
            raise ContractViolation(f"unknown series source {self.source!r}")

    @property
    def step_length(self) -> float:
        return float(np.linalg.norm(self.step)) if self.step is not None else 1.0

    def lengths(self) -> np.ndarray:
        return np.asarray(self.n, dtype=float) * self.step_length

    def to_record(self) -> dict:
        return {
            "direction": list(self.direction),
            "source": self.source,
            "step": list(self.step) if self.step is not None else None,
            "samples": [
                {"n": n, "value": v, "std_error": self.std_errors[i] if self.std_errors else None}
                for i, (n, v) in enumerate(zip(self.n, self.values))
            ],
        }

    @classmethod
    def from_record(cls, record: dict) -> "DecaySeries":
        rows = record["samples"]
        errors = tuple(float(r["std_error"]) for r in rows) if all(r.get("std_error") is not None for r in rows) else ()
        step = record.get("step")
        return cls(
            tuple(float(v) for v in record.get("direction", (1.0, 0.0))),
            tuple(int(r["n"]) for r in rows),
            tuple(float(r["value"]) for r in rows),
            errors,
            record.get("source", "synthetic"),
            tuple(int(c) for c in step) if step else None,
        )


def _usable(series: DecaySeries) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """Lengths, log values and σ(log value), with nonpositive points dropped."""
    lengths = series.lengths()
    values = np.asarray(series.values, dtype=float)
    keep = values > 0
    if not keep.all():
        log.warning("dropping %d nonpositive points from the %s series", int((~keep).sum()), series.source)
    if keep.sum() < MIN_FIT_POINTS:
        raise FitError(f"{int(keep.sum())} usable points, need at least {MIN_FIT_POINTS}")
    sigma = None
    if series.std_errors:
        errs = np.asarray(series.std_errors, dtype=float)[keep]
        if np.all(errs > 0):
            sigma = errs / values[keep]
    return lengths[keep], np.log(values[keep]), sigma


@dataclass(frozen=True)
class TauFit:
    tau: float
    err: float
    intercept: float
    model: str
    n_used: int

    def to_record(self) -> dict:
        return {"tau": self.tau, "err": self.err, "intercept": self.intercept, "model": self.model, "n_used": self.n_used}


def tau_fit(series: DecaySeries, oz_dim: Optional[int] = None) -> TauFit:
    """Slope of −log value against length; with oz_dim the (d−1)/2 log(2πL) correction is removed first."""
    L, logv, sigma = _usable(series)
    y = -logv
    model = "naive"
    if oz_dim is not None:
        y = y - 0.5 * (oz_dim - 1) * np.log(2 * math.pi * L)
        model = "oz"
    fit = weighted_line(L, y, sigma)
    return TauFit(fit.slope, fit.slope_err, fit.intercept, model, len(L))


def compare_tau_models(series: DecaySeries, dim: int, sigmas: float = 2.0) -> dict:
    naive = tau_fit(series)
    oz = tau_fit(series, oz_dim=dim)
    joint = math.hypot(naive.err, oz.err)
    diff = naive.tau - oz.tau
    disagree = abs(diff) > sigmas * joint if joint > 0 else abs(diff) > 1e-9
    if disagree:
        log.info("naive and OZ-aware tau differ by %.3g (joint error %.3g)", diff, joint)
    return {"naive": naive.to_record(), "oz": oz.to_record(), "difference": diff, "joint_err": joint, "disagree": disagree}


@dataclass(frozen=True)
class OZFit:
    tau: float
    tau_err: float
    phi: float
    phi_err: float
    residuals: Tuple[float, ...]
    corrections: Tuple[float, ...]
    residual_trend: float
    log_term: float
    mismatch: bool

    @property
    def residuals_decreasing(self) -> bool:
        return self.residual_trend < 1.0

    def to_record(self) -> dict:
        return {
            "tau": self.tau,
            "tau_err": self.tau_err,
            "Phi": self.phi,
            "Phi_err": self.phi_err,
            "residuals": list(self.residuals),
            "corrections": list(self.corrections),
            "residual_trend": self.residual_trend,
            "log_term": self.log_term,
            "mismatch": self.mismatch,
        }


def _half_ratio(residuals: np.ndarray) -> float:
    half = len(residuals) // 2
    first = float(np.mean(np.abs(residuals[:half])))
    second = float(np.mean(np.abs(residuals[half:])))
    if first == 0.0:
        return 0.0 if second == 0.0 else math.inf
    return second / first


def oz_fit(series: DecaySeries, dim: int, correction_order: int = 0, sigmas: float = 3.0) -> OZFit:
    """Fit log value = log Φ − (d−1)/2 log(2πL) − τL + Σ_k c_k L^{−k}.

    The pure model (no corrections) is always fitted as well: its residual trend is the ratio of mean
    |residual| over the far half of the range to the near half, and a significant extra log L term
    in it marks a series that does not have the OZ power law.
    """
    L, logv, sigma = _usable(series)
    y = logv + 0.5 * (dim - 1) * np.log(2 * math.pi * L)
    columns = [np.ones_like(L), -L] + [L ** (-k) for k in range(1, correction_order + 1)]
    fit = weighted_lstsq(np.column_stack(columns), y, sigma)
    err = fit.errors
    phi = math.exp(fit.coef[0])

    pure = weighted_lstsq(np.column_stack([np.ones_like(L), -L]), y, sigma)
    free_fit = weighted_lstsq(np.column_stack([np.ones_like(L), -L, np.log(L)]), y, sigma)
    log_term = float(free_fit.coef[2])
    mismatch = abs(log_term) > max(sigmas * float(free_fit.errors[2]), 1e-8)
    if mismatch:
        log.warning("OZ power law does not fit the %s series (extra log term %.3g)", series.source, log_term)
    return OZFit(
        tau=float(fit.coef[1]),
        tau_err=float(err[1]),
        phi=phi,
        phi_err=phi * float(err[0]),
        residuals=tuple(float(r) for r in fit.residuals),
        corrections=tuple(float(c) for c in fit.coef[2:]),
        residual_trend=_half_ratio(pure.residuals),
        log_term=log_term,
        mismatch=bool(mismatch),
    )


def oz_series(tau: float, phi: float, dim: int, n_list: Sequence[int], step: Optional[Sequence[int]] = None) -> DecaySeries:
    """Φ / √((2πL)^{d−1}) e^{−τL} at L = n‖step‖."""
    step_t = tuple(int(c) for c in step) if step is not None else None
    length = float(np.linalg.norm(step_t)) if step_t else 1.0
    values = tuple(
        phi / math.sqrt((2 * math.pi * n * length) ** (dim - 1)) * math.exp(-tau * n * length) for n in n_list
    )
    direction = tuple(np.asarray(step_t, dtype=float) / length) if step_t else (1.0,) + (0.0,) * (dim - 1)
    return DecaySeries(direction, tuple(int(n) for n in n_list), values, (), "synthetic", step_t)


def rate_profile(series: DecaySeries) -> List[dict]:
    """−log(value)/L with its error, per point."""
    rows = []
    errors = series.std_errors or (0.0,) * len(series.n)
    for n, L, v, e in zip(series.n, series.lengths(), series.values, errors):
        if v <= 0:
            continue
        rows.append({"n": n, "rate": -math.log(v) / L, "std_error": e / (v * L) if e else 0.0})
    return rows


# ----------------------------------------------------------------------
# τ-surfaces
# ----------------------------------------------------------------------
@dataclass(eq=False)
class TauSurface:
    directions: np.ndarray
    tau: np.ndarray
    tau_err: np.ndarray = None
    tau_fn: Optional[Callable[[np.ndarray], float]] = field(default=None, repr=False)

    def __post_init__(self):
        self.directions = np.asarray(self.directions, dtype=float)
        self.directions = self.directions / np.linalg.norm(self.directions, axis=1, keepdims=True)
        self.tau = np.asarray(self.tau, dtype=float)
        self.tau_err = np.zeros_like(self.tau) if self.tau_err is None else np.asarray(self.tau_err, dtype=float)
        if len(self.tau) != len(self.directions):
            raise ContractViolation("directions and tau differ in length")

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], float], directions: Sequence[Sequence[float]]) -> "TauSurface":
        dirs = np.asarray(directions, dtype=float)
        dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
        return cls(dirs, np.array([fn(d) for d in dirs]), None, fn)

    @classmethod
    def from_tilt_points(cls, points) -> "TauSurface":
        """Surface of τ(μ̂) = <s, μ̂> read off traced tilt points."""
        return cls(np.array([p.mu_hat for p in points]), np.array([p.tau for p in points]))

    def tau_of(self, x: np.ndarray) -> Optional[Tuple[float, float]]:
        """(τ(x), error) by homogeneity, or None when x̂ is not in the sample and no τ function is known."""
        norm = float(np.linalg.norm(x))
        x_hat = x / norm
        if self.tau_fn is not None:
            return norm * float(self.tau_fn(x_hat)), 0.0
        match = np.nonzero(np.all(np.abs(self.directions - x_hat) < 1e-9, axis=1))[0]
        if not len(match):
            return None
        i = int(match[0])
        return norm * float(self.tau[i]), norm * float(self.tau_err[i])

    def to_record(self) -> dict:
        return {
            "directions": self.directions.tolist(),
            "tau": self.tau.tolist(),
            "tau_err": self.tau_err.tolist(),
        }

    @classmethod
    def from_record(cls, record: dict) -> "TauSurface":
        return cls(np.asarray(record["directions"]), np.asarray(record["tau"]), record.get("tau_err"))


def equidecay_surface(surface: TauSurface) -> np.ndarray:
    """Boundary points x̂/τ(x̂) of {τ <= 1}."""
    if np.any(surface.tau <= 0) or not np.all(np.isfinite(surface.tau)):
        raise ContractViolation("tau must be positive and finite on every direction")
    return surface.directions / surface.tau[:, None]


def direction_grid(dim: int, refine_around: Optional[Sequence[Sequence[float]]] = None, spread: float = 0.15) -> np.ndarray:
    """{−1,0,1}^d minus 0, normalized, plus nudges of each requested direction along every axis."""
    dirs = [np.asarray(v, dtype=float) for v in itertools.product((-1, 0, 1), repeat=dim) if any(v)]
    for r in refine_around or ():
        r = np.asarray(r, dtype=float)
        r = r / np.linalg.norm(r)
        dirs.append(r)
        for k in range(dim):
            for sign in (1, -1):
                nudged = r + sign * spread * np.eye(dim)[k]
                if np.linalg.norm(nudged) > 1e-9:
                    dirs.append(nudged)
    out = np.array([d / np.linalg.norm(d) for d in dirs])
    _, keep = np.unique(np.round(out, 12), axis=0, return_index=True)
    return out[np.sort(keep)]


def cap_grid(center: Sequence[float], n: int, half_angle: float) -> np.ndarray:
    """n unit vectors spread over the spherical cap of the given half-angle around `center`.

    Even angles in d=2, a Fibonacci spiral in d=3 and seeded Gaussian scatter above that.
    """
    center = np.asarray(center, dtype=float)
    center = center / np.linalg.norm(center)
    dim = len(center)
    if dim == 2:
        base = math.atan2(center[1], center[0])
        angles = base + np.linspace(-half_angle, half_angle, n)
        return np.column_stack([np.cos(angles), np.sin(angles)])
    if dim == 3:
        i = np.arange(n) + 0.5
        z = 1 - (1 - math.cos(half_angle)) * i / n
        r = np.sqrt(1 - z * z)
        theta = i * math.pi * (3 - math.sqrt(5))
        cap = np.column_stack([r * np.cos(theta), r * np.sin(theta), z])
        # Householder reflection taking e3 to center
        e3 = np.array([0.0, 0.0, 1.0])
        v = e3 - center
        if np.linalg.norm(v) < 1e-12:
            return cap
        v = v / np.linalg.norm(v)
        return cap - 2 * np.outer(cap @ v, v)
    rng = np.random.default_rng(0)
    g = rng.standard_normal((n, dim))
    g -= np.outer(g @ center, center)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    angles = half_angle * rng.uniform(0, 1, n) ** (1 / (dim - 1))
    return np.cos(angles)[:, None] * center + np.sin(angles)[:, None] * g


@dataclass
class ConvexityReport:
    pairs_checked: int
    defects: List[str]
    equality_cases: List[Tuple[int, int]]
    min_margin: float

    @property
    def passed(self) -> Optional[bool]:
        """None when no pair could be evaluated."""
        if not self.pairs_checked:
            return None
        return not self.defects

    def to_record(self) -> dict:
        return {
            "pairs_checked": self.pairs_checked,
            "passed": self.passed,
            "defects": self.defects,
            "equality_cases": [list(p) for p in self.equality_cases],
            "min_margin": self.min_margin,
        }


def convexity_check(surface: TauSurface, sigmas: float = 3.0, atol: float = 1e-9) -> ConvexityReport:
    """τ(x+y) <= τ(x) + τ(y) over direction pairs; violations past `sigmas` are defects."""
    if np.linalg.matrix_rank(surface.directions) < surface.dim:
        raise ContractViolation("convexity check needs directions spanning the space")
    defects, equal = [], []
    checked = 0
    min_margin = math.inf
    dirs = surface.directions
    for i, j in itertools.combinations(range(len(dirs)), 2):
        z = dirs[i] + dirs[j]
        if np.linalg.norm(z) < 1e-9:
            continue
        tz = surface.tau_of(z)
        if tz is None:
            continue
        checked += 1
        margin = surface.tau[i] + surface.tau[j] - tz[0]
        sigma = math.sqrt(surface.tau_err[i] ** 2 + surface.tau_err[j] ** 2 + tz[1] ** 2)
        min_margin = min(min_margin, margin)
        if margin < -sigmas * sigma - atol:
            defects.append(f"tau(d{i}+d{j}) exceeds tau(d{i})+tau(d{j}) by {-margin:.3g} ({sigmas:g} sigma = {sigmas * sigma:.3g})")
        elif abs(margin) <= max(sigmas * sigma, atol * max(1.0, abs(tz[0]))):
            equal.append((i, j))
    if not checked:
        log.warning("convexity: no direction pair has tau at its sum; nothing was checked")
    if equal:
        log.info("%d direction pairs sit on the equality case of subadditivity", len(equal))
    return ConvexityReport(checked, defects, equal, min_margin if checked else 0.0)


@dataclass(frozen=True, eq=False)
class CurvatureResult:
    point: np.ndarray
    normal: np.ndarray
    curvatures: np.ndarray
    std_errors: np.ndarray
    n_neighbors: int

    @property
    def gaussian(self) -> float:
        return float(np.prod(self.curvatures))

    def positive(self, sigmas: float = 2.0) -> bool:
        return bool(np.all(self.curvatures - sigmas * self.std_errors > 0))

    def to_record(self) -> dict:
        return {
            "point": self.point.tolist(),
            "normal": self.normal.tolist(),
            "curvatures": self.curvatures.tolist(),
            "std_errors": self.std_errors.tolist(),
            "gaussian": self.gaussian,
            "positive": self.positive(),
        }


def _tangent_frame(normal: np.ndarray) -> np.ndarray:
    """(d−1, d) orthonormal rows spanning normal⊥."""
    _, _, vt = np.linalg.svd(normal[None, :])
    return vt[1:]


def curvature_check(
    points: np.ndarray,
    direction: Sequence[float],
    n_neighbors: Optional[int] = None,
    max_condition: float = 1e8,
) -> CurvatureResult:
    """Principal curvatures at the surface point closest to the ray through `direction`.

    A quadratic graph w = c + g·u + ½ uᵀAu is fitted over the tangent frame; the normal is then
    tilted by the fitted gradient and the fit repeated twice. Curvatures are the eigenvalues of −A
    (positive for a convex surface seen from outside).
    """
    points = np.asarray(points, dtype=float)
    d = points.shape[1]
    m = d - 1
    n_quad = m * (m + 1) // 2
    needed = d * (d + 1) // 2 + d + 1
    k = n_neighbors or max(3 * needed, 20)
    if len(points) < max(k, needed):
        raise FitError(f"insufficient angular resolution: {len(points)} points, need {max(k, needed)}")
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    cosines = (points @ direction) / np.linalg.norm(points, axis=1)
    center = points[int(np.argmax(cosines))]
    _, idx = KDTree(points).query(center, k=k)
    local = points[np.atleast_1d(idx)] - center
    normal = center / np.linalg.norm(center)
    pairs = [(a, b) for a in range(m) for b in range(a, m)]
    for _ in range(3):
        frame = _tangent_frame(normal)
        u = local @ frame.T
        w = local @ normal
        design = np.column_stack(
            [np.ones(len(u))] + [u[:, a] for a in range(m)] + [u[:, a] * u[:, b] * (0.5 if a == b else 1.0) for a, b in pairs]
        )
        if np.linalg.matrix_rank(design) < design.shape[1] or np.linalg.cond(design) > max_condition:
            raise FitError("insufficient angular resolution: local quadratic fit is ill-conditioned")
        fit = weighted_lstsq(design, w)
        grad = fit.coef[1:1 + m]
        normal = normal - frame.T @ grad
        normal = normal / np.linalg.norm(normal)
    A = np.zeros((m, m))
    var = np.zeros((m, m))
    err = fit.errors
    for col, (a, b) in enumerate(pairs):
        A[a, b] = A[b, a] = fit.coef[1 + m + col]
        var[a, b] = var[b, a] = err[1 + m + col] ** 2
    eig, vec = np.linalg.eigh(-A)
    eig_err = np.sqrt(np.array([np.sum(np.outer(vec[:, i], vec[:, i]) ** 2 * var) for i in range(m)]))
    return CurvatureResult(center, normal, eig, eig_err, len(local))


# ----------------------------------------------------------------------
# Duals and support values
# ----------------------------------------------------------------------
@dataclass
class DualResult:
    x_hat: np.ndarray
    duals: np.ndarray
    representative: Optional[np.ndarray]
    tolerance: float

    def to_record(self) -> dict:
        return {
            "x_hat": self.x_hat.tolist(),
            "duals": self.duals.tolist(),
            "representative": None if self.representative is None else self.representative.tolist(),
            "tolerance": self.tolerance,
        }


def dual_directions(
    x_hat: Sequence[float],
    phi_bar: Callable[[np.ndarray], float] | Tuple[np.ndarray, np.ndarray],
    grid: Optional[np.ndarray] = None,
    rtol: float = 1e-6,
    widenings: int = 3,
) -> DualResult:
    """Directions ŝ whose radial point s = r(ŝ)ŝ on the boundary of {s : <s,ŷ> <= φ̄(ŷ)} attains <s,x̂> = φ̄(x̂).

    `phi_bar` is a function of unit vectors or a (directions, values) table. r(ŝ) is the smallest
    φ̄(ŷ)/<ŝ,ŷ> over table directions ŷ with <ŝ,ŷ> > 0. The representative is the dual closest to x̂.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    x_hat = x_hat / np.linalg.norm(x_hat)
    dim = len(x_hat)
    if callable(phi_bar):
        table_dirs = direction_grid(dim, refine_around=[x_hat])
        table_vals = np.array([phi_bar(y) for y in table_dirs])
        phi_x = float(phi_bar(x_hat))
    else:
        table_dirs = np.asarray(phi_bar[0], dtype=float)
        table_dirs = table_dirs / np.linalg.norm(table_dirs, axis=1, keepdims=True)
        table_vals = np.asarray(phi_bar[1], dtype=float)
        match = np.nonzero(np.all(np.abs(table_dirs - x_hat) < 1e-9, axis=1))[0]
        if not len(match):
            raise ContractViolation("phi-bar table has no entry for x_hat")
        phi_x = float(table_vals[match[0]])
    candidates = table_dirs if grid is None else np.asarray(grid, dtype=float)
    candidates = candidates / np.linalg.norm(candidates, axis=1, keepdims=True)

    scores = []
    for s_hat in candidates:
        dots = table_dirs @ s_hat
        ok = dots > 1e-12
        r = float(np.min(table_vals[ok] / dots[ok]))
        scores.append(r * float(s_hat @ x_hat))
    scores = np.array(scores)
    tol = rtol
    for attempt in range(widenings + 1):
        hit = np.abs(scores - phi_x) <= tol * max(1.0, abs(phi_x))
        if hit.any():
            break
        log.warning("no dual direction within tolerance %.1g; widening", tol)
        tol *= 10
    duals = candidates[hit]
    rep = None
    if len(duals):
        rep = duals[int(np.argmax(duals @ x_hat))]
    return DualResult(x_hat, duals, rep, tol)


@dataclass(frozen=True)
class PolarSupport:
    support: Tuple[float, ...]
    max_relative_gap: float


def polar_support_check(surface: TauSurface) -> PolarSupport:
    """Support values of K = ∩{<s,x̂> <= τ(x̂)} at the sampled directions, by linear programming."""
    A = surface.directions
    b = surface.tau
    support = []
    for x_hat in A:
        res = linprog(-x_hat, A_ub=A, b_ub=b, bounds=[(None, None)] * surface.dim, method="highs")
        if res.status != 0:
            raise ContractViolation(f"polar body is unbounded or empty along {x_hat.tolist()}")
        support.append(float(-res.fun))
    gaps = np.abs(np.asarray(support) - b) / b
    return PolarSupport(tuple(support), float(gaps.max()))


@dataclass(frozen=True)
class TauSanity:
    ratio: float
    ok: bool


def tau_sanity(surface: TauSurface) -> TauSanity:
    """max τ / min τ over the sampled directions must stay below 100."""
    lo, hi = float(surface.tau.min()), float(surface.tau.max())
    ratio = math.inf if lo <= 0 else hi / lo
    return TauSanity(ratio, bool(lo > 0 and ratio <= TAU_NORM_RATIO))
