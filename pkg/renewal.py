"""Renewal machinery for lattice kernels.

h = δ₀ + f⋆h is solved on a finite window, tilts s with F(s) = 1 are found on rays, and the tilted
walk's drift and covariance feed the Ornstein-Zernike prediction. Everything here works on any
Kernel, empirical or synthetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.special import logsumexp

from asymptotics import weighted_line
from console import get_logger
from errors import ContractViolation, GeneratingOverflow, SingularCovarianceError, TiltError
from events import Direction
from kernel import Kernel
from lattice import Box, LatticePoint, add, origin, scale, unit

log = get_logger(__name__)

# log of the largest tilted sum generating_value will return
LOG_MAGNITUDE_CAP = 700.0
TILT_TOLERANCE = 1e-10
SINGULAR_RTOL = 1e-12


# ----------------------------------------------------------------------
# Synthetic kernels
# ----------------------------------------------------------------------
def geometric_kernel(dim: int, q: float) -> Kernel:
    """q δ_{u1}: h(n u1) = q^n."""
    return Kernel(dim, "f", {unit(dim, 0): q})


def two_atom_kernel(dim: int, q: float) -> Kernel:
    """(q/2)(δ_{u1+u2} + δ_{u1-u2})."""
    e1, e2 = unit(dim, 0), unit(dim, 1)
    return Kernel(dim, "f", {add(e1, e2): q / 2, add(e1, scale(-1, e2)): q / 2})


def three_atom_kernel(dim: int, q: float, q2: float) -> Kernel:
    """Two-atom kernel plus q2 δ_{2u1}."""
    entries = dict(two_atom_kernel(dim, q).entries)
    entries[scale(2, unit(dim, 0))] = q2
    return Kernel(dim, "f", entries)


def full_rank_kernel(dim: int, forward: float = 0.3, double: float = 0.2, transverse: float = 0.3) -> Kernel:
    """Aperiodic kernel with full-rank tilted covariance.

    Mass `forward` on u1, `double` on 2u1 and `transverse` split evenly over u1 ± u_k, k >= 2.
    """
    e1 = unit(dim, 0)
    entries = {e1: forward, scale(2, e1): double}
    share = transverse / (2 * (dim - 1))
    for k in range(1, dim):
        ek = unit(dim, k)
        entries[add(e1, ek)] = share
        entries[add(e1, scale(-1, ek))] = share
    return Kernel(dim, "f", entries)


SYNTHETIC_KERNELS = {
    "geometric": geometric_kernel,
    "two-atom": two_atom_kernel,
    "three-atom": three_atom_kernel,
    "full-rank": full_rank_kernel,
}


def synthetic_kernel(name: str, dim: int, **params) -> Kernel:
    try:
        factory = SYNTHETIC_KERNELS[name]
    except KeyError:
        raise ContractViolation(f"unknown synthetic kernel {name!r}; choose from {sorted(SYNTHETIC_KERNELS)}") from None
    return factory(dim, **params)


# ----------------------------------------------------------------------
# Convolution
# ----------------------------------------------------------------------
def _in_window(x: LatticePoint, window: Optional[Box]) -> bool:
    return window is None or window.contains(x)


def convolve(a: Kernel, b: Kernel, window: Optional[Box] = None, kind: str = "synthetic") -> Kernel:
    """(a⋆b)(x) = Σ_z a(z) b(x−z) for x in the window, with first-order propagated errors."""
    if a.dim != b.dim:
        raise ContractViolation(f"cannot convolve kernels of dimension {a.dim} and {b.dim}")
    out: Dict[LatticePoint, float] = {}
    var: Dict[LatticePoint, float] = {}
    for x, va in a:
        sa = a.error(x)
        for y, vb in b:
            z = add(x, y)
            if not _in_window(z, window):
                continue
            out[z] = out.get(z, 0.0) + va * vb
            sb = b.error(y)
            if sa or sb:
                var[z] = var.get(z, 0.0) + (vb * sa) ** 2 + (va * sb) ** 2
    errors = {z: math.sqrt(v) for z, v in var.items()}
    return Kernel(a.dim, kind, out, errors)


# ----------------------------------------------------------------------
# Grid solver
# ----------------------------------------------------------------------
class _Shifts:
    """For each support point z of a kernel, the flat window index of x − z (or −1)."""

    def __init__(self, f: Kernel, window: Box):
        coords = window.coords
        lo = np.asarray(window.lo)
        hi = np.asarray(window.hi)
        strides = np.asarray(window.strides)
        self.values: List[float] = []
        self.sources: List[np.ndarray] = []
        for z, v in f.nonzero():
            src = coords - np.asarray(z)
            ok = np.all((src >= lo) & (src <= hi), axis=1)
            flat = np.where(ok, (src - lo) @ strides, -1)
            self.values.append(v)
            self.sources.append(flat)

    def apply(self, h: np.ndarray, cells: Optional[np.ndarray] = None) -> np.ndarray:
        """(f⋆h) at `cells` (all cells when None), with h read as 0 outside the window."""
        n = len(h) if cells is None else len(cells)
        acc = np.zeros(n)
        for v, src in zip(self.values, self.sources):
            s = src if cells is None else src[cells]
            ok = s >= 0
            acc[ok] += v * h[s[ok]]
        return acc


@dataclass
class RenewalGrid:
    """Dense values of a kernel on a window box (flat, C order over window.coords)."""

    window: Box
    values: np.ndarray
    kind: str = "h"

    def __getitem__(self, x: Sequence[int]) -> float:
        x = tuple(int(c) for c in x)
        if not self.window.contains(x):
            return 0.0
        return float(self.values[self.window.index(x)])

    def ray(self, step: Sequence[int], n_list: Sequence[int]) -> np.ndarray:
        return np.array([self[scale(int(n), step)] for n in n_list])

    def to_kernel(self, min_value: float = 0.0) -> Kernel:
        keep = np.nonzero(self.values > min_value)[0]
        entries = {self.window.point(int(i)): float(self.values[i]) for i in keep}
        return Kernel(self.window.dim, self.kind, entries, radius=max(max(map(abs, self.window.lo)), max(self.window.hi)))


def ray_window(dim: int, length: int, width: Optional[int] = None) -> Box:
    """Window [0, length] along u1 and [−width, width] across (width defaults to length)."""
    width = length if width is None else width
    return Box((0,) + (-width,) * (dim - 1), (length,) + (width,) * (dim - 1))


def _as_window(window, dim: int) -> Box:
    if isinstance(window, Box):
        return window
    return ray_window(dim, int(window))


def _check_direct_kernel(f: Kernel, t: Direction) -> Tuple[Kernel, float]:
    f = f.nonzero()
    if f[origin(f.dim)] != 0.0:
        raise ContractViolation(f"f(0) must be 0, got {f[origin(f.dim)]}")
    if not len(f):
        raise ContractViolation("direct kernel is empty")
    levels = [t.level(x) for x, _ in f]
    if any(not t.gt(lv, 0) for lv in levels):
        raise ContractViolation(f"f must live in the open half-space <t,x> > 0 for t={t.t}")
    return f, min(levels)


def solve_grid(f: Kernel, window, t: Optional[Direction] = None) -> RenewalGrid:
    """h = δ₀ + f⋆h on the window, band by band in increasing <t,x>.

    Bands have the width of the smallest step level of f, so every value in a band depends only on
    earlier bands and a band is one vectorized gather.
    """
    window = _as_window(window, f.dim)
    t = t or Direction.axis(f.dim, 0)
    f, delta_min = _check_direct_kernel(f, t)
    shifts = _Shifts(f, window)
    levels = t.levels(window.coords)
    order = np.argsort(levels, kind="stable")
    sorted_levels = levels[order]
    h = np.zeros(window.n_vertices)
    zero = origin(f.dim)
    if window.contains(zero):
        h[window.index(zero)] = 1.0
    i, n = 0, len(order)
    while i < n:
        j = int(np.searchsorted(sorted_levels, sorted_levels[i] + delta_min - t.tol, side="left"))
        j = max(j, i + 1)
        cells = order[i:j]
        h[cells] += shifts.apply(h, cells)
        i = j
    return RenewalGrid(window, h, "h")


def renewal_solve(f: Kernel, window, t: Optional[Direction] = None) -> Kernel:
    """h with h(0) = 1 solving h = δ₀ + f⋆h on the window."""
    grid = solve_grid(f, window, t)
    kernel = grid.to_kernel()
    kernel.radius = max(max(map(abs, grid.window.lo)), max(grid.window.hi))
    return kernel


def renewal_residual(f: Kernel, grid: RenewalGrid) -> float:
    """max over the window of |h − δ₀ − f⋆h|."""
    rhs = _Shifts(f.nonzero(), grid.window).apply(grid.values)
    zero = origin(grid.window.dim)
    if grid.window.contains(zero):
        rhs[grid.window.index(zero)] += 1.0
    return float(np.max(np.abs(grid.values - rhs)))


def series_tail_bound(f: Kernel, K: int) -> float:
    """Bound on Σ_{k>K} f^{⋆k}(x), uniform in x."""
    mass = f.total_mass
    if mass >= 1:
        return math.inf
    return mass ** (K + 1) / (1 - mass)


def series_solve(f: Kernel, window, K: int) -> Tuple[RenewalGrid, float]:
    """δ₀ + Σ_{k=1..K} f^{⋆k} on the window, with series_tail_bound(f, K)."""
    window = _as_window(window, f.dim)
    shifts = _Shifts(f.nonzero(), window)
    term = np.zeros(window.n_vertices)
    zero = origin(f.dim)
    if window.contains(zero):
        term[window.index(zero)] = 1.0
    total = term.copy()
    for _ in range(int(K)):
        term = shifts.apply(term)
        total += term
    return RenewalGrid(window, total, "h"), series_tail_bound(f, K)


# ----------------------------------------------------------------------
# Generating functions and tilts
# ----------------------------------------------------------------------
def log_generating(k: Kernel, s: Sequence[float]) -> float:
    k = k.nonzero()
    if not len(k):
        return -math.inf
    s = np.asarray(s, dtype=float)
    return float(logsumexp(np.log(k.values) + k.points @ s))


def generating_value(k: Kernel, s: Sequence[float]) -> float:
    """Σ_x k(x) e^{<s,x>} over the kernel's support."""
    value = log_generating(k, s)
    if value > LOG_MAGNITUDE_CAP:
        raise GeneratingOverflow(f"tilted sum exceeds e^{LOG_MAGNITUDE_CAP:g} at s={list(s)}")
    return math.exp(value)


def solve_tilt_boundary(f: Kernel, direction: Optional[Sequence[float]] = None, lambda_cap: float = 1e6) -> np.ndarray:
    """The point λ·direction with F(λ·direction) = 1.

    λ is bracketed by doubling and then found with Brent's method on log F.
    """
    direction = np.asarray(direction if direction is not None else unit(f.dim, 0), dtype=float)
    direction = direction / np.linalg.norm(direction)
    if f.total_mass >= 1:
        raise TiltError(f"kernel mass >= 1 (F(0) = {f.total_mass:.6g})")
    g = lambda lam: log_generating(f, lam * direction)
    lo, hi = 0.0, 1.0
    while g(hi) <= 0:
        lo, hi = hi, 2 * hi
        if hi > lambda_cap:
            raise TiltError(f"ray {direction.tolist()} does not cross F = 1 below lambda={lambda_cap:g}")
    lam = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    s = lam * direction
    residual = abs(generating_value(f, s) - 1)
    if residual > TILT_TOLERANCE:
        log.warning("tilt residual %.3g above %.1g", residual, TILT_TOLERANCE)
    return s


@dataclass(frozen=True, eq=False)
class TiltedDistribution:
    points: np.ndarray
    q: np.ndarray
    s: np.ndarray
    log_mass: float

    @property
    def mass(self) -> float:
        return math.exp(self.log_mass)


def tilt(f: Kernel, s: Sequence[float]) -> TiltedDistribution:
    """q(x) ∝ f(x) e^{<s,x>}, normalized to a probability."""
    f = f.nonzero()
    s = np.asarray(s, dtype=float)
    logw = np.log(f.values) + f.points @ s
    lse = float(logsumexp(logw))
    return TiltedDistribution(f.points, np.exp(logw - lse), s, lse)


@dataclass(frozen=True)
class TailCertificate:
    rate: Optional[float]
    boundary_mass: float
    certified: bool


def tail_certificate(dist: TiltedDistribution) -> TailCertificate:
    """Exponential decay of q across L1 shells, and the mass on the outermost shell."""
    norms = np.abs(dist.points).sum(axis=1)
    shells = np.unique(norms)
    boundary = float(dist.q[norms == shells[-1]].sum())
    if len(shells) < 2:
        return TailCertificate(None, boundary, True)
    shell_mass = np.array([dist.q[norms == r].sum() for r in shells])
    slope = np.polyfit(shells, np.log(shell_mass), 1)[0]
    return TailCertificate(float(-slope), boundary, bool(slope < 0 or len(shells) <= 3))


def mean_cov(f: Kernel, s: Sequence[float], allow_singular: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Drift and covariance of the normalized tilted distribution (gradient and Hessian of log F)."""
    dist = tilt(f, s)
    mu = dist.q @ dist.points
    centered = dist.points - mu
    cov = (centered * dist.q[:, None]).T @ centered
    cov = (cov + cov.T) / 2
    eig = np.linalg.eigvalsh(cov)
    if eig[0] <= SINGULAR_RTOL * max(1.0, eig[-1]) and not allow_singular:
        raise SingularCovarianceError(f"tilted covariance is singular (eigenvalues {eig.tolist()})")
    return mu, cov


@dataclass(frozen=True)
class FiniteDifferenceReport:
    gradient_error: float
    hessian_error: float
    ok: bool


def finite_difference_check(
    f: Kernel,
    s: Sequence[float],
    step: float = 1e-5,
    grad_tol: float = 1e-6,
    hess_tol: float = 1e-4,
) -> FiniteDifferenceReport:
    s = np.asarray(s, dtype=float)
    d = len(s)
    mu, cov = mean_cov(f, s, allow_singular=True)
    logF = lambda v: log_generating(f, v)
    eye = np.eye(d) * step
    grad = np.array([(logF(s + eye[i]) - logF(s - eye[i])) / (2 * step) for i in range(d)])
    hess = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            hess[i, j] = (
                logF(s + eye[i] + eye[j]) - logF(s + eye[i] - eye[j])
                - logF(s - eye[i] + eye[j]) + logF(s - eye[i] - eye[j])
            ) / (4 * step * step)
    g_err = float(np.max(np.abs(grad - mu)))
    h_err = float(np.max(np.abs(hess - cov)))
    return FiniteDifferenceReport(g_err, h_err, g_err < grad_tol and h_err < hess_tol)


# ----------------------------------------------------------------------
# Models and the OZ prediction
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class RenewalModel:
    f: Optional[Kernel]
    s_star: np.ndarray
    mu: np.ndarray
    cov: np.ndarray
    truncation: Optional[int] = None

    @property
    def dim(self) -> int:
        return len(self.mu)

    @cached_property
    def phi(self) -> float:
        return phi_prefactor(self)

    @property
    def tau_along_mu(self) -> float:
        """<s*, μ̂>, the decay rate per unit length along the drift."""
        return float(self.s_star @ self.mu / np.linalg.norm(self.mu))

    def to_record(self) -> dict:
        return {
            "s_star": self.s_star.tolist(),
            "mu": self.mu.tolist(),
            "cov": self.cov.tolist(),
            "phi": self.phi,
            "tau_along_mu": self.tau_along_mu,
            "truncation": self.truncation,
        }


def build_model(f: Kernel, direction: Optional[Sequence[float]] = None) -> RenewalModel:
    s = solve_tilt_boundary(f, direction)
    mu, cov = mean_cov(f, s)
    if float(s @ mu) <= 0:
        raise ContractViolation(f"<s*, mu> = {float(s @ mu):.3g} is not positive")
    return RenewalModel(f, s, mu, cov, f.radius)


def _transverse_form(cov: np.ndarray, mu: np.ndarray) -> float:
    """det C · <C⁻¹μ, μ>; raises when C is singular."""
    eig = np.linalg.eigvalsh((cov + cov.T) / 2)
    if eig[0] <= SINGULAR_RTOL * max(1.0, eig[-1]):
        raise SingularCovarianceError("covariance is singular; the OZ prefactor is undefined")
    return float(np.linalg.det(cov) * (mu @ np.linalg.solve(cov, mu)))


def oz_predict(model: RenewalModel, n: int) -> float:
    """e^{−<⌊nμ⌋,s>} / √((2πn)^{d−1} det C <C⁻¹μ,μ>)."""
    d = model.dim
    x = np.floor(n * model.mu + 1e-9)
    form = _transverse_form(model.cov, model.mu)
    return float(math.exp(-float(x @ model.s_star)) / math.sqrt((2 * math.pi * n) ** (d - 1) * form))


def phi_prefactor(model: RenewalModel) -> float:
    """√(‖μ‖^{d−1} / (det C <C⁻¹μ,μ>))."""
    d = model.dim
    form = _transverse_form(model.cov, model.mu)
    return math.sqrt(float(np.linalg.norm(model.mu)) ** (d - 1) / form)


# ----------------------------------------------------------------------
# Checks
# ----------------------------------------------------------------------
@dataclass
class MassGapReport:
    ratios: Dict[LatticePoint, float]
    max_ratio: float
    rates: Dict[str, Tuple[Optional[float], Optional[float]]]
    gap_positive: bool
    defects: List[str] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "ratios": [{"x": list(x), "ratio": r} for x, r in self.ratios.items()],
            "max_ratio": self.max_ratio,
            "rates": {k: {"rate": r, "std_error": e} for k, (r, e) in self.rates.items()},
            "gap_positive": self.gap_positive,
            "defects": self.defects,
        }


def mass_gap_check(f: Kernel, h: Kernel, steps: Optional[Sequence[Sequence[int]]] = None, sigmas: float = 2.0) -> MassGapReport:
    """f/h pointwise and the exponential rate of the ratio along the rays n·step."""
    defects, ratios = [], {}
    for x, fv in f:
        if fv <= 0:
            continue
        hv = h[x]
        if hv <= 0:
            defects.append(f"f{x}={fv:.3g} > 0 where h is 0")
            continue
        ratios[x] = fv / hv
        if fv > hv + 3 * math.hypot(f.error(x), h.error(x)):
            defects.append(f"f{x}={fv:.3g} exceeds h{x}={hv:.3g}")
    steps = [tuple(s) for s in (steps or [unit(f.dim, 0)])]
    rates = {}
    positive = bool(steps)
    for step in steps:
        ns, ys, sig = [], [], []
        for n in range(1, 10_000):
            x = scale(n, step)
            if x not in ratios and h[x] <= 0:
                break
            r = ratios.get(x, 0.0)
            if r <= 0:
                continue
            ns.append(n)
            ys.append(-math.log(r))
            sig.append(math.hypot(f.error(x) / f[x], h.error(x) / h[x]))
        key = ",".join(map(str, step))
        if len(ns) < 2:
            rates[key] = (None, None)
            positive = False
            continue
        fit = weighted_line(ns, ys, sig if any(sig) else None)
        rates[key] = (fit.slope, fit.slope_err)
        positive &= fit.slope - sigmas * fit.slope_err > 0
    return MassGapReport(ratios, max(ratios.values(), default=0.0), rates, positive, defects)


def _walk_axis(points: np.ndarray) -> Optional[int]:
    for k in range(points.shape[1]):
        if np.all(points[:, k] > 0):
            return k
    return None


def step_count_profile(model: RenewalModel, x: Sequence[int], k_max: Optional[int] = None) -> np.ndarray:
    """P(S_k = x) for k = 0..k_max under the tilted walk with increments q."""
    x = tuple(int(c) for c in x)
    dist = tilt(model.f, model.s_star)
    axis = _walk_axis(dist.points)
    if k_max is None:
        if axis is None:
            raise ContractViolation("k_max is required when no coordinate grows at every step")
        k_max = x[axis] // int(dist.points[:, axis].min())
    # a walk that ends at x within k_max steps strays at most half its range from the 0–x box
    reach = [int(math.ceil(np.abs(dist.points[:, k]).max() * k_max / 2)) for k in range(model.dim)]
    lo = tuple(min(0, c) - r for c, r in zip(x, reach))
    hi = tuple(max(0, c) + r for c, r in zip(x, reach))
    if axis is not None:
        lo = tuple(0 if k == axis else v for k, v in enumerate(lo))
        hi = tuple(x[axis] if k == axis else v for k, v in enumerate(hi))
    window = Box(lo, hi)
    step_kernel = Kernel(model.dim, "synthetic", {tuple(int(c) for c in p): float(v) for p, v in zip(dist.points, dist.q)})
    shifts = _Shifts(step_kernel, window)
    law = np.zeros(window.n_vertices)
    law[window.index(origin(model.dim))] = 1.0
    target = window.index(x)
    out = np.zeros(int(k_max) + 1)
    out[0] = law[target]
    for k in range(1, int(k_max) + 1):
        law = shifts.apply(law)
        out[k] = law[target]
    return out


def tilted_renewal_value(model: RenewalModel, x: Sequence[int], k_max: Optional[int] = None) -> float:
    """δ₀(x) + e^{−<x,s*>} Σ_k P(S_k = x): h(x) read through the tilted walk."""
    x = tuple(int(c) for c in x)
    profile = step_count_profile(model, x, k_max)
    total = float(profile[1:].sum()) * math.exp(-float(np.dot(x, model.s_star)))
    return total + (1.0 if not any(x) else 0.0)


@dataclass(frozen=True)
class GaussianWindow:
    expected_steps: float
    half_width: float
    outside_mass: float


def gaussian_window_mass(model: RenewalModel, x: Sequence[int], alpha: float = 0.25) -> GaussianWindow:
    """Share of Σ_k P(S_k = x) from step counts k with |k − n_x| >= n_x^{1/2+α}."""
    profile = step_count_profile(model, x)
    n_x = float(np.dot(x, model.mu) / np.dot(model.mu, model.mu))
    width = n_x ** (0.5 + alpha)
    ks = np.arange(len(profile))
    total = profile.sum()
    outside = profile[np.abs(ks - n_x) >= width].sum()
    return GaussianWindow(n_x, width, float(outside / total) if total > 0 else 0.0)


@dataclass(frozen=True, eq=False)
class TiltPoint:
    ray: np.ndarray
    s: np.ndarray
    mu: np.ndarray

    @property
    def mu_hat(self) -> np.ndarray:
        return self.mu / np.linalg.norm(self.mu)

    @property
    def tau(self) -> float:
        """τ(μ̂) = <s, μ̂> by the polar relation."""
        return float(self.s @ self.mu_hat)


def trace_tilt_surface(f: Kernel, rays: Sequence[Sequence[float]]) -> List[TiltPoint]:
    """Points of {F = 1} along several rays, each with its drift."""
    out = []
    for ray in rays:
        ray = np.asarray(ray, dtype=float)
        s = solve_tilt_boundary(f, ray)
        mu, _ = mean_cov(f, s, allow_singular=True)
        out.append(TiltPoint(ray / np.linalg.norm(ray), s, mu))
    return out


def tau_at(f: Kernel, x_hat: Sequence[float], bound: float = 50.0) -> float:
    """max{<s, x̂> : F(s) <= 1}, the support function of {F <= 1} at x̂."""
    x_hat = np.asarray(x_hat, dtype=float)
    x_hat = x_hat / np.linalg.norm(x_hat)
    try:
        start = 0.5 * solve_tilt_boundary(f, x_hat)
    except TiltError:
        start = np.zeros(f.dim)

    def grad_log(s):
        dist = tilt(f, s)
        return dist.q @ dist.points

    result = minimize(
        lambda s: -float(s @ x_hat),
        start,
        jac=lambda s: -x_hat,
        method="SLSQP",
        bounds=[(-bound, bound)] * f.dim,
        constraints=[{"type": "ineq", "fun": lambda s: -log_generating(f, s), "jac": lambda s: -grad_log(s)}],
        options={"ftol": 1e-14, "maxiter": 500},
    )
    if not result.success:
        raise TiltError(f"support function at {x_hat.tolist()} did not converge: {result.message}")
    if np.any(np.abs(result.x) >= bound - 1e-6):
        raise TiltError(f"support function at {x_hat.tolist()} is unbounded")
    return float(result.x @ x_hat)


@dataclass
class ConsistencyRow:
    x: LatticePoint
    h: float
    convolution: float
    sigma: float
    z: Optional[float]


def renewal_consistency(h: Kernel, f: Kernel, points: Sequence[Sequence[int]]) -> List[ConsistencyRow]:
    """z-scores of h(x) − δ₀(x) − (f⋆h)(x) with first-order propagated errors."""
    fh = convolve(f, h)
    rows = []
    for x in points:
        x = tuple(int(c) for c in x)
        delta = 1.0 if not any(x) else 0.0
        diff = h[x] - delta - fh[x]
        sigma = math.hypot(h.error(x), fh.error(x))
        rows.append(ConsistencyRow(x, h[x], fh[x], sigma, diff / sigma if sigma > 0 else None))
    return rows


@dataclass(frozen=True)
class ConvexityProbe:
    coefficient: float
    std_error: float
    offsets: Tuple[float, ...]
    gaps: Tuple[float, ...]

    @property
    def positive(self) -> bool:
        return self.coefficient - 2 * self.std_error > 0


def strict_convexity_probe(f: Kernel, model: RenewalModel, offsets: Sequence[float] = (0.05, 0.1, 0.15, 0.2)) -> ConvexityProbe:
    """Fit τ(μ′) − <μ′, s*> = c ‖μ′ − μ‖² for μ′ = μ + ε v, v ⟂ μ."""
    mu = model.mu
    mu_hat = mu / np.linalg.norm(mu)
    axis = int(np.argmin(np.abs(mu_hat)))
    v = np.eye(model.dim)[axis] - mu_hat[axis] * mu_hat
    v /= np.linalg.norm(v)
    eps, gaps = [], []
    for e in offsets:
        mu_p = mu + e * v
        gap = np.linalg.norm(mu_p) * tau_at(f, mu_p) - float(mu_p @ model.s_star)
        eps.append(float(e))
        gaps.append(float(gap))
    design = np.square(eps)[:, None]
    coef, *_ = np.linalg.lstsq(design, np.asarray(gaps), rcond=None)
    resid = np.asarray(gaps) - design[:, 0] * coef[0]
    dof = max(len(eps) - 1, 1)
    err = math.sqrt(float(resid @ resid) / dof / float(design[:, 0] @ design[:, 0]))
    return ConvexityProbe(float(coef[0]), err, tuple(eps), tuple(gaps))


@dataclass(frozen=True)
class SupermultiplicativityRow:
    x: LatticePoint
    y: LatticePoint
    h_sum: float
    product: float
    sigma: float
    holds: bool


def supermultiplicativity_check(h: Kernel, points: Sequence[Sequence[int]], sigmas: float = 3.0) -> List[SupermultiplicativityRow]:
    """h(x+y) >= h(x) h(y) − k·σ over pairs of points whose sum is also among the points."""
    pts = [tuple(int(c) for c in p) for p in points]
    present = set(pts)
    rows = []
    for i, x in enumerate(pts):
        for y in pts[i:]:
            z = add(x, y)
            if z not in present:
                continue
            product = h[x] * h[y]
            sigma = math.sqrt(h.error(z) ** 2 + (h[y] * h.error(x)) ** 2 + (h[x] * h.error(y)) ** 2)
            holds = h[z] >= product - sigmas * sigma
            if not holds:
                log.error("h%s = %.4g below h%s h%s = %.4g", z, h[z], x, y, product)
            rows.append(SupermultiplicativityRow(x, y, h[z], product, sigma, holds))
    return rows
