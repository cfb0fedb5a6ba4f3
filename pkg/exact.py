"""Exhaustive enumeration of all 2^E bond configurations of a tiny box.

Probabilities are integer-coefficient polynomials in p, Σ_k c_k p^k (1−p)^{E−k}, evaluated exactly
with Fractions. Events are the same `Event` predicates the sampler uses.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from combinatorics import auto_volume, phi_exact
from console import get_logger
from errors import ContractViolation
from events import Event
from lattice import Box, BondConfig
from sampler import EstimatorResult, estimate_event, event_table

log = get_logger(__name__)


def _popcounts(n_edges: int) -> np.ndarray:
    codes = np.arange(1 << n_edges, dtype=np.int64)
    counts = np.zeros_like(codes)
    for bit in range(n_edges):
        counts += (codes >> bit) & 1
    return counts


def _as_fraction(p) -> Fraction:
    if isinstance(p, Fraction):
        return p
    if isinstance(p, str):
        return Fraction(p)
    # 0.3 means 3/10, not the nearest double
    return Fraction(str(float(p)))


@dataclass(frozen=True)
class ExactResult:
    """counts[k] = number of satisfying configurations with exactly k open edges."""

    event: str
    n_edges: int
    counts: Tuple[int, ...]

    def probability(self, p) -> Fraction:
        p = _as_fraction(p)
        q = 1 - p
        return sum((c * p**k * q ** (self.n_edges - k) for k, c in enumerate(self.counts) if c), Fraction(0))

    def value(self, p) -> float:
        return float(self.probability(p))

    def power_coefficients(self) -> List[int]:
        """a_j with P(p) = Σ_j a_j p^j."""
        E = self.n_edges
        coeffs = [0] * (E + 1)
        for k, c in enumerate(self.counts):
            if not c:
                continue
            # p^k (1−p)^{E−k} = Σ_i binom(E−k, i) (−1)^i p^{k+i}
            binom = 1
            for i in range(E - k + 1):
                coeffs[k + i] += c * binom * (-1) ** i
                binom = binom * (E - k - i) // (i + 1)
        return coeffs

    def derivative(self, p) -> Fraction:
        p = _as_fraction(p)
        return sum((j * a * p ** (j - 1) for j, a in enumerate(self.power_coefficients()) if j and a), Fraction(0))

    def to_record(self) -> dict:
        return {
            "event": self.event,
            "n_edges": self.n_edges,
            "counts": list(self.counts),
            "power_coefficients": self.power_coefficients(),
        }


def enumerate_event(
    box: Box,
    event: Event,
    threads: int = 1,
    quiet: bool = True,
    table: Optional[np.ndarray] = None,
) -> ExactResult:
    """Satisfying configurations by number of open edges; refuses boxes with more than 24 edges."""
    if table is None:
        table = event_table(box, event, threads=threads, quiet=quiet)
    counts = np.bincount(_popcounts(box.n_edges)[table], minlength=box.n_edges + 1)
    return ExactResult(event.describe(), box.n_edges, tuple(int(c) for c in counts))


@dataclass(frozen=True)
class Verification:
    exact: float
    estimate: EstimatorResult
    sigmas: float
    passed: bool

    def to_record(self) -> dict:
        return {"exact": self.exact, "estimate": self.estimate, "sigmas": self.sigmas, "passed": self.passed}


def verify_estimator(
    box: Box,
    event: Event,
    p: float,
    n_samples: int,
    seed: int,
    tolerance_sigma: float = 4.0,
    threads: int = 1,
) -> Verification:
    """Monte Carlo on the same predicate against the exact value: |MC − exact| <= k·σ."""
    if n_samples < 1:
        raise ContractViolation(f"n_samples must be positive, got {n_samples}")
    exact =enumerate_event(box, event, threads=threads).value(p)
    estimate = estimate_event(box, event, p, n_samples, seed, threads=threads)
    gap = abs(estimate.value - exact)
    sigma = estimate.std_error
    passed = gap <= tolerance_sigma * sigma + 1e-15
    distance = gap / sigma if sigma > 0 else (0.0 if gap == 0 else float("inf"))
    if not passed:
        log.error("%s at p=%g: MC %.6g vs exact %.6g (%.1f sigma)", event.describe(), p, estimate.value, exact, distance)
    return Verification(exact, estimate, distance, passed)


def is_monotone(table: np.ndarray) -> bool:
    """True when opening any single edge never turns the event off."""
    n_edges = int(table.size).bit_length() - 1
    codes = np.arange(table.size, dtype=np.int64)
    for bit in range(n_edges):
        closed = codes[((codes >> bit) & 1) == 0]
        if np.any(table[closed] & ~table[closed | (1 << bit)]):
            return False
    return True


def derivative_sign_check(result: ExactResult, grid: Sequence = tuple(Fraction(k, 20) for k in range(1, 20))) -> bool:
    """P'(p) >= 0 on a grid of (0, 1)."""
    return all(result.derivative(p) >= 0 for p in grid)


@dataclass(frozen=True)
class MonotonicityWitness:
    """Configurations with smaller ⊂ larger (one edge apart) and opposite event values."""

    smaller: BondConfig
    larger: BondConfig
    smaller_has_event: bool

    def to_record(self) -> dict:
        return {
            "smaller_open": [[list(b), a] for b, a in self.smaller.open_edges()],
            "larger_open": [[list(b), a] for b, a in self.larger.open_edges()],
            "smaller_has_event": self.smaller_has_event,
        }


def non_monotone_witness(
    box: Box, event: Event, threads: int = 1, table: Optional[np.ndarray] = None
) -> Tuple[Optional[MonotonicityWitness], Optional[MonotonicityWitness]]:
    """One pair where opening an edge switches the event on, one where it switches it off."""
    if table is None:
        table = event_table(box, event, threads=threads)
    codes = np.arange(table.size, dtype=np.int64)
    up = down = None
    for bit in range(box.n_edges):
        closed = codes[((codes >> bit) & 1) == 0]
        opened = closed | (1 << bit)
        if up is None:
            hit = np.nonzero(~table[closed] & table[opened])[0]
            if len(hit):
                c = int(closed[hit[0]])
                up = MonotonicityWitness(BondConfig.from_code(box, c), BondConfig.from_code(box, c | (1 << bit)), False)
        if down is None:
            hit = np.nonzero(table[closed] & ~table[opened])[0]
            if len(hit):
                c = int(closed[hit[0]])
                down = MonotonicityWitness(BondConfig.from_code(box, c), BondConfig.from_code(box, c | (1 << bit)), True)
        if up is not None and down is not None:
            break
    return up, down


@dataclass(frozen=True)
class LowerBoundRow:
    p: str
    exact: float
    bound: float
    holds: bool


def lower_bound_check(
    box: Box,
    x: Sequence[int],
    p_list: Sequence = tuple(Fraction(k, 10) for k in range(1, 10)),
    margin: int = 1,
    threads: int = 1,
) -> List[LowerBoundRow]:
    """Exact P(0 <-> x, finite in box) against p^ψ(x) (1−p)^φ(x), compared as Fractions."""
    x = tuple(int(c) for c in x)
    if not any(x):
        raise ContractViolation("the lower bound needs x != 0")
    oracle = phi_exact(x, auto_volume(x))
    if not oracle.certified:
        log.warning("phi%s is not certified; the bound uses phi=%d psi=%d", x, oracle.phi, oracle.psi)
    result = enumerate_event(box, Event("finite-two-point", x=x, margin=margin), threads=threads)
    rows = []
    for p in p_list:
        pf = _as_fraction(p)
        exact = result.probability(pf)
        bound = pf**oracle.psi * (1 - pf) ** oracle.phi
        rows.append(LowerBoundRow(str(pf), float(exact), float(bound), exact >= bound))
    return rows
