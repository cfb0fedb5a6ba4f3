"""Exact minimal-surface quantities on small instances.

Minima are taken over vertex animals (connected vertex sets). A cluster with vertex set A has
external boundary ∂(Ā), and the fewest open edges that make A connected is a spanning tree, |A| - 1.
So one animal scan yields φ, ψ and υ together.

Animals are generated with Redelmeier's untried-set recursion rooted at the first anchor. Each
connected set containing the root is produced exactly once, so no duplicate filtering is needed
downstream. `canonical_form` is kept for callers that want to check this.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from multiprocessing import Pool
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np
from tqdm import tqdm

from console import get_logger, progress_enabled
from errors import ContractViolation
from events import Direction
from lattice import (
    LatticePoint,
    add,
    edge_between,
    external_boundary_of,
    l1_norm,
    neighbors,
    origin,
    sub,
    unit,
    vertex_boundary,
)

log = get_logger(__name__)

DEFAULT_BUDGET = 5_000_000


# ----------------------------------------------------------------------
# Staircase
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class StaircasePath:
    vertices: Tuple[LatticePoint, ...]

    @property
    def edges(self):
        return tuple(edge_between(a, b) for a, b in zip(self.vertices, self.vertices[1:]))

    @property
    def boundary_size(self) -> int:
        return len(vertex_boundary(self.vertices)) if self.vertices else 0


def staircase_path(x: Sequence[int]) -> StaircasePath:
    """Axis-monotone path from 0 to x: all u1 steps, then all u2 steps, and so on."""
    x = tuple(int(v) for v in x)
    if not any(x):
        return StaircasePath(())
    here = origin(len(x))
    path = [here]
    for axis, steps in enumerate(x):
        step = unit(len(x), axis, 1 if steps > 0 else -1)
        for _ in range(abs(steps)):
            here = add(here, step)
            path.append(here)
    return StaircasePath(tuple(path))


def staircase_bound(x: Sequence[int]) -> int:
    return 2 * (len(x) - 1) * (l1_norm(x) + 1) + 2


def symmetry_class(x: Sequence[int]) -> LatticePoint:
    """Representative of x under coordinate permutations and reflections."""
    return tuple(sorted((abs(int(v)) for v in x), reverse=True))


def symmetry_map(x: Sequence[int]) -> Tuple[LatticePoint, Tuple[int, ...], Tuple[int, ...]]:
    """(representative, perm, signs) with representative[i] == signs[perm[i]] * x[perm[i]]."""
    x = tuple(int(v) for v in x)
    perm = tuple(sorted(range(len(x)), key=lambda j: -abs(x[j])))
    signs = tuple(-1 if v < 0 else 1 for v in x)
    return tuple(abs(x[j]) for j in perm), perm, signs


def from_class(v: Sequence[int], perm: Sequence[int], signs: Sequence[int]) -> LatticePoint:
    """Map a point from the representative's frame back to the frame of x."""
    out = [0] * len(perm)
    for i, j in enumerate(perm):
        out[j] = signs[j] * int(v[i])
    return tuple(out)


def canonical_form(cells) -> Tuple[LatticePoint, ...]:
    return tuple(sorted(tuple(c) for c in cells))


# ----------------------------------------------------------------------
# Enumeration
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Animal:
    cells: Tuple[LatticePoint, ...]
    internal_edges: int

    @property
    def volume(self) -> int:
        return len(self.cells)

    def boundary_size(self) -> int:
        """|∂Ā|. Holes need at least 2d cells around them, so small animals skip the fill."""
        d = len(self.cells[0])
        if len(self.cells) < 2 * d:
            return 2 * d * len(self.cells) - 2 * self.internal_edges
        return len(external_boundary_of(self.cells))


class AnimalEnumeration:
    """Connected vertex sets containing every anchor, of size at most `max_volume`.

    `reach=(direction, level)` additionally requires some cell with <t, cell> >= level.
    `translation_classes=True` keeps only cells lexicographically >= the root, which makes the root
    the minimum cell and yields one animal per translation class.
    """

    def __init__(
        self,
        anchors: Sequence[Sequence[int]],
        max_volume: int,
        budget: Optional[int] = DEFAULT_BUDGET,
        reach: Optional[Tuple[Direction, float]] = None,
        translation_classes: bool = False,
    ):
        if not anchors:
            raise ContractViolation("at least one anchor is required")
        self.anchors: Tuple[LatticePoint, ...] = tuple(tuple(int(v) for v in a) for a in anchors)
        self.root = self.anchors[0]
        self.targets = tuple(a for a in self.anchors[1:] if a != self.root)
        self.max_volume = int(max_volume)
        self.budget = budget
        self.reach = reach
        self.translation_classes = translation_classes
        self.nodes = 0
        self.budget_exceeded = False
        if reach is not None:
            direction, _ = reach
            self._step = max(abs(direction.level(unit(len(self.root), k))) for k in range(len(self.root)))

    # --- helpers -----------------------------------------------------------
    def _allowed(self, cell: LatticePoint) -> bool:
        return not self.translation_classes or cell >= self.root

    def _level(self, cell: LatticePoint):
        return self.reach[0].level(cell)

    def _reached(self, level_max) -> bool:
        if self.reach is None:
            return True
        direction, target = self.reach
        return direction.geq(level_max, target)

    def _hopeless(self, dists: Tuple[int, ...], level_max, remaining: int) -> bool:
        if dists and max(dists) > remaining:
            return True
        if self.reach is not None:
            direction, target = self.reach
            if not direction.geq(level_max + remaining * self._step, target):
                return True
        return False

    # --- recursion ---------------------------------------------------------
    def branches(self) -> List[Tuple[int, LatticePoint]]:
        first = [n for n in neighbors(self.root) if self._allowed(n)]
        return list(enumerate(first))

    def _root_state(self):
        dists = tuple(l1_norm(sub(t, self.root)) for t in self.targets)
        level = self._level(self.root) if self.reach is not None else 0
        return dists, level

    def root_animal(self) -> Optional[Animal]:
        dists, level = self._root_state()
        if not any(dists) and self._reached(level) and self.max_volume >= 1:
            return Animal((self.root,), 0)
        return None

    def walk_branch(self, index: int) -> Iterator[Animal]:
        """Animals whose second cell (in Redelmeier order) is the index-th allowed neighbour of the root."""
        if self.max_volume < 2:
            return
        first = [n for n in neighbors(self.root) if self._allowed(n)]
        seen: Set[LatticePoint] = {self.root, *neighbors(self.root)}
        dists, level = self._root_state()
        cells = [self.root]
        cellset = {self.root}
        untried = first[index:]
        # Siblings before `index` count as tried and rejected; they stay in `seen`.
        yield from self._grow(cells, cellset, untried, seen, 0, dists, level, only_first=True)

    def __iter__(self) -> Iterator[Animal]:
        root = self.root_animal()
        if root is not None:
            yield root
        for index, _ in self.branches():
            if self.budget_exceeded:
                return
            yield from self.walk_branch(index)

    def _grow(self, cells, cellset, untried, seen, edges, dists, level_max, only_first=False):
        for i, w in enumerate(untried):
            if self.budget_exceeded:
                return
            self.nodes += 1
            if self.budget is not None and self.nodes > self.budget:
                self.budget_exceeded = True
                log.warning("animal enumeration stopped after %d nodes (budget)", self.budget)
                return
            new_edges = edges + sum(1 for n in neighbors(w) if n in cellset)
            new_dists = tuple(min(d, l1_norm(sub(t, w))) for d, t in zip(dists, self.targets))
            new_level = level_max
            if self.reach is not None:
                lw = self._level(w)
                new_level = lw if lw > level_max else level_max
            cells.append(w)
            cellset.add(w)
            if not any(new_dists) and self._reached(new_level):
                yield Animal(tuple(cells), new_edges)
            remaining = self.max_volume - len(cells)
            if remaining > 0 and not self._hopeless(new_dists, new_level, remaining):
                fresh = [n for n in neighbors(w) if n not in seen and self._allowed(n)]
                seen.update(fresh)
                yield from self._grow(cells, cellset, list(untried[i + 1:]) + fresh, seen, new_edges, new_dists, new_level)
                seen.difference_update(fresh)
            cells.pop()
            cellset.discard(w)
            if only_first:
                return


# ----------------------------------------------------------------------
# Scans
# ----------------------------------------------------------------------
@dataclass
class SurfaceScan:
    """Reduction of an animal stream: minima per volume layer and per boundary size."""

    min_boundary_by_volume: Dict[int, int] = field(default_factory=dict)
    min_volume_by_boundary: Dict[int, int] = field(default_factory=dict)
    minimizer: Optional[Tuple[LatticePoint, ...]] = None
    nodes: int = 0
    budget_exceeded: bool = False

    def add(self, animal: Animal) -> None:
        n = animal.volume
        b = animal.boundary_size()
        if self.minimizer is None or (b, n) < (self.phi, len(self.minimizer)):
            self.minimizer = animal.cells
        if b < self.min_boundary_by_volume.get(n, math.inf):
            self.min_boundary_by_volume[n] = b
        if n < self.min_volume_by_boundary.get(b, math.inf):
            self.min_volume_by_boundary[b] = n

    def merge(self, other: "SurfaceScan") -> "SurfaceScan":
        if other.minimizer is not None:
            mine = (self.phi, len(self.minimizer)) if self.minimizer else (math.inf, math.inf)
            if (other.phi, len(other.minimizer)) < mine:
                self.minimizer = other.minimizer
        for n, b in other.min_boundary_by_volume.items():
            self.min_boundary_by_volume[n] = min(b, self.min_boundary_by_volume.get(n, b))
        for b, n in other.min_volume_by_boundary.items():
            self.min_volume_by_boundary[b] = min(n, self.min_volume_by_boundary.get(b, n))
        self.nodes += other.nodes
        self.budget_exceeded = self.budget_exceeded or other.budget_exceeded
        return self

    @property
    def phi(self) -> Optional[int]:
        if not self.min_boundary_by_volume:
            return None
        return min(self.min_boundary_by_volume.values())

    def running_minimum(self, volume: int) -> Optional[int]:
        values = [b for n, b in self.min_boundary_by_volume.items() if n <= volume]
        return min(values) if values else None


def _scan_branch(args) -> SurfaceScan:
    anchors, max_volume, budget, reach, index = args
    enum = AnimalEnumeration(anchors, max_volume, budget=budget, reach=reach)
    scan = SurfaceScan()
    for animal in enum.walk_branch(index):
        scan.add(animal)
    scan.nodes = enum.nodes
    scan.budget_exceeded = enum.budget_exceeded
    return scan


def scan_animals(
    anchors: Sequence[Sequence[int]],
    max_volume: int,
    budget: Optional[int] = DEFAULT_BUDGET,
    reach: Optional[Tuple[Direction, float]] = None,
    workers: int = 1,
    quiet: bool = True,
) -> SurfaceScan:
    """Scan every animal through the anchors; first-layer branches run in parallel when workers > 1."""
    enum = AnimalEnumeration(anchors, max_volume, budget=budget, reach=reach)
    scan = SurfaceScan()
    root = enum.root_animal()
    if root is not None:
        scan.add(root)
    branches = enum.branches()
    if workers > 1 and len(branches) > 1:
        share = None if budget is None else max(1, budget // len(branches))
        jobs = [(enum.anchors, max_volume, share, reach, i) for i, _ in branches]
        with Pool(processes=min(workers, len(jobs))) as pool:
            for part in pool.map(_scan_branch, jobs):
                scan.merge(part)
        return scan
    for index, _ in tqdm(branches, desc="animals", disable=not progress_enabled(quiet), leave=False):
        for animal in enum.walk_branch(index):
            scan.add(animal)
        if enum.budget_exceeded:
            break
    scan.nodes = enum.nodes
    scan.budget_exceeded = enum.budget_exceeded
    return scan


# ----------------------------------------------------------------------
# φ, ψ, υ
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class CombinatoricsResult:
    phi: int
    psi: int
    upsilon: int
    achieved_at_volume: int
    certified: bool
    volumes_scanned: Tuple[int, ...] = ()
    nodes: int = 0
    budget_exceeded: bool = False
    minimizer: Tuple[LatticePoint, ...] = ()

    def to_record(self) -> dict:
        return {
            "phi": self.phi,
            "psi": self.psi,
            "upsilon": self.upsilon,
            "achieved_at_volume": self.achieved_at_volume,
            "certified": self.certified,
            "volumes_scanned": list(self.volumes_scanned),
            "nodes": self.nodes,
            "budget_exceeded": self.budget_exceeded,
            "minimizer": [list(c) for c in self.minimizer],
        }


def _result_from_scan(scan: SurfaceScan, max_volume: int, min_volume: int) -> CombinatoricsResult:
    phi = scan.phi
    if phi is None:
        # Nothing reached the anchors within the volume cap.
        return CombinatoricsResult(
            phi=-1, psi=-1, upsilon=-1, achieved_at_volume=-1, certified=False,
            volumes_scanned=(), nodes=scan.nodes, budget_exceeded=scan.budget_exceeded,
        )
    volume = scan.min_volume_by_boundary[phi]
    last = scan.running_minimum(max_volume)
    before = scan.running_minimum(max_volume - 1)
    certified = (
        not scan.budget_exceeded
        and max_volume >= min_volume
        and before is not None
        and before == last
    )
    return CombinatoricsResult(
        phi=phi,
        psi=volume - 1,
        upsilon=volume,
        achieved_at_volume=volume,
        certified=certified,
        volumes_scanned=tuple(sorted(scan.min_boundary_by_volume)),
        nodes=scan.nodes,
        budget_exceeded=scan.budget_exceeded,
        minimizer=tuple(sorted(scan.minimizer or ())),
    )


@lru_cache(maxsize=None)
def _phi_class(x: LatticePoint, max_volume: int, budget: Optional[int], workers: int) -> CombinatoricsResult:
    scan = scan_animals([origin(len(x)), x], max_volume, budget=budget, workers=workers)
    result = _result_from_scan(scan, max_volume, l1_norm(x) + 1)
    if not result.certified:
        log.warning("phi%s over volume <= %d is not certified", x, max_volume)
    return result


def phi_exact(
    x: Sequence[int],
    max_volume: int,
    budget: Optional[int] = DEFAULT_BUDGET,
    workers: int = 1,
) -> CombinatoricsResult:
    """Minimal external boundary over finite clusters containing 0 and x."""
    x = tuple(int(v) for v in x)
    if not any(x):
        # φ(0) = 0 by convention; the single-vertex cluster is the witness
        return CombinatoricsResult(0, 0, 1, 1, True, (1,), 0, False, (x,))
    rep, perm, signs = symmetry_map(x)
    result = _phi_class(rep, int(max_volume), budget, int(workers))
    if rep == x or not result.minimizer:
        return result
    cells = tuple(sorted(from_class(c, perm, signs) for c in result.minimizer))
    return replace(result, minimizer=cells)


def psi_exact(x: Sequence[int], max_volume: int, budget: Optional[int] = DEFAULT_BUDGET) -> int:
    return phi_exact(x, max_volume, budget).psi


def upsilon_exact(x: Sequence[int], max_volume: int, budget: Optional[int] = DEFAULT_BUDGET) -> int:
    return phi_exact(x, max_volume, budget).upsilon


@dataclass(frozen=True)
class PsiTable:
    """ψ_k(x) per boundary size k reached by the scan, and Ψ_k = min over l >= k of ψ_l."""

    psi: Dict[int, int]
    psi_upper: Dict[int, int]
    complete: bool


def psi_table(x: Sequence[int], max_volume: int, budget: Optional[int] = DEFAULT_BUDGET) -> PsiTable:
    x = tuple(int(v) for v in x)
    scan = scan_animals([origin(len(x)), x], max_volume, budget=budget)
    psi = {k: n - 1 for k, n in sorted(scan.min_volume_by_boundary.items())}
    upper: Dict[int, int] = {}
    best = math.inf
    for k in sorted(psi, reverse=True):
        best = min(best, psi[k])
        upper[k] = int(best)
    return PsiTable(psi=psi, psi_upper=dict(sorted(upper.items())), complete=not scan.budget_exceeded)


def phi_t_exact(
    x: Sequence[int],
    t: Direction,
    max_volume: int,
    budget: Optional[int] = DEFAULT_BUDGET,
) -> CombinatoricsResult:
    """Minimal external boundary over finite clusters of 0 that reach the half-space <t,y> >= <t,x>."""
    x = tuple(int(v) for v in x)
    target = t.level(x)
    if not t.gt(target, 0):
        raise ContractViolation(f"<t,x> must be positive, got {target}")
    scan = scan_animals([origin(len(x))], max_volume, budget=budget, reach=(t, target))
    step = t.level(t.u)
    steps_needed = int(math.ceil(float(target) / float(step) - 1e-12))
    return _result_from_scan(scan, max_volume, steps_needed + 1)


# ----------------------------------------------------------------------
# Tables and checks
# ----------------------------------------------------------------------
def check_invariants(x: Sequence[int], result: CombinatoricsResult) -> List[str]:
    """Inequalities every enumerated value must satisfy; returns violated ones as text."""
    x = tuple(int(v) for v in x)
    d = len(x)
    if not any(x) or result.phi < 0:
        return []
    defects = []
    if result.phi > staircase_bound(x):
        defects.append(f"phi{x}={result.phi} exceeds staircase bound {staircase_bound(x)}")
    if result.psi < l1_norm(x):
        defects.append(f"psi{x}={result.psi} below |x|={l1_norm(x)}")
    if result.phi > 2 * (d - 1) * (result.psi + 1) + 2:
        defects.append(f"phi{x}={result.phi} exceeds 2(d-1)(psi+1)+2")
    if result.phi > (2 * d + 1) * result.psi:
        defects.append(f"phi{x}={result.phi} exceeds (2d+1)psi")
    if result.phi < 2 * d:
        defects.append(f"phi{x}={result.phi} below 2d")
    return defects


@dataclass(frozen=True)
class SubadditivityRow:
    x: LatticePoint
    y: LatticePoint
    phi_x: int
    phi_y: int
    phi_x_minus_y: int
    holds: bool
    certified: bool


@dataclass
class SubadditivityReport:
    rows: List[SubadditivityRow]

    @property
    def violations(self) -> List[SubadditivityRow]:
        return [r for r in self.rows if not r.holds]

    @property
    def defects(self) -> List[str]:
        return [
            f"phi{r.x}={r.phi_x} > phi{r.y}+phi{r.x}-{r.y} = {r.phi_y}+{r.phi_x_minus_y}"
            for r in self.violations
        ]


def auto_volume(x: Sequence[int], extra: int = 2, cap: int = 10) -> int:
    return min(l1_norm(x) + 1 + extra, cap)


def subadditivity_table(
    points: Sequence[Sequence[int]],
    max_volume: Optional[int] = None,
    budget: Optional[int] = DEFAULT_BUDGET,
) -> SubadditivityReport:
    """Check φ(x) <= φ(y) + φ(x-y) over all ordered pairs of `points`."""
    def phi(z):
        volume = max_volume if max_volume is not None else auto_volume(z)
        return phi_exact(z, volume, budget)

    rows = []
    for x in points:
        for y in points:
            x, y = tuple(x), tuple(y)
            rx, ry, rxy = phi(x), phi(y), phi(sub(x, y))
            ok = rx.phi <= ry.phi + rxy.phi if min(rx.phi, ry.phi, rxy.phi) >= 0 else True
            rows.append(SubadditivityRow(
                x, y, rx.phi, ry.phi, rxy.phi, ok, rx.certified and ry.certified and rxy.certified,
            ))
    report = SubadditivityReport(rows)
    for line in report.defects:
        log.error("subadditivity violated: %s", line)
    return report


@dataclass(frozen=True)
class PhiBarSeries:
    n: Tuple[int, ...]
    values: Tuple[float, ...]
    certified: Tuple[bool, ...]
    truncated: bool
    monotone_fraction: float
    cauchy_gap: Optional[float]


def phi_bar_estimate(
    x_hat: Sequence[float] | Direction,
    n_list: Sequence[int],
    max_volume: int,
    budget: Optional[int] = DEFAULT_BUDGET,
) -> PhiBarSeries:
    """φ(⌊n x̂⌋)/n for increasing n, stopping at the first n the budget cannot cover."""
    vec = np.asarray(x_hat.t if isinstance(x_hat, Direction) else x_hat, dtype=float)
    ns, values, certs = [], [], []
    truncated = False
    for n in sorted(int(v) for v in n_list):
        y = tuple(int(v) for v in np.floor(n * vec + 1e-12))
        if not any(y):
            ns.append(n)
            values.append(0.0)
            certs.append(True)
            continue
        if l1_norm(y) + 1 > max_volume:
            truncated = True
            break
        result = phi_exact(y, min(max_volume, auto_volume(y, cap=max_volume)), budget)
        if result.budget_exceeded or result.phi < 0:
            truncated = True
            break
        ns.append(n)
        values.append(result.phi / n)
        certs.append(result.certified)
    if truncated:
        log.warning("phi-bar sequence truncated after n=%s", ns[-1] if ns else None)
    diffs = np.diff(values)
    monotone = float(np.mean(diffs <= 1e-12)) if len(diffs) else 1.0
    gap = float(abs(values[-1] - values[-2])) if len(values) >= 2 else None
    return PhiBarSeries(tuple(ns), tuple(values), tuple(certs), truncated, monotone, gap)


@dataclass(frozen=True)
class SurfaceCountTable:
    """Translation classes of hole-free animals per boundary size.

    Entries with k < `complete_below` count every such animal: by the edge-isoperimetric inequality
    an animal of more than `max_volume` cells has boundary at least 2d (max_volume+1)^(1-1/d).
    """

    dim: int
    max_volume: int
    counts: Dict[int, int]
    complete_below: float


def surface_count_table(dim: int, max_volume: int, budget: Optional[int] = DEFAULT_BUDGET) -> SurfaceCountTable:
    enum = AnimalEnumeration([origin(dim)], max_volume, budget=budget, translation_classes=True)
    counts: Dict[int, int] = {}
    for animal in enum:
        boundary = vertex_boundary(animal.cells)
        if len(external_boundary_of(animal.cells)) != len(boundary):
            continue
        counts[len(boundary)] = counts.get(len(boundary), 0) + 1
    complete_below = 2 * dim * (max_volume + 1) ** (1 - 1 / dim)
    if enum.budget_exceeded:
        complete_below = 0.0
    return SurfaceCountTable(dim, max_volume, dict(sorted(counts.items())), complete_below)
