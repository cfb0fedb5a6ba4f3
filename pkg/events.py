"""Directed connectivity events: break points, t-bonds, the seven renewal events and slab crossings.

All finiteness conditions use the box-shell proxy: a cluster (or the part of it inside a strip or
half-space) is finite when none of its vertices lies on the inner shell of the box.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np

from errors import ContractViolation, DomainError
from lattice import (
    Box,
    BondConfig,
    ClusterData,
    Edge,
    LatticePoint,
    add,
    cluster_from_indices,
    cluster_indices,
    edge_between,
    edge_endpoints,
    fill,
    neighbors,
    origin,
    sub,
    surface_components,
)

LEVEL_TOLERANCE = 1e-9
EVENT_KINDS = ("h", "f", "g", "h_bar", "f_bar", "h_tilde", "f_tilde")


# ----------------------------------------------------------------------
# Directions
# ----------------------------------------------------------------------
def _integer_form(t: Sequence[float], max_denominator: int = 256) -> Optional[Tuple[int, ...]]:
    """Smallest integer vector proportional to t, if t is a rational direction."""
    top = max(abs(v) for v in t)
    fracs = []
    for v in t:
        ratio = v / top
        frac = Fraction(ratio).limit_denominator(max_denominator)
        if abs(float(frac) - ratio) > 1e-12:
            return None
        fracs.append(frac)
    lcm = 1
    for fr in fracs:
        lcm = lcm * fr.denominator // math.gcd(lcm, fr.denominator)
    ints = [int(fr * lcm) for fr in fracs]
    g = 0
    for v in ints:
        g = math.gcd(g, abs(v))
    return tuple(v // g for v in ints)


@dataclass(frozen=True)
class Direction:
    """Unit vector t with its distinguished axis u (first axis maximizing <t, u_i>).

    Hyperplane levels <t, x> are computed exactly on the integer vector proportional to t when one
    exists, otherwise in floating point with LEVEL_TOLERANCE. Levels are only ever compared with
    each other, so the scale of the integer form does not matter.
    """

    t: Tuple[float, ...]

    def __post_init__(self):
        t = tuple(float(v) for v in self.t)
        if len(t) < 2:
            raise ContractViolation("direction needs dimension >= 2")
        if abs(math.sqrt(sum(v * v for v in t)) - 1.0) > 1e-12:
            raise ContractViolation(f"direction {t} is not a unit vector")
        object.__setattr__(self, "t", t)

    @classmethod
    def of(cls, vector: Sequence[float]) -> "Direction":
        v = np.asarray(vector, dtype=float)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            raise ContractViolation("zero vector has no direction")
        return cls(tuple(float(c) for c in v / norm))

    @classmethod
    def axis(cls, dim: int, k: int = 0) -> "Direction":
        return cls(tuple(1.0 if i == k else 0.0 for i in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.t)

    @cached_property
    def integer_form(self) -> Optional[Tuple[int, ...]]:
        return _integer_form(self.t)

    @property
    def exact(self) -> bool:
        return self.integer_form is not None

    @property
    def tol(self) -> float:
        return 0.0 if self.exact else LEVEL_TOLERANCE

    @cached_property
    def u_axis(self) -> int:
        weights = self.integer_form if self.exact else self.t
        best = max(weights)
        return next(i for i, w in enumerate(weights) if w == best)

    @cached_property
    def u(self) -> LatticePoint:
        return tuple(1 if i == self.u_axis else 0 for i in range(self.dim))

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.integer_form if self.exact else self.t)

    def level(self, x: Sequence[int]):
        if self.exact:
            return int(sum(k * int(c) for k, c in zip(self.integer_form, x)))
        return float(sum(k * float(c) for k, c in zip(self.t, x)))

    def levels(self, coords: np.ndarray) -> np.ndarray:
        return coords @ self.vector

    def dot(self, x: Sequence[float]) -> float:
        return float(np.dot(self.t, x))

    def geq(self, a, b) -> bool:
        return a >= b - self.tol

    def leq(self, a, b) -> bool:
        return a <= b + self.tol

    def gt(self, a, b) -> bool:
        return a > b + self.tol

    def eq(self, a, b) -> bool:
        return abs(a - b) <= self.tol

    def to_record(self) -> list:
        return list(self.t)


# ----------------------------------------------------------------------
# Break points and t-bonds
# ----------------------------------------------------------------------
def _break_points(vertices, t: Direction, a: LatticePoint, b: LatticePoint) -> List[LatticePoint]:
    vs = set(vertices)
    if not vs:
        return []
    u = t.u
    step = t.level(u)
    by_level = sorted((t.level(v), v) for v in vs)
    levels = [lv for lv, _ in by_level]
    lo, hi = t.level(a) + step, t.level(b) - step
    out = []
    for lv, v in by_level:
        if not (t.geq(lv, lo) and t.leq(lv, hi)):
            continue
        left = bisect.bisect_left(levels, lv - step - t.tol)
        right = bisect.bisect_right(levels, lv + step + t.tol)
        if right - left == 3 and sub(v, u) in vs and add(v, u) in vs:
            out.append(v)
    return out


def detect_break_points(
    cluster: ClusterData,
    t: Direction,
    x: Sequence[int],
    start: Optional[Sequence[int]] = None,
) -> List[LatticePoint]:
    """Break points of the strip cluster of `start` (default 0) and x, sorted by <t, .>."""
    x = tuple(x)
    start = tuple(start) if start is not None else origin(len(x))
    return _break_points(cluster.vertices, t, start, x)


def detect_t_bonds(break_points: Sequence[LatticePoint], t: Direction) -> Tuple[List[Edge], List[LatticePoint]]:
    """Edges {b, b+u} with both ends break points, and B_e, the set of their left ends."""
    points = set(map(tuple, break_points))
    bonds, left = [], []
    for b in break_points:
        b = tuple(b)
        if add(b, t.u) in points:
            bonds.append(edge_between(b, add(b, t.u)))
            left.append(b)
    return bonds, left


# ----------------------------------------------------------------------
# Event records
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class EventRecord:
    x: LatticePoint
    finite_connect: bool
    h: bool
    f: bool
    g: bool
    h_bar: bool
    f_bar: bool
    h_tilde: bool
    f_tilde: bool
    break_points: Tuple[LatticePoint, ...] = ()
    t_bonds: Tuple[Edge, ...] = ()
    surface_size: Optional[int] = None
    cluster_edges: int = -1
    finite_in_strip: bool = False

    def flag(self, kind: str) -> bool:
        return bool(getattr(self, kind))

    def implication_failures(self) -> List[str]:
        failures = []
        for strong, weak in (("f", "h"), ("f_bar", "h_bar"), ("f_tilde", "h_tilde"), ("g", "finite_connect")):
            if getattr(self, strong) and not getattr(self, weak):
                failures.append(f"{strong} without {weak} at x={self.x}")
        if self.h and not self.finite_in_strip:
            failures.append(f"h without a finite strip cluster at x={self.x}")
        return failures


def check_margin(box: Box, x: Sequence[int], margin: int = 0) -> None:
    """Raise DomainError unless x is in the box at shell distance >= margin."""
    if not box.contains(x):
        raise DomainError(f"{tuple(x)} outside box {box.lo}..{box.hi}")
    if box.shell_distance(x) < margin:
        raise DomainError(f"{tuple(x)} closer than margin {margin} to the box shell")


class Classifier:
    """Evaluates every directed event on one box for a fixed direction.

    Per-vertex levels are computed once; per configuration the open cluster of the origin is
    computed once and shared by all displacements.
    """

    def __init__(self, box: Box, t: Direction, margin: int = 0):
        if t.dim != box.dim:
            raise ContractViolation(f"direction dimension {t.dim} differs from box dimension {box.dim}")
        self.box = box
        self.t = t
        self.margin = int(margin)
        self.levels = t.levels(box.coords)
        self.step = t.level(t.u)

    # --- geometry ----------------------------------------------------------
    def check_point(self, x: Sequence[int]) -> None:
        check_margin(self.box, x, self.margin)

    def strip_mask(self, lo_level, hi_level) -> np.ndarray:
        tol = self.t.tol
        return (self.levels >= lo_level - tol) & (self.levels <= hi_level + tol)

    def strip_cluster(self, config: BondConfig, a, b) -> Tuple[List[int], bool, bool]:
        """Strip cluster of a between the hyperplanes of a and b: (indices, reaches b, finite)."""
        la, lb = self.t.level(a), self.t.level(b)
        if self.t.gt(la, lb):
            return [], False, True
        ia = self.box.index(a)
        mask = self.strip_mask(la, lb)
        order, _ = cluster_indices(config, ia, allowed=mask)
        reached = self.box.index(b) in set(order)
        finite = not bool(self.box.shell[order].any())
        return order, reached, finite

    def break_points(self, config: BondConfig, a, b) -> List[LatticePoint]:
        order, reached, finite = self.strip_cluster(config, a, b)
        if not reached or not finite:
            return []
        return _break_points((self.box.point(i) for i in order), self.t, a, b)

    # --- events on a pair (a, b) inside one origin-cluster -----------------
    def _slab_points(self, cluster_idx, lo_level, hi_level) -> set:
        lv = self.levels[cluster_idx]
        tol = self.t.tol
        hit = np.asarray(cluster_idx)[(lv >= lo_level - tol) & (lv <= hi_level + tol)]
        return {self.box.point(int(i)) for i in hit}

    def _half_finite(self, cluster_idx, lo_level=None, hi_level=None) -> bool:
        idx = np.asarray(cluster_idx)
        on_shell = self.box.shell[idx]
        lv = self.levels[idx]
        tol = self.t.tol
        keep = np.ones(len(idx), dtype=bool)
        if lo_level is not None:
            keep &= lv >= lo_level - tol
        if hi_level is not None:
            keep &= lv <= hi_level + tol
        return not bool((on_shell & keep).any())

    def h_event(self, config: BondConfig, a, b) -> bool:
        order, reached, finite = self.strip_cluster(config, a, b)
        if not (reached and finite):
            return False
        bp = set(_break_points((self.box.point(i) for i in order), self.t, a, b))
        return add(a, self.t.u) in bp and sub(b, self.t.u) in bp

    def f_event(self, config: BondConfig, a, b) -> bool:
        if not self.h_event(config, a, b):
            return False
        return not self.break_points(config, add(a, self.t.u), sub(b, self.t.u))

    def h_bar_event(self, cluster_idx, cluster_set, a, b) -> bool:
        if a not in cluster_set or b not in cluster_set:
            return False
        u = self.t.u
        lb = self.t.level(b)
        if self._slab_points(cluster_idx, lb - self.step, lb) != {sub(b, u), b}:
            return False
        return self._half_finite(cluster_idx, hi_level=lb)

    def h_tilde_event(self, cluster_idx, cluster_set, a, b) -> bool:
        if a not in cluster_set or b not in cluster_set:
            return False
        u = self.t.u
        la = self.t.level(a)
        if self._slab_points(cluster_idx, la, la + self.step) != {a, add(a, u)}:
            return False
        return self._half_finite(cluster_idx, lo_level=la)

    # --- classification ----------------------------------------------------
    def origin_cluster(self, config: BondConfig) -> Tuple[List[int], set]:
        order, _ = cluster_indices(config, self.box.index(origin(self.box.dim)))
        return order, {self.box.point(i) for i in order}

    def classify(
        self,
        config: BondConfig,
        x: Sequence[int],
        cluster: Optional[Tuple[List[int], set]] = None,
        with_surface: bool = False,
    ) -> EventRecord:
        x = tuple(int(v) for v in x)
        zero = origin(len(x))
        self.check_point(zero)
        self.check_point(x)
        if not self.t.gt(self.t.level(x), 0):
            raise ContractViolation(f"<t,x> must be positive for x={x}")
        order, members = cluster if cluster is not None else self.origin_cluster(config)
        finite_full = not bool(self.box.shell[order].any())
        connected = x in members
        finite_connect = connected and finite_full

        strip_order, strip_reached, strip_finite = self.strip_cluster(config, zero, x)
        if strip_reached and strip_finite:
            bps = _break_points((self.box.point(i) for i in strip_order), self.t, zero, x)
        else:
            bps = []
        bonds, left = detect_t_bonds(bps, self.t)
        bp_set = set(bps)
        u = self.t.u
        h = strip_reached and strip_finite and u in bp_set and sub(x, u) in bp_set
        f = h and not self.break_points(config, u, sub(x, u))
        g = finite_connect and len(left) <= 1
        h_bar = self.h_bar_event(order, members, zero, x)
        h_tilde = self.h_tilde_event(order, members, zero, x)

        surface = None
        n_edges = -1
        if finite_full:
            _, edge_ids = cluster_indices(config, self.box.index(zero))
            n_edges = len(edge_ids)
            if with_surface and connected:
                data = fill(cluster_from_indices(config, order, edge_ids), self.box)
                surface = len(data.external_boundary)
        return EventRecord(
            x=x,
            finite_connect=finite_connect,
            h=h,
            f=f,
            g=g,
            h_bar=h_bar,
            f_bar=h_bar and not bps,
            h_tilde=h_tilde,
            f_tilde=h_tilde and not bps,
            break_points=tuple(bps),
            t_bonds=tuple(bonds),
            surface_size=surface,
            cluster_edges=n_edges,
            finite_in_strip=strip_reached and strip_finite,
        )


@lru_cache(maxsize=64)
def classifier_for(box: Box, t: Direction, margin: int = 0) -> Classifier:
    return Classifier(box, t, margin)


def classify_events(config: BondConfig, x: Sequence[int], t: Direction, margin: int = 0) -> EventRecord:
    return classifier_for(config.box, t, margin).classify(config, x, with_surface=True)


def finite_two_point(config: BondConfig, x: Sequence[int], margin: int = 0) -> bool:
    """0 and x in one open cluster that avoids the box shell."""
    box = config.box
    x = tuple(int(v) for v in x)
    for point in (origin(len(x)), x):
        check_margin(box, point, margin)
    order, _ = cluster_indices(config, box.index(origin(len(x))))
    if bool(box.shell[order].any()):
        return False
    return box.index(x) in set(order)


# ----------------------------------------------------------------------
# Renewal split at the first and last t-bond
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class RenewalSplit:
    z1: LatticePoint
    z2: LatticePoint
    prefix_f_bar: bool
    middle_h: bool
    suffix_f_tilde: bool

    @property
    def consistent(self) -> bool:
        return self.prefix_f_bar and self.middle_h and self.suffix_f_tilde


def renewal_split(config: BondConfig, x: Sequence[int], t: Direction, margin: int = 0) -> Optional[RenewalSplit]:
    """Cut a finite connection at its first and last t-bond.

    z1 is the left end of the first t-bond, z2 the right end of the last one. Returns None when the
    connection is not finite or has fewer than two t-bonds (then it counts towards g).
    """
    clf = classifier_for(config.box, t, margin)
    x = tuple(int(v) for v in x)
    record = clf.classify(config, x)
    _, left = detect_t_bonds(record.break_points, t)
    if not record.finite_connect or len(left) < 2:
        return None
    zero = origin(len(x))
    z1, z2 = left[0], add(left[-1], t.u)
    order, members = clf.origin_cluster(config)
    prefix = clf.h_bar_event(order, members, zero, z1) and not clf.break_points(config, zero, z1)
    middle = clf.h_event(config, z1, z2)
    suffix = clf.h_tilde_event(order, members, z2, x) and not clf.break_points(config, z2, x)
    return RenewalSplit(z1, z2, prefix, middle, suffix)


# ----------------------------------------------------------------------
# Slabs
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class SlabInfo:
    index: int
    lo_level: float
    hi_level: float
    n_surface_components: int
    n_crossings: int

    @property
    def good(self) -> bool:
        return self.n_surface_components <= 1


@dataclass(frozen=True)
class SlabReport:
    slabs: Tuple[SlabInfo, ...]

    @property
    def eta(self) -> float:
        if not self.slabs:
            return 0.0
        return sum(1 for s in self.slabs if s.n_crossings >= 2) / len(self.slabs)


def _hyperplane_levels(t: Direction, x: LatticePoint, width: int) -> List:
    norm = math.sqrt(sum(c * c for c in x))
    count = int(math.floor(norm / width)) - 1
    if count < 0:
        return [t.level(origin(len(x))), t.level(x)]
    x_hat = np.asarray(x, dtype=float) / norm
    levels = []
    for i in range(count + 1):
        p = tuple(int(v) for v in np.floor(i * width * x_hat + 1e-12))
        levels.append(t.level(p))
    levels.append(t.level(x))
    return levels


def _pieces(vertices: set) -> List[set]:
    """Lattice-connected components of a vertex set."""
    left = set(vertices)
    pieces = []
    while left:
        start = left.pop()
        piece = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for w in neighbors(v):
                if w in left:
                    left.remove(w)
                    piece.add(w)
                    stack.append(w)
        pieces.append(piece)
    return pieces


def slab_crossings(cluster: ClusterData, t: Direction, width: int, x: Sequence[int]) -> SlabReport:
    """Good/bad classification and crossing counts of the slabs between the hyperplanes of 0 and x.

    A slab is bad when the part of the plaquette surface inside it is disconnected. A crossing is a
    lattice-connected piece of the filled cluster inside the slab that comes within one lattice step
    of both bounding hyperplanes.
    """
    if width < 1:
        raise ContractViolation("slab width must be >= 1")
    if cluster.external_boundary is None:
        raise ContractViolation("slab_crossings needs a filled cluster")
    x = tuple(int(v) for v in x)
    step = t.level(t.u)
    hyper = _hyperplane_levels(t, x, width)
    filled = cluster.filled_vertices
    slabs = []

    def doubled_mid(e: Edge):
        a, b = edge_endpoints(e)
        return t.level(a) + t.level(b)

    for i, (lo, hi) in enumerate(zip(hyper, hyper[1:])):
        inside = {e for e in cluster.external_boundary if t.leq(2 * lo, doubled_mid(e)) and t.leq(doubled_mid(e), 2 * hi)}
        comps = surface_components(inside)
        slab_vertices = {v for v in filled if t.leq(lo, t.level(v)) and t.leq(t.level(v), hi)}
        crossings = 0
        for piece in _pieces(slab_vertices):
            levels = [t.level(v) for v in piece]
            if t.gt(lo + step, min(levels)) and t.gt(max(levels), hi - step):
                crossings += 1
        slabs.append(SlabInfo(i, lo, hi, len(comps), crossings))
    return SlabReport(tuple(slabs))


# ----------------------------------------------------------------------
# Event predicates shared by the sampler and the exact enumerator
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Event:
    """Picklable predicate over BondConfig.

    kinds: tautology, edge-open, isolated-edge, connect, finite-two-point and the seven directed
    events h, f, g, h_bar, f_bar, h_tilde, f_tilde (these need `t`).
    """

    kind: str
    x: Optional[LatticePoint] = None
    edge: Optional[Edge] = None
    t: Optional[Tuple[float, ...]] = None
    margin: int = 0

    def __post_init__(self):
        if self.x is not None:
            object.__setattr__(self, "x", tuple(int(c) for c in self.x))
        if self.edge is not None:
            object.__setattr__(self, "edge", (tuple(int(c) for c in self.edge[0]), int(self.edge[1])))
        if self.t is not None:
            object.__setattr__(self, "t", tuple(float(c) for c in self.t))
        known = ("tautology", "edge-open", "isolated-edge", "connect", "finite-two-point") + EVENT_KINDS
        if self.kind not in known:
            raise ContractViolation(f"unknown event kind {self.kind!r}")
        if self.kind in ("edge-open", "isolated-edge") and self.edge is None:
            raise ContractViolation(f"event {self.kind} needs an edge")
        if self.kind in ("connect", "finite-two-point") + EVENT_KINDS and self.x is None:
            raise ContractViolation(f"event {self.kind} needs a displacement x")
        if self.kind in EVENT_KINDS and self.t is None:
            raise ContractViolation(f"event {self.kind} needs a direction t")

    def describe(self) -> str:
        parts = [self.kind]
        if self.x is not None:
            parts.append("x=" + ",".join(map(str, self.x)))
        if self.edge is not None:
            parts.append(f"edge={self.edge[0]}+u{self.edge[1] + 1}")
        if self.t is not None:
            parts.append("t=" + ",".join(f"{v:g}" for v in self.t))
        return " ".join(parts)

    def __call__(self, config: BondConfig) -> bool:
        box = config.box
        if self.kind == "tautology":
            return True
        if self.kind == "edge-open":
            return config.is_open(self.edge)
        if self.kind == "isolated-edge":
            if not config.is_open(self.edge):
                return False
            a = self.edge[0]
            b = add(a, tuple(1 if k == self.edge[1] else 0 for k in range(box.dim)))
            own = box.edge_index(self.edge)
            for v in (a, b):
                for _, e in box.adjacency[box.index(v)]:
                    if e != own and config.open_list[e]:
                        return False
            return True
        if self.kind == "connect":
            order, _ = cluster_indices(config, box.index(origin(box.dim)))
            return box.index(self.x) in set(order)
        if self.kind == "finite-two-point":
            return finite_two_point(config, self.x, self.margin)
        record = classifier_for(box, Direction(self.t), self.margin).classify(config, self.x)
        return record.flag(self.kind)
