"""Geometry and graph primitives of Z^d on finite boxes.

Points are integer tuples. An edge is stored as ``(base, axis)`` and stands for the lattice edge
``{base, base + u_axis}``; ordering edges by that pair is the canonical order (lexicographic on the
smaller endpoint, then the axis). A plaquette is identified with the edge it is dual to.
"""
from __future__ import annotations

import itertools
import struct
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np
from scipy import ndimage

from errors import DomainError, IndeterminateFillError

LatticePoint = Tuple[int, ...]
Edge = Tuple[LatticePoint, int]

CONFIG_MAGIC = b"PCZ1"


# ----------------------------------------------------------------------
# Points and edges
# ----------------------------------------------------------------------
def origin(dim: int) -> LatticePoint:
    return (0,) * dim


def unit(dim: int, axis: int, sign: int = 1) -> LatticePoint:
    return tuple(sign if i == axis else 0 for i in range(dim))


def add(a: Sequence[int], b: Sequence[int]) -> LatticePoint:
    return tuple(int(x) + int(y) for x, y in zip(a, b))


def sub(a: Sequence[int], b: Sequence[int]) -> LatticePoint:
    return tuple(int(x) - int(y) for x, y in zip(a, b))


def scale(k: int, a: Sequence[int]) -> LatticePoint:
    return tuple(int(k) * int(x) for x in a)


def l1_norm(x: Sequence[int]) -> int:
    return int(sum(abs(int(v)) for v in x))


def neighbors(x: Sequence[int]) -> List[LatticePoint]:
    """The 2d nearest neighbours in the order +u1, -u1, +u2, -u2, ..."""
    x = tuple(int(v) for v in x)
    out = []
    for axis in range(len(x)):
        for sign in (1, -1):
            y = list(x)
            y[axis] += sign
            out.append(tuple(y))
    return out


def edge_between(a: Sequence[int], b: Sequence[int]) -> Edge:
    a, b = tuple(a), tuple(b)
    diff = sub(b, a)
    if l1_norm(diff) != 1:
        raise DomainError(f"{a} and {b} are not nearest neighbours")
    axis = next(i for i, v in enumerate(diff) if v != 0)
    return (a, axis) if diff[axis] == 1 else (b, axis)


def edge_endpoints(edge: Edge) -> Tuple[LatticePoint, LatticePoint]:
    base, axis = edge
    return base, add(base, unit(len(base), axis))


def incident_edges(x: Sequence[int]) -> List[Edge]:
    x = tuple(x)
    out = []
    for axis in range(len(x)):
        out.append((x, axis))
        out.append((sub(x, unit(len(x), axis)), axis))
    return out


def vertex_boundary(vertices: Iterable[LatticePoint]) -> FrozenSet[Edge]:
    """Edges of Z^d with exactly one endpoint in `vertices`."""
    vs = set(vertices)
    out: Set[Edge] = set()
    for v in vs:
        for w in neighbors(v):
            if w not in vs:
                out.add(edge_between(v, w))
    return frozenset(out)


def internal_edge_count(vertices: Iterable[LatticePoint]) -> int:
    vs = set(vertices)
    count = 0
    for v in vs:
        for axis in range(len(v)):
            if add(v, unit(len(v), axis)) in vs:
                count += 1
    return count


def fill_vertex_set(vertices: Iterable[LatticePoint]) -> FrozenSet[LatticePoint]:
    """Union of a finite vertex set with the finite components of its complement in Z^d."""
    pts = np.array(sorted(set(vertices)), dtype=np.int64)
    if len(pts) == 0:
        return frozenset()
    lo = pts.min(axis=0) - 1
    shape = tuple(int(v) for v in pts.max(axis=0) - lo + 2)
    mask = np.zeros(shape, dtype=bool)
    mask[tuple((pts - lo).T)] = True
    filled = ndimage.binary_fill_holes(mask)
    return frozenset(tuple(int(c) for c in row) for row in np.argwhere(filled) + lo)


def external_boundary_of(vertices: Iterable[LatticePoint]) -> FrozenSet[Edge]:
    return vertex_boundary(fill_vertex_set(vertices))


def merge_boundary_check(g1: Iterable[LatticePoint], g2: Iterable[LatticePoint]) -> bool:
    """External boundary of G1 ∪ G2 lies inside ∂Ḡ1 ∪ ∂Ḡ2."""
    g1, g2 = set(g1), set(g2)
    union = external_boundary_of(g1 | g2)
    return union <= (external_boundary_of(g1) | external_boundary_of(g2))


# ----------------------------------------------------------------------
# Plaquettes
# ----------------------------------------------------------------------
def _plaquette_cell(p: Edge) -> Tuple[List[int], List[int]]:
    """Closed dual cell of an edge in doubled coordinates: per-axis [lo, hi]."""
    base, axis = p
    lo, hi = [], []
    for k, c in enumerate(base):
        centre = 2 * c + (1 if k == axis else 0)
        if k == axis:
            lo.append(centre)
            hi.append(centre)
        else:
            lo.append(centre - 1)
            hi.append(centre + 1)
    return lo, hi


def plaquette_adjacency(p1: Edge, p2: Edge) -> bool:
    """True iff the dual (d-1)-cells of two distinct edges meet in a (d-2)-cell."""
    if p1 == p2:
        return False
    lo1, hi1 = _plaquette_cell(p1)
    lo2, hi2 = _plaquette_cell(p2)
    dim = 0
    for a, b, c, d in zip(lo1, hi1, lo2, hi2):
        lo, hi = max(a, c), min(b, d)
        if lo > hi:
            return False
        if hi > lo:
            dim += 1
    return dim == len(p1[0]) - 2


def plaquette_graph(plaquettes: Iterable[Edge]) -> nx.Graph:
    plaqs = set(plaquettes)
    graph = nx.Graph()
    graph.add_nodes_from(plaqs)
    for p in plaqs:
        base, _ = p
        for offset in itertools.product((-1, 0, 1), repeat=len(base)):
            b = add(base, offset)
            for axis in range(len(base)):
                q = (b, axis)
                if q in plaqs and q > p and plaquette_adjacency(p, q):
                    graph.add_edge(p, q)
    return graph


def surface_components(plaquettes: Iterable[Edge]) -> List[FrozenSet[Edge]]:
    """Connected components under plaquette adjacency, ordered by their smallest plaquette."""
    graph = plaquette_graph(plaquettes)
    comps = [frozenset(c) for c in nx.connected_components(graph)]
    return sorted(comps, key=min)


# ----------------------------------------------------------------------
# Boxes
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Box:
    lo: LatticePoint
    hi: LatticePoint

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        if len(lo) != len(hi):
            raise DomainError(f"box corners differ in dimension: {lo} vs {hi}")
        if len(lo) < 2:
            raise DomainError("dimension must be at least 2")
        if any(a > b for a, b in zip(lo, hi)):
            raise DomainError(f"box corners not ordered: lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, dim: int, half_width: int) -> "Box":
        return cls((-half_width,) * dim, (half_width,) * dim)

    @classmethod
    def from_corners(cls, lo: Sequence[int], hi: Sequence[int]) -> "Box":
        return cls(tuple(lo), tuple(hi))

    @classmethod
    def from_sides(cls, sides: Sequence[int], centered: bool = False) -> "Box":
        """Box with the given number of vertices per axis, anchored at 0 or centred on it."""
        sides = [int(s) for s in sides]
        if any(s < 1 for s in sides):
            raise DomainError(f"box sides must be positive: {sides}")
        lo = tuple(-(s // 2) if centered else 0 for s in sides)
        hi = tuple(a + s - 1 for a, s in zip(lo, sides))
        return cls(lo, hi)

    # --- shape -----------------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    @property
    def n_vertices(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def strides(self) -> Tuple[int, ...]:
        shape = self.shape
        return tuple(int(np.prod(shape[k + 1:])) for k in range(self.dim))

    @cached_property
    def coords(self) -> np.ndarray:
        """(n_vertices, d) coordinates in C order, which is lexicographic order."""
        grid = np.indices(self.shape).reshape(self.dim, -1).T
        return grid + np.asarray(self.lo)

    @cached_property
    def edge_table(self) -> np.ndarray:
        """(n_vertices, d) id of edge (v, axis) or -1 when v + u_axis leaves the box."""
        has = self.coords < np.asarray(self.hi)
        ids = np.cumsum(has.ravel()).reshape(has.shape) - 1
        return np.where(has, ids, -1)

    @property
    def n_edges(self) -> int:
        return int((self.edge_table >= 0).sum())

    @cached_property
    def edge_base(self) -> np.ndarray:
        rows, _ = np.nonzero(self.edge_table >= 0)
        return rows

    @cached_property
    def edge_axis(self) -> np.ndarray:
        _, cols = np.nonzero(self.edge_table >= 0)
        return cols

    @cached_property
    def shell(self) -> np.ndarray:
        c = self.coords
        return ((c == np.asarray(self.lo)) | (c == np.asarray(self.hi))).any(axis=1)

    @cached_property
    def adjacency(self) -> List[Tuple[Tuple[int, int], ...]]:
        """Per vertex: (neighbour index, edge id) pairs in neighbours() order, box-internal only."""
        c = self.coords
        table = self.edge_table
        out: List[List[Tuple[int, int]]] = [[] for _ in range(self.n_vertices)]
        for axis in range(self.dim):
            stride = self.strides[axis]
            up = np.nonzero(c[:, axis] < self.hi[axis])[0]
            down = np.nonzero(c[:, axis] > self.lo[axis])[0]
            for v in up.tolist():
                out[v].append((axis, 0, v + stride, int(table[v, axis])))
            for v in down.tolist():
                out[v].append((axis, 1, v - stride, int(table[v - stride, axis])))
        return [tuple((w, e) for _, _, w, e in sorted(row)) for row in out]

    # --- lookup ----------------------------------------------------------
    def contains(self, x: Sequence[int]) -> bool:
        return len(x) == self.dim and all(a <= int(v) <= b for a, v, b in zip(self.lo, x, self.hi))

    def index(self, x: Sequence[int]) -> int:
        if not self.contains(x):
            raise DomainError(f"point {tuple(x)} outside box {self.lo}..{self.hi}")
        return int(sum((int(v) - a) * s for v, a, s in zip(x, self.lo, self.strides)))

    def point(self, i: int) -> LatticePoint:
        return tuple(int(v) for v in self.coords[i])

    def on_shell(self, x: Sequence[int]) -> bool:
        return bool(self.shell[self.index(x)])

    def shell_distance(self, x: Sequence[int]) -> int:
        return min(min(int(v) - a, b - int(v)) for a, v, b in zip(self.lo, x, self.hi))

    def edge_index(self, edge: Edge) -> int:
        base, axis = edge
        eid = int(self.edge_table[self.index(base), axis])
        if eid < 0:
            raise DomainError(f"edge {edge} leaves box {self.lo}..{self.hi}")
        return eid

    def edge(self, eid: int) -> Edge:
        return self.point(int(self.edge_base[eid])), int(self.edge_axis[eid])

    def edges(self) -> Iterator[Edge]:
        for eid in range(self.n_edges):
            yield self.edge(eid)

    def mask_of(self, vertices: Iterable[LatticePoint]) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for v in vertices:
            mask[tuple(int(c) - a for c, a in zip(v, self.lo))] = True
        return mask


# ----------------------------------------------------------------------
# Configurations
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class BondConfig:
    box: Box
    bits: np.ndarray
    seed: int = 0
    stream_id: int = 0
    p: float = float("nan")

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool).ravel()
        if bits.size != self.box.n_edges:
            raise DomainError(f"expected {self.box.n_edges} bits, got {bits.size}")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BondConfig)
            and self.box == other.box
            and np.array_equal(self.bits, other.bits)
        )

    __hash__ = None

    @classmethod
    def from_open_edges(cls, box: Box, edges: Iterable[Edge], **meta) -> "BondConfig":
        bits = np.zeros(box.n_edges, dtype=bool)
        for e in edges:
            bits[box.edge_index(e)] = True
        return cls(box, bits, **meta)

    @classmethod
    def from_path(cls, box: Box, path: Sequence[LatticePoint], **meta) -> "BondConfig":
        return cls.from_open_edges(box, [edge_between(a, b) for a, b in zip(path, path[1:])], **meta)

    @classmethod
    def from_code(cls, box: Box, code: int) -> "BondConfig":
        """Bit i of the integer `code` is edge i."""
        bits = (code >> np.arange(box.n_edges, dtype=np.int64)) & 1
        return cls(box, bits.astype(bool))

    def with_bits(self, bits: np.ndarray) -> "BondConfig":
        return BondConfig(self.box, bits, seed=self.seed, stream_id=self.stream_id, p=self.p)

    @cached_property
    def open_list(self) -> List[bool]:
        return self.bits.tolist()

    @property
    def n_open(self) -> int:
        return int(self.bits.sum())

    def is_open(self, edge: Edge) -> bool:
        return bool(self.bits[self.box.edge_index(edge)])

    def open_edges(self) -> List[Edge]:
        return [self.box.edge(int(e)) for e in np.nonzero(self.bits)[0]]

    def code(self) -> int:
        return int(sum(1 << i for i in np.nonzero(self.bits)[0].tolist()))

    # --- serialization ---------------------------------------------------
    def to_bytes(self) -> bytes:
        d = self.box.dim
        header = CONFIG_MAGIC + struct.pack(
            f"<H{d}i{d}iQQdI",
            d,
            *self.box.lo,
            *self.box.hi,
            int(self.seed),
            int(self.stream_id),
            float(self.p),
            self.box.n_edges,
        )
        return header + np.packbits(self.bits, bitorder="little").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "BondConfig":
        if data[:4] != CONFIG_MAGIC:
            raise DomainError("not a percoz configuration record")
        (d,) = struct.unpack_from("<H", data, 4)
        fmt = f"<{d}i{d}iQQdI"
        values = struct.unpack_from(fmt, data, 6)
        lo, hi = tuple(values[:d]), tuple(values[d:2 * d])
        seed, stream_id, p, n_edges = values[2 * d:]
        offset = 6 + struct.calcsize(fmt)
        packed = np.frombuffer(data, dtype=np.uint8, offset=offset)
        bits = np.unpackbits(packed, count=n_edges, bitorder="little").astype(bool)
        return cls(Box(lo, hi), bits, seed=seed, stream_id=stream_id, p=p)


# ----------------------------------------------------------------------
# Clusters
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class ClusterData:
    vertices: FrozenSet[LatticePoint]
    open_edges: FrozenSet[Edge]
    graph_boundary: FrozenSet[Edge]
    touches_box_boundary: bool
    filled_vertices: Optional[FrozenSet[LatticePoint]] = None
    external_boundary: Optional[FrozenSet[Edge]] = None

    @property
    def plaquettes(self) -> Optional[FrozenSet[Edge]]:
        return self.external_boundary

    @property
    def size(self) -> int:
        return len(self.vertices)

    def __contains__(self, x) -> bool:
        return tuple(x) in self.vertices


def cluster_indices(
    config: BondConfig,
    start: int,
    allowed: Optional[np.ndarray] = None,
) -> Tuple[List[int], List[int]]:
    """BFS over open edges from vertex index `start`.

    With `allowed` (a boolean mask over vertex indices) edges with an endpoint outside the mask
    are ignored. Returns (vertex indices in visit order, open edge ids inside the component).
    """
    adjacency = config.box.adjacency
    open_list = config.open_list
    seen = {start}
    order = [start]
    edges: Set[int] = set()
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w, e in adjacency[v]:
            if not open_list[e]:
                continue
            if allowed is not None and not allowed[w]:
                continue
            edges.add(e)
            if w not in seen:
                seen.add(w)
                order.append(w)
                queue.append(w)
    return order, sorted(edges)


def cluster_from_indices(config: BondConfig, order: Sequence[int], edges: Sequence[int]) -> ClusterData:
    box = config.box
    vertices = frozenset(box.point(i) for i in order)
    return ClusterData(
        vertices=vertices,
        open_edges=frozenset(box.edge(e) for e in edges),
        graph_boundary=vertex_boundary(vertices),
        touches_box_boundary=bool(box.shell[list(order)].any()),
    )


def component(config: BondConfig, x: Sequence[int]) -> ClusterData:
    """Open cluster of `x` inside the box."""
    start = config.box.index(x)
    order, edges = cluster_indices(config, start)
    return cluster_from_indices(config, order, edges)


def fill(cluster: ClusterData, box: Box) -> ClusterData:
    """Add the complement components of the box that avoid its shell; set the external boundary."""
    if cluster.touches_box_boundary:
        raise IndeterminateFillError("cluster touches the box shell; its fill is not determined by the window")
    mask = box.mask_of(cluster.vertices)
    filled_mask = ndimage.binary_fill_holes(mask)
    filled = frozenset(tuple(int(c) for c in row) for row in np.argwhere(filled_mask) + np.asarray(box.lo))
    return ClusterData(
        vertices=cluster.vertices,
        open_edges=cluster.open_edges,
        graph_boundary=cluster.graph_boundary,
        touches_box_boundary=False,
        filled_vertices=filled,
        external_boundary=vertex_boundary(filled),
    )
