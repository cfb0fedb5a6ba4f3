"""Bernoulli(p) bond sampling and Monte Carlo estimators.

One RNG family: the uniforms of stream (seed, stream_id) come from
numpy.random.default_rng(SeedSequence([seed, stream_id])) and an edge is open when its uniform is
below p. Every p therefore shares the same uniforms, which is the monotone coupling. Estimators split
their samples into fixed-size shards with stream_id = shard index, so the numbers do not depend on
how many workers run the shards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from multiprocessing import Pool
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from asymptotics import DecaySeries
from combinatorics import auto_volume, phi_exact
from console import get_logger, progress_enabled
from errors import BudgetExceeded, ContractViolation, InsufficientStatistics
from events import (
    EVENT_KINDS,
    Direction,
    Event,
    check_margin,
    classifier_for,
    finite_two_point,
)
from kernel import Kernel
from lattice import Box, BondConfig, LatticePoint, cluster_from_indices, cluster_indices, fill, origin

log = get_logger(__name__)

SHARD_SIZE = 8192
MIN_CONDITIONING_HITS = 100
MAX_TABLE_EDGES = 24
LOOKUP_EDGES = 16
KERNEL_KINDS = EVENT_KINDS + ("two-point",)

__all__ = [
    "Direction",
    "EstimatorResult",
    "KernelEstimate",
    "coupled_configs",
    "decay_profile",
    "estimate_event",
    "estimate_kernels",
    "event_table",
    "finite_two_point",
    "sample_batch",
    "sample_config",
    "surface_tail",
    "uniform_batch",
]


# ----------------------------------------------------------------------
# Streams
# ----------------------------------------------------------------------
def rng_for(seed: int, stream_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream_id)]))


def uniform_batch(box: Box, n: int, seed: int, stream_id: int = 0) -> np.ndarray:
    """(n, E) uniforms in canonical edge order."""
    return rng_for(seed, stream_id).random((int(n), box.n_edges))


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ContractViolation(f"p must lie in [0, 1], got {p}")
    return p


def sample_batch(box: Box, p: float, n: int, seed: int, stream_id: int = 0) -> np.ndarray:
    return uniform_batch(box, n, seed, stream_id) < _check_p(p)


def sample_config(box: Box, p: float, seed: int, stream_id: int = 0) -> BondConfig:
    """First configuration of stream (seed, stream_id); each edge open with probability p."""
    bits = sample_batch(box, p, 1, seed, stream_id)[0]
    return BondConfig(box, bits, seed=int(seed), stream_id=int(stream_id), p=float(p))


def coupled_configs(box: Box, ps: Sequence[float], seed: int, stream_id: int = 0) -> List[BondConfig]:
    """One configuration per p from shared uniforms: open edges grow with p."""
    uniforms = uniform_batch(box, 1, seed, stream_id)[0]
    return [BondConfig(box, uniforms < _check_p(p), seed=int(seed), stream_id=int(stream_id), p=float(p)) for p in ps]


def shard_plan(n_samples: int, shard_size: int = SHARD_SIZE) -> List[Tuple[int, int]]:
    """(stream_id, count) pairs covering n_samples."""
    n_samples = int(n_samples)
    plan = []
    stream = 0
    while n_samples > 0:
        count = min(shard_size, n_samples)
        plan.append((stream, count))
        n_samples -= count
        stream += 1
    return plan


def run_shards(worker: Callable, jobs: Sequence, threads: int = 1, desc: str = "shards", quiet: bool = True) -> list:
    """Map `worker` over `jobs` in order, in a Pool when threads > 1."""
    out = []
    with tqdm(total=len(jobs), desc=desc, disable=not progress_enabled(quiet), leave=False) as bar:
        if threads > 1 and len(jobs) > 1:
            with Pool(processes=min(int(threads), len(jobs))) as pool:
                for result in pool.imap(worker, jobs):
                    out.append(result)
                    bar.update()
        else:
            for job in jobs:
                out.append(worker(job))
                bar.update()
    return out


def _configs(box: Box, p: float, seed: int, stream: int, count: int):
    for bits in sample_batch(box, p, count, seed, stream):
        yield BondConfig(box, bits, seed=seed, stream_id=stream, p=p)


# ----------------------------------------------------------------------
# Results
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class EstimatorResult:
    value: Optional[float]
    std_error: Optional[float]
    n_samples: int
    hits: int
    seed: int
    box: Optional[Box] = None
    conditioning: Optional[int] = None
    status: str = "ok"
    label: str = ""

    @classmethod
    def bernoulli(cls, hits: int, n: int, seed: int, box: Optional[Box] = None, label: str = "") -> "EstimatorResult":
        if n <= 0:
            return cls(None, None, 0, 0, seed, box, status="insufficient statistics", label=label)
        value = hits / n
        return cls(value, math.sqrt(value * (1 - value) / n), int(n), int(hits), int(seed), box, label=label)

    @classmethod
    def conditional(
        cls,
        hits: int,
        given: int,
        n: int,
        seed: int,
        box: Optional[Box] = None,
        label: str = "",
        min_hits: int = MIN_CONDITIONING_HITS,
    ) -> "EstimatorResult":
        if given < min_hits:
            log.warning("%s: %d conditioning hits, need %d", label or "estimate", given, min_hits)
            return cls(None, None, int(n), int(hits), int(seed), box, int(given), "insufficient statistics", label)
        value = hits / given
        return cls(value, math.sqrt(value * (1 - value) / given), int(n), int(hits), int(seed), box, int(given), "ok", label)

    @property
    def ok(self) -> bool:
        return self.value is not None

    def require(self) -> float:
        if self.value is None:
            raise InsufficientStatistics(f"{self.label or 'estimate'}: {self.status}")
        return self.value

    def to_record(self) -> dict:
        record = {
            "value": self.value,
            "std_error": self.std_error,
            "n": self.n_samples,
            "hits": self.hits,
            "seed": self.seed,
            "status": self.status,
        }
        if self.conditioning is not None:
            record["conditioning"] = self.conditioning
        if self.box is not None:
            record["box"] = {"lo": list(self.box.lo), "hi": list(self.box.hi)}
        if self.label:
            record["label"] = self.label
        return record


# ----------------------------------------------------------------------
# Indicator tables over all configurations of a tiny box
# ----------------------------------------------------------------------
def _table_chunk(args) -> np.ndarray:
    box, event, start, stop = args
    return np.fromiter((event(BondConfig.from_code(box, c)) for c in range(start, stop)), dtype=bool, count=stop - start)


def event_table(box: Box, event: Event, threads: int = 1, quiet: bool = True) -> np.ndarray:
    """Indicator of `event` for every code in [0, 2^E); bit i of a code is edge i."""
    n_edges = box.n_edges
    if n_edges > MAX_TABLE_EDGES:
        raise BudgetExceeded(f"{n_edges} edges exceed the 2^{MAX_TABLE_EDGES} enumeration budget")
    total = 1 << n_edges
    chunk = 1 << min(n_edges, 12)
    jobs = [(box, event, start, min(start + chunk, total)) for start in range(0, total, chunk)]
    parts = run_shards(_table_chunk, jobs, threads, desc=f"enumerate {event.kind}", quiet=quiet)
    return np.concatenate(parts)


@lru_cache(maxsize=16)
def _cached_table(box: Box, event: Event) -> np.ndarray:
    return event_table(box, event)


def codes_of(bits: np.ndarray) -> np.ndarray:
    weights = np.left_shift(np.int64(1), np.arange(bits.shape[-1], dtype=np.int64))
    return bits.astype(np.int64) @ weights


def _event_shard(args) -> int:
    box, event, p, seed, stream, count, table = args
    if table is not None:
        return int(table[codes_of(sample_batch(box, p, count, seed, stream))].sum())
    return sum(1 for config in _configs(box, p, seed, stream, count) if event(config))


def estimate_event(
    box: Box,
    event: Event,
    p: float,
    n_samples: int,
    seed: int,
    threads: int = 1,
    quiet: bool = True,
    lookup: Optional[bool] = None,
) -> EstimatorResult:
    """Bernoulli estimate of P_p(event); on boxes with few edges each sample is a table lookup."""
    p = _check_p(p)
    if lookup is None:
        lookup = box.n_edges <= LOOKUP_EDGES
    table = _cached_table(box, event) if lookup else None
    jobs = [(box, event, p, seed, stream, count, table) for stream, count in shard_plan(n_samples)]
    hits = sum(run_shards(_event_shard, jobs, threads, desc=event.kind, quiet=quiet))
    return EstimatorResult.bernoulli(hits, int(n_samples), seed, box, label=event.describe())


# ----------------------------------------------------------------------
# Surface-size tail
# ----------------------------------------------------------------------
def _surface_shard(args) -> Tuple[int, int]:
    box, x, threshold, p, seed, stream, count = args
    start, target = box.index(origin(box.dim)), box.index(x)
    above = given = 0
    for config in _configs(box, p, seed, stream, count):
        order, edges = cluster_indices(config, start)
        if box.shell[order].any() or target not in set(order):
            continue
        given += 1
        filled = fill(cluster_from_indices(config, order, edges), box)
        if len(filled.external_boundary) >= threshold:
            above += 1
    return above, given


def surface_tail(
    x: Sequence[int],
    delta: float,
    p: float,
    box: Box,
    n_samples: int,
    seed: int,
    phi: Optional[int] = None,
    margin: int = 0,
    threads: int = 1,
    quiet: bool = True,
) -> EstimatorResult:
    """P(|external boundary of C| >= (1+delta) phi(x) | 0 and x in one finite cluster)."""
    x = tuple(int(v) for v in x)
    check_margin(box, origin(box.dim), margin)
    check_margin(box, x, margin)
    if phi is None:
        oracle = phi_exact(x, auto_volume(x))
        if not oracle.certified:
            log.warning("phi%s = %d is not certified; tail threshold may be off", x, oracle.phi)
        phi = oracle.phi
    threshold = (1.0 + float(delta)) * phi
    jobs = [(box, x, threshold, _check_p(p), seed, stream, count) for stream, count in shard_plan(n_samples)]
    parts = run_shards(_surface_shard, jobs, threads, desc="surface tail", quiet=quiet)
    above = sum(a for a, _ in parts)
    given = sum(g for _, g in parts)
    return EstimatorResult.conditional(above, given, int(n_samples), seed, box, label=f"surface-tail x={x} delta={delta}")


# ----------------------------------------------------------------------
# Kernels
# ----------------------------------------------------------------------
@dataclass
class KernelEstimate:
    kernels: Dict[str, Kernel]
    results: Dict[str, Dict[LatticePoint, EstimatorResult]]
    n_samples: int
    implication_failures: int = 0
    failure_examples: List[str] = field(default_factory=list)

    def rows(self) -> List[dict]:
        rows = []
        for kind, per_x in self.results.items():
            for x, r in per_x.items():
                rows.append({"kind": kind, "x": ",".join(map(str, x)), "value": r.value, "std_error": r.std_error, "n": r.n_samples})
        return rows

    def to_record(self) -> dict:
        return {
            "records": [dict(row, x=[int(c) for c in row["x"].split(",")]) for row in self.rows()],
            "kernels": {kind: k.to_record() for kind, k in self.kernels.items()},
            "n_samples": self.n_samples,
            "implication_failures": self.implication_failures,
            "failure_examples": self.failure_examples,
        }


def _kernel_shard(args):
    box, t, xs, margin, p, seed, stream, count = args
    clf = classifier_for(box, t, margin)
    counts = np.zeros((len(KERNEL_KINDS), len(xs)), dtype=np.int64)
    failures, examples = 0, []
    for config in _configs(box, p, seed, stream, count):
        cluster = clf.origin_cluster(config)
        for j, x in enumerate(xs):
            record = clf.classify(config, x, cluster=cluster)
            for i, kind in enumerate(EVENT_KINDS):
                counts[i, j] += record.flag(kind)
            counts[-1, j] += record.finite_connect
            bad = record.implication_failures()
            if bad:
                failures += 1
                if len(examples) < 5:
                    examples.append(f"stream {stream}: " + "; ".join(bad))
    return counts, failures, examples


def estimate_kernels(
    p: float,
    t: Direction,
    displacements: Sequence[Sequence[int]],
    box: Box,
    n_samples: int,
    seed: int,
    margin: int = 0,
    threads: int = 1,
    quiet: bool = True,
) -> KernelEstimate:
    """Empirical h, f, g, barred, tilded and two-point kernels from one shared set of samples."""
    xs = [tuple(int(c) for c in x) for x in displacements]
    clf = classifier_for(box, t, margin)
    clf.check_point(origin(box.dim))
    for x in xs:
        clf.check_point(x)
        if not t.gt(t.level(x), 0):
            raise ContractViolation(f"<t,x> must be positive for x={x}")
    jobs = [(box, t, xs, margin, _check_p(p), seed, stream, count) for stream, count in shard_plan(n_samples)]
    parts = run_shards(_kernel_shard, jobs, threads, desc="kernels", quiet=quiet)
    counts = sum(c for c, _, _ in parts) if parts else np.zeros((len(KERNEL_KINDS), len(xs)), dtype=np.int64)
    failures = sum(f for _, f, _ in parts)
    examples = [e for _, _, ex in parts for e in ex][:5]
    if failures:
        log.error("%d samples broke an event implication", failures)

    kernels: Dict[str, Kernel] = {}
    results: Dict[str, Dict[LatticePoint, EstimatorResult]] = {}
    radius = max((max(abs(c) for c in x) for x in xs), default=0)
    for i, kind in enumerate(KERNEL_KINDS):
        per_x = {
            x: EstimatorResult.bernoulli(int(counts[i, j]), int(n_samples), seed, box, label=f"{kind} x={x}")
            for j, x in enumerate(xs)
        }
        results[kind] = per_x
        kernel = Kernel(
            box.dim,
            kind,
            {x: r.value or 0.0 for x, r in per_x.items()},
            {x: r.std_error or 0.0 for x, r in per_x.items()},
            radius=radius,
        )
        kernels[kind] = kernel.with_conventions()
    return KernelEstimate(kernels, results, int(n_samples), failures, examples)


# ----------------------------------------------------------------------
# Decay along a ray
# ----------------------------------------------------------------------
def _decay_shard(args) -> np.ndarray:
    box, points, p, seed, stream, count = args
    start = box.index(origin(box.dim))
    targets = [box.index(x) for x in points]
    hits = np.zeros(len(points), dtype=np.int64)
    for config in _configs(box, p, seed, stream, count):
        order, _ = cluster_indices(config, start)
        if box.shell[order].any():
            continue
        members = set(order)
        hits += np.fromiter((i in members for i in targets), dtype=bool, count=len(targets))
    return hits


def decay_profile(
    p: float,
    x_hat: Sequence[float],
    n_list: Sequence[int],
    box: Box,
    n_samples: int,
    seed: int,
    margin: int = 0,
    threads: int = 1,
    quiet: bool = True,
) -> DecaySeries:
    """P(0 <-> floor(n x_hat), finite) for each n from shared samples; zero-hit points are left out."""
    direction = Direction.of(x_hat)
    ns = sorted(set(int(n) for n in n_list))
    points = [tuple(int(c) for c in np.floor(n * np.asarray(direction.t) + 1e-12)) for n in ns]
    for x in points:
        check_margin(box, x, margin)
    jobs = [(box, points, _check_p(p), seed, stream, count) for stream, count in shard_plan(n_samples)]
    hits = sum(run_shards(_decay_shard, jobs, threads, desc="decay", quiet=quiet))
    kept_n, values, errors = [], [], []
    for n, h in zip(ns, np.atleast_1d(hits)):
        if h == 0:
            log.warning("no finite connection to n=%d along %s in %d samples", n, direction.t, n_samples)
            continue
        r = EstimatorResult.bernoulli(int(h), int(n_samples), seed, box)
        kept_n.append(n)
        values.append(r.value)
        errors.append(r.std_error)
    return DecaySeries(direction.t, tuple(kept_n), tuple(values), tuple(errors), source="monte-carlo")
