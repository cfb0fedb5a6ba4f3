"""Sparse lattice kernels: h, f, g and their barred/tilded variants, empirical or synthetic."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from errors import ContractViolation
from lattice import LatticePoint, origin
from records import read_json, write_json

KERNEL_KINDS = ("h", "f", "g", "h_bar", "f_bar", "h_tilde", "f_tilde", "two-point", "synthetic")


@dataclass
class Kernel:
    """Nonnegative values on a finite set of lattice points.

    `radius` is the L-infinity radius of the window the kernel was truncated to (None when the
    support is exact, as for finite synthetic kernels).
    """

    dim: int
    kind: str = "synthetic"
    entries: Dict[LatticePoint, float] = field(default_factory=dict)
    std_errors: Dict[LatticePoint, float] = field(default_factory=dict)
    radius: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ContractViolation(f"unknown kernel kind {self.kind!r}")
        clean: Dict[LatticePoint, float] = {}
        for x, v in self.entries.items():
            x = tuple(int(c) for c in x)
            if len(x) != self.dim:
                raise ContractViolation(f"point {x} has dimension {len(x)}, kernel has {self.dim}")
            v = float(v)
            if not math.isfinite(v) or v < 0:
                raise ContractViolation(f"kernel value at {x} must be finite and nonnegative, got {v}")
            clean[x] = v
        self.entries = dict(sorted(clean.items()))
        self.std_errors = {tuple(int(c) for c in x): float(e) for x, e in self.std_errors.items()}

    # --- constructors -------------------------------------------------------
    @classmethod
    def delta(cls, dim: int, kind: str = "synthetic") -> "Kernel":
        return cls(dim, kind, {origin(dim): 1.0})

    @classmethod
    def point_mass(cls, x: Sequence[int], q: float, kind: str = "synthetic") -> "Kernel":
        x = tuple(int(c) for c in x)
        return cls(len(x), kind, {x: q})

    # --- access -------------------------------------------------------------
    def __getitem__(self, x: Sequence[int]) -> float:
        return self.entries.get(tuple(int(c) for c in x), 0.0)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Tuple[LatticePoint, float]]:
        return iter(self.entries.items())

    def error(self, x: Sequence[int]) -> float:
        return self.std_errors.get(tuple(int(c) for c in x), 0.0)

    @property
    def support(self) -> List[LatticePoint]:
        return [x for x, v in self.entries.items() if v > 0]

    @property
    def points(self) -> np.ndarray:
        return np.array(list(self.entries), dtype=np.int64).reshape(-1, self.dim)

    @property
    def values(self) -> np.ndarray:
        return np.array(list(self.entries.values()), dtype=float)

    @property
    def total_mass(self) -> float:
        return float(sum(self.entries.values()))

    def nonzero(self) -> "Kernel":
        return Kernel(
            self.dim, self.kind,
            {x: v for x, v in self.entries.items() if v > 0},
            {x: e for x, e in self.std_errors.items() if self.entries.get(x, 0.0) > 0},
            self.radius,
        )

    def with_conventions(self) -> "Kernel":
        """h(0) = 1 and f(0) = 0; other kinds are returned unchanged."""
        zero = origin(self.dim)
        entries = dict(self.entries)
        errors = dict(self.std_errors)
        if self.kind == "h":
            entries[zero] = 1.0
            errors[zero] = 0.0
        elif self.kind == "f":
            entries.pop(zero, None)
            errors.pop(zero, None)
        return Kernel(self.dim, self.kind, entries, errors, self.radius)

    # --- IO -----------------------------------------------------------------
    def to_record(self) -> dict:
        rows = []
        for x, v in self.entries.items():
            row = {"x": list(x), "value": v}
            if x in self.std_errors:
                row["std_error"] = self.std_errors[x]
            rows.append(row)
        record = {"dim": self.dim, "kind": self.kind, "entries": rows}
        if self.radius is not None:
            record["radius"] = self.radius
        return record

    @classmethod
    def from_record(cls, record: dict) -> "Kernel":
        try:
            dim = int(record["dim"])
            entries, errors = {}, {}
            for row in record["entries"]:
                x = tuple(int(c) for c in row["x"])
                entries[x] = float(row["value"])
                if row.get("std_error") is not None:
                    errors[x] = float(row["std_error"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ContractViolation(f"malformed kernel record: {exc}") from exc
        return cls(dim, record.get("kind", "synthetic"), entries, errors, record.get("radius"))

    def save(self, path: str | os.PathLike) -> None:
        write_json(path, self)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Kernel":
        return cls.from_record(read_json(path))
