"""Experiment specifications.

A spec is merged from four sources, later ones winning: built-in defaults, `.env`
(PERCOZ_THREADS), a JSON or YAML config file mirroring the CLI flags, and explicit CLI flags.
Nothing is computed until `validate()` comes back empty.
"""
from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import yaml
from dotenv import load_dotenv

from console import get_logger
from errors import PercozError, UsageError
from events import Direction
from lattice import Box, LatticePoint
from records import dumps, loads, parse_floats, parse_point

log = get_logger(__name__)

SPEC_FIELDS = (
    "command", "dim", "p", "t", "box", "margin", "samples", "seed",
    "displacements", "threads", "out", "quiet",
)
# Fields that change where and how fast a run goes, never what it computes.
UNHASHED = ("threads", "out", "quiet")
DEFAULT_BOX_SIDE = 5


def _as_int(value: Any) -> int:
    if isinstance(value, bool):
        raise ValueError(f"expected an integer, got {value!r}")
    if isinstance(value, int):
        return value
    number = float(value)
    if not number.is_integer():
        raise ValueError(f"expected an integer, got {value!r}")
    return int(number)


def _as_bool(value: Any) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in ("1", "true", "yes", "on")
    return bool(value)


def _as_direction(value: Any) -> Optional[Tuple[float, ...]]:
    if value is None:
        return None
    if isinstance(value, str):
        return tuple(parse_floats(value))
    return tuple(float(v) for v in value)


def _as_box(value: Any) -> Any:
    """Keep the user's box form, in JSON-native types."""
    if value is None or isinstance(value, (str, dict)):
        return value
    if isinstance(value, (int, float)):
        return _as_int(value)
    return [_as_int(v) for v in value]


def read_points(value: Any) -> List[LatticePoint]:
    """Points from a list, a 'a,b,c;d,e,f' string or a JSON/YAML/text file of them."""
    if value is None:
        return []
    if isinstance(value, (str, os.PathLike)) and Path(value).is_file():
        path = Path(value)
        if path.suffix in (".json", ".yaml", ".yml"):
            data = read_config(path)
            if isinstance(data, Mapping):
                data = data.get("displacements", [])
            return read_points(data)
        lines = [ln.split("#")[0].strip() for ln in path.read_text().splitlines()]
        return [parse_point(ln) for ln in lines if ln]
    if isinstance(value, str):
        return [parse_point(chunk) for chunk in value.split(";") if chunk.strip()]
    if value and all(isinstance(c, (int, float)) for c in value):
        return [tuple(_as_int(c) for c in value)]
    return [tuple(_as_int(c) for c in point) for point in value]


def read_config(path: str | os.PathLike) -> Any:
    path = Path(path)
    if not path.is_file():
        raise UsageError([f"config: no such file {path}"])
    text = path.read_bytes()
    try:
        if path.suffix in (".yaml", ".yml"):
            return yaml.safe_load(text)
        return loads(text)
    except (yaml.YAMLError, ValueError) as exc:
        raise UsageError([f"config: cannot parse {path}: {exc}"]) from exc


def parse_box(value: Any, dim: int) -> Box:
    """Box from one of: L (centred cube, L vertices per side), 'a,b,c' (sides anchored at 0),
    'lo..hi' corner strings, or {"lo": [...], "hi": [...]}.
    """
    if value is None:
        return Box.from_sides([DEFAULT_BOX_SIDE] * dim, centered=True)
    if isinstance(value, Mapping):
        return Box.from_corners(value["lo"], value["hi"])
    if isinstance(value, str):
        text = value.replace(" ", "")
        if ".." in text:
            lo, hi = text.split("..", 1)
            return Box.from_corners(parse_point(lo), parse_point(hi))
        value = list(parse_point(text))
    if isinstance(value, int):
        return Box.from_sides([value] * dim, centered=True)
    sides = list(value)
    if len(sides) == 1:
        return Box.from_sides(sides * dim, centered=True)
    return Box.from_sides(sides)


@dataclass
class ExperimentSpec:
    command: str = ""
    dim: int = 3
    p: float = 0.5
    t: Optional[Tuple[float, ...]] = None
    box: Any = None
    margin: int = 0
    samples: int = 10_000
    seed: int = 0
    displacements: List[LatticePoint] = field(default_factory=list)
    threads: int = 1
    out: str = "out"
    quiet: bool = False
    options: Dict[str, Any] = field(default_factory=dict)
    # coercion failures found while merging sources
    problems: List[str] = field(default_factory=list, repr=False, compare=False)

    _COERCE = {
        "command": str,
        "dim": _as_int,
        "p": float,
        "t": _as_direction,
        "box": _as_box,
        "margin": _as_int,
        "samples": _as_int,
        "seed": _as_int,
        "displacements": read_points,
        "threads": _as_int,
        "out": str,
        "quiet": _as_bool,
    }

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------
    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ExperimentSpec":
        spec = cls()
        for key, value in data.items():
            name = str(key).replace("-", "_")
            if name == "x":
                name = "displacements"
            if name in cls._COERCE:
                if value is None:
                    continue
                try:
                    setattr(spec, name, cls._COERCE[name](value))
                except (TypeError, ValueError, PercozError) as exc:
                    spec.problems.append(f"{name}: {exc}")
            elif name == "options" and isinstance(value, Mapping):
                spec.options.update({str(k).replace("-", "_"): v for k, v in value.items()})
            else:
                spec.options[name] = value
        return spec

    @classmethod
    def load(
        cls,
        command: str,
        config: Optional[str | os.PathLike] = None,
        overrides: Optional[Mapping[str, Any]] = None,
        env_file: Optional[str | os.PathLike] = None,
    ) -> "ExperimentSpec":
        """Defaults, then .env, then the config file, then CLI overrides (None means 'not given')."""
        merged: Dict[str, Any] = {}
        load_dotenv(env_file, override=False)
        if os.getenv("PERCOZ_THREADS"):
            merged["threads"] = os.getenv("PERCOZ_THREADS")
        if config is not None:
            data = read_config(config)
            if data is None:
                data = {}
            if not isinstance(data, Mapping):
                raise UsageError([f"config: {config} must hold a mapping of flags"])
            merged.update(data)
        merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
        merged["command"] = command
        return cls.from_mapping(merged)

    # ------------------------------------------------------------------
    # Resolved values
    # ------------------------------------------------------------------
    def make_box(self) -> Box:
        box = parse_box(self.box, self.dim)
        if box.dim != self.dim:
            raise UsageError([f"box: has dimension {box.dim}, expected {self.dim}"])
        return box

    def direction(self) -> Direction:
        if self.t is None:
            return Direction.axis(self.dim, 0)
        return Direction.of(self.t)

    def x(self) -> LatticePoint:
        """The first displacement, u1 when none is given."""
        if self.displacements:
            return self.displacements[0]
        return (1,) + (0,) * (self.dim - 1)

    # ------------------------------------------------------------------
    # Validation and identity
    # ------------------------------------------------------------------
    def validate(self) -> List[str]:
        """Every violated field as 'field: message'."""
        problems = list(self.problems)
        if not self.command:
            problems.append("command: missing")
        if self.dim < 2:
            problems.append(f"dim: must be at least 2, got {self.dim}")
        if not (math.isfinite(self.p) and 0.0 <= self.p <= 1.0):
            problems.append(f"p: must lie in [0, 1], got {self.p}")
        if self.t is not None:
            if len(self.t) != self.dim:
                problems.append(f"t: has {len(self.t)} components, expected {self.dim}")
            elif not all(math.isfinite(v) for v in self.t) or not any(self.t):
                problems.append(f"t: must be a finite nonzero vector, got {list(self.t)}")
        if self.dim >= 2:
            try:
                self.make_box()
            except UsageError as exc:
                problems.extend(exc.fields)
            except (PercozError, ValueError, KeyError, TypeError) as exc:
                problems.append(f"box: {exc}")
        if self.margin < 0:
            problems.append(f"margin: must be nonnegative, got {self.margin}")
        if self.samples < 1:
            problems.append(f"samples: must be positive, got {self.samples}")
        if self.seed < 0:
            problems.append(f"seed: must be nonnegative, got {self.seed}")
        if self.threads < 1:
            problems.append(f"threads: must be positive, got {self.threads}")
        for x in self.displacements:
            if len(x) != self.dim:
                problems.append(f"displacements: {list(x)} has {len(x)} coordinates, expected {self.dim}")
        return problems

    def to_record(self) -> dict:
        record = {name: getattr(self, name) for name in SPEC_FIELDS}
        record["t"] = list(self.t) if self.t is not None else None
        record["displacements"] = [list(x) for x in self.displacements]
        record["options"] = dict(sorted(self.options.items()))
        return record

    @property
    def spec_hash(self) -> str:
        """SHA-256 of the canonical JSON of everything that determines the results."""
        record = {k: v for k, v in self.to_record().items() if k not in UNHASHED}
        return hashlib.sha256(dumps(record)).hexdigest()

    def __repr__(self):
        return f"ExperimentSpec(command={self.command}, dim={self.dim}, p={self.p}, seed={self.seed}, hash={self.spec_hash[:12]})"
