from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from console import get_logger
from errors import PercozError, UsageError
from experiment import ExperimentSpec
from records import parse_floats, parse_point, read_json
from report import Plot

log = get_logger(__name__)


# ----------------------------------------------------------------------
# Option parsers: raw CLI strings or config-file values -> typed values
# ----------------------------------------------------------------------
def as_int(value: Any) -> int:
    number = float(value)
    if not number.is_integer():
        raise ValueError(f"expected an integer, got {value!r}")
    return int(number)


def as_float(value: Any) -> float:
    return float(value)


def as_floats(value: Any) -> Tuple[float, ...]:
    if isinstance(value, str):
        return tuple(parse_floats(value))
    if isinstance(value, (int, float)):
        return (float(value),)
    return tuple(float(v) for v in value)


def as_ints(value: Any) -> Tuple[int, ...]:
    """'20,40,80', [20, 40, 80] or a range 'a:b:step'."""
    if isinstance(value, str) and ":" in value:
        start, stop, *rest = (int(v) for v in value.split(":"))
        return tuple(range(start, stop + 1, rest[0] if rest else 1))
    return tuple(as_int(v) for v in as_floats(value))


def as_point(value: Any) -> Tuple[int, ...]:
    if isinstance(value, str):
        return parse_point(value)
    return tuple(as_int(v) for v in value)


def as_bool(value: Any) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in ("1", "true", "yes", "on")
    return bool(value)


def as_path(value: Any) -> Path:
    path = Path(value)
    if not path.is_file():
        raise ValueError(f"no such file {path}")
    return path


def as_record(value: Any) -> dict:
    """A JSON record given inline (dict) or as a file path."""
    if isinstance(value, dict):
        return value
    return read_json(as_path(value))


def as_edge(value: Any) -> Tuple[Tuple[int, ...], int]:
    """'x,y,z:axis' with axis counted from 1."""
    if isinstance(value, str):
        base, axis = value.split(":")
        return parse_point(base), int(axis) - 1
    base, axis = value
    return as_point(base), int(axis) - 1


def choices(*allowed: str) -> Callable[[Any], Tuple[str, ...]]:
    def parse(value: Any) -> Tuple[str, ...]:
        items = [v.strip() for v in value.split(",")] if isinstance(value, str) else [str(v) for v in value]
        unknown = [v for v in items if v not in allowed]
        if unknown:
            raise ValueError(f"unknown {unknown}; choose from {list(allowed)}")
        return tuple(items)

    return parse


def choice(*allowed: str) -> Callable[[Any], str]:
    def parse(value: Any) -> str:
        value = str(value)
        if value not in allowed:
            raise ValueError(f"unknown {value!r}; choose from {list(allowed)}")
        return value

    return parse


@dataclass(frozen=True)
class Option:
    """A subcommand flag. `key` is the options-dict name, `--name` the CLI spelling."""

    name: str
    help: str
    parse: Callable[[Any], Any] = str
    default: Any = None
    flag: bool = False
    positional: bool = False

    @property
    def key(self) -> str:
        return self.name.replace("-", "_")


@dataclass
class Outcome:
    """What a command produced: the JSON record, CSV tables, defects found in the data, extra files."""

    record: Dict[str, Any]
    tables: Dict[str, Tuple[List[dict], Sequence[str]]] = field(default_factory=dict)
    plots: List[Plot] = field(default_factory=list)
    defects: List[str] = field(default_factory=list)
    artifacts: Dict[str, bytes] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return 1 if self.defects else 0


@dataclass
class Command:
    name: str
    description: str
    effect: Callable[[ExperimentSpec, Dict[str, Any]], Outcome]
    precondition: Callable[[ExperimentSpec, Dict[str, Any]], List[str]] = lambda spec, opts: []
    options: Tuple[Option, ...] = field(default_factory=tuple)
    output_name: str = "result.json"

    def resolve_options(self, spec: ExperimentSpec) -> Tuple[Dict[str, Any], List[str]]:
        known = {opt.key for opt in self.options}
        unknown = sorted(set(spec.options) - known)
        if unknown:
            log.warning("%s ignores options %s", self.name, unknown)
        resolved, problems = {}, []
        for opt in self.options:
            raw = spec.options.get(opt.key)
            if raw is None:
                resolved[opt.key] = opt.default
                continue
            try:
                resolved[opt.key] = opt.parse(raw)
            except (TypeError, ValueError, KeyError, PercozError) as exc:
                problems.append(f"{opt.name}: {exc}")
        return resolved, problems

    def __call__(self, spec: ExperimentSpec) -> Outcome:
        problems = spec.validate()
        opts, bad = self.resolve_options(spec)
        problems += bad
        if not problems:
            problems += self.precondition(spec, opts)
        if problems:
            raise UsageError(problems)
        return self.effect(spec, opts)


def require(opts: Dict[str, Any], *names: str) -> List[str]:
    return [f"{name.replace('_', '-')}: required" for name in names if opts.get(name) is None]
