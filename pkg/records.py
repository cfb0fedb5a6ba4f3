"""Canonical JSON and CSV emission.

Every JSON file percoz writes goes through `dumps`, so that parsing and re-emitting a file gives
the same bytes.
"""
from __future__ import annotations

import math
import os
from dataclasses import asdict, is_dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np
import orjson
import pandas as pd

JSON_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY

# Manifest keys outside the determinism contract.
VOLATILE_KEYS = ("timestamp", "wall_time_s")


def to_plain(obj: Any) -> Any:
    """Convert numpy scalars/arrays, tuples, dataclasses and Fractions into JSON-native values."""
    if is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_record"):
            return to_plain(obj.to_record())
        return to_plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = [to_plain(v) for v in obj]
        return sorted(items, key=repr) if isinstance(obj, (set, frozenset)) else items
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        # JSON has no NaN/inf.
        return value if math.isfinite(value) else None
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def dumps(obj: Any) -> bytes:
    return orjson.dumps(to_plain(obj), option=JSON_OPTIONS) + b"\n"


def loads(data: bytes | str) -> Any:
    return orjson.loads(data)


def write_json(path: str | os.PathLike, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(obj))
    return path


def read_json(path: str | os.PathLike) -> Any:
    return loads(Path(path).read_bytes())


def strip_volatile(record: Dict[str, Any]) -> Dict[str, Any]:
    """Copy of an output record without the manifest fields that change run to run."""
    out = dict(record)
    if isinstance(out.get("manifest"), dict):
        out["manifest"] = {k: v for k, v in out["manifest"].items() if k not in VOLATILE_KEYS}
    return out


def write_csv(path: str | os.PathLike, rows: Iterable[Dict[str, Any]], columns: Sequence[str]) -> Path:
    """Write rows with a fixed column order; missing keys become empty cells."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([to_plain(r) for r in rows], columns=list(columns))
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def append_jsonl(path: str | os.PathLike, obj: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "ab") as fh:
        fh.write(orjson.dumps(to_plain(obj), option=orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY) + b"\n")


def parse_point(text: str) -> tuple:
    """'1,0,0' -> (1, 0, 0)."""
    return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v != "")


def parse_floats(text: str) -> List[float]:
    return [float(v) for v in str(text).replace(" ", "").split(",") if v != ""]
