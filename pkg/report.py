"""Run summaries: a gnuplot script over the CSV tables and an HTML table of executed steps."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

from console import get_logger
from records import to_plain
from templates import render

log = get_logger(__name__)


@dataclass(frozen=True)
class Plot:
    table: str
    x: str
    y: str
    yerr: Optional[str] = None
    logscale_y: bool = False
    title: str = ""


def render_gnuplot(plots: Sequence[Plot], files: Mapping[str, str], command: str, spec_hash: str, version: str) -> str:
    """Script text only; plots whose table was not written are skipped."""
    usable = [p for p in plots if p.table in files]
    return render("plot.gp", plots=usable, files=dict(files), command=command, spec_hash=spec_hash, version=version)


class RunReport:
    """Per-step record of what ran, where its files went and which defects it found."""

    def __init__(self, title: str = "percoz run"):
        self.title = title
        self.steps: List[Dict[str, Any]] = []

    def begin_step(self, name: str, spec_hash: str = "", detail: str = "") -> int:
        self.steps.append({
            "step": len(self.steps) + 1,
            "name": name,
            "detail": detail,
            "spec_hash": spec_hash,
            "status": "running",
            "wall_time_s": None,
            "files": [],
            "defects": [],
            "metrics": {},
        })
        return len(self.steps) - 1

    def log_metrics(self, index: int, metrics: Mapping[str, Any]) -> None:
        self.steps[index]["metrics"].update({k: to_plain(v) for k, v in metrics.items()})

    def finish_step(
        self,
        index: int,
        status: str,
        wall_time_s: float,
        files: Sequence[str] = (),
        defects: Sequence[str] = (),
    ) -> None:
        s = self.steps[index]
        s["status"] = status
        s["wall_time_s"] = float(wall_time_s)
        s["files"] = list(files)
        s["defects"] = list(defects)

    def generate_html(self, path: str | Path, version: str = "") -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(render("report.html", title=self.title, steps=self.steps, version=version), encoding="utf-8")
        log.debug("report saved to %s", path)
        return path
