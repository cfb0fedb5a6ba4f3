from __future__ import annotations

import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from command import Command, Outcome
from command_list import COMMAND_DICT
from console import get_logger
from errors import BudgetExceeded, ContractViolation, DomainError, PercozError, UsageError
from experiment import ExperimentSpec
from records import to_plain, write_csv, write_json
from report import RunReport, render_gnuplot

log = get_logger(__name__)

CODE_VERSION = "1.0.0"

# Errors that mean the request itself cannot be served, reported like usage errors.
REFUSALS = (ContractViolation, DomainError, BudgetExceeded)


@dataclass
class OutputLayout:
    """Where a run's files go. `out` ending in .json names the record file; anything else is a directory."""

    directory: Path
    record: Path
    stem: str

    @classmethod
    def for_run(cls, out: str, default_name: str) -> "OutputLayout":
        path = Path(out)
        if path.suffix == ".json":
            return cls(path.parent, path, path.stem + "_")
        return cls(path, path / default_name, "")

    def table(self, name: str) -> Path:
        return self.directory / f"{self.stem}{name}.csv"

    def script(self) -> Path:
        return self.directory / f"{self.stem}plot.gp"

    def report(self) -> Path:
        return self.directory / f"{self.stem}report.html"


@dataclass
class RunResult:
    exit_code: int
    files: List[Path] = field(default_factory=list)
    outcome: Optional[Outcome] = None
    errors: List[str] = field(default_factory=list)


def manifest(spec: ExperimentSpec, wall_time_s: float) -> Dict[str, Any]:
    return {
        "code_version": CODE_VERSION,
        "command": spec.command,
        "spec": spec.to_record(),
        "spec_hash": spec.spec_hash,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_time_s": round(wall_time_s, 6),
    }


class Executor:
    """Runs commands on experiment specs, writes their outputs and records the full trace."""

    def __init__(self, report: Optional[RunReport] = None):
        self.report = report or RunReport()
        # One row per executed step.
        self.history: List[Dict[str, Any]] = []

    # ------------------------------------------------------------------
    # Core execution helpers
    # ------------------------------------------------------------------
    def run_step(self, step_idx: int, command: Command, spec: ExperimentSpec) -> RunResult:
        """Execute one command. UsageError propagates; refusals and failures become exit codes."""
        index = self.report.begin_step(command.name, spec.spec_hash, command.description)
        start = time.perf_counter()
        try:
            outcome = command(spec)
        except UsageError:
            self.report.finish_step(index, "usage error", time.perf_counter() - start)
            raise
        except REFUSALS as exc:
            log.error("%s refused: %s", command.name, exc)
            return self._failed(step_idx, index, command, start, 2, str(exc))
        except PercozError as exc:
            log.error("%s failed: %s", command.name, exc)
            return self._failed(step_idx, index, command, start, 1, str(exc))
        wall = time.perf_counter() - start
        files = self.write_outputs(command, spec, outcome, wall)
        status = "ok" if not outcome.defects else "defects"
        self.report.finish_step(index, status, wall, [str(f) for f in files], outcome.defects)
        self.history.append(
            {
                "Step": step_idx,
                "Command": command.name,
                "SpecHash": spec.spec_hash[:12],
                "Status": status,
                "Defects": len(outcome.defects),
                "WallTime": round(wall, 3),
                "Files": len(files),
            }
        )
        for defect in outcome.defects:
            log.error("defect: %s", defect)
        return RunResult(outcome.exit_code, files, outcome)

    def run_plan(self, plan: List[Tuple[Command, ExperimentSpec]]) -> List[RunResult]:
        """Run every (command, spec) pair in order."""
        return [self.run_step(idx, command, spec) for idx, (command, spec) in enumerate(plan, start=1)]

    def _failed(self, step_idx: int, index: int, command: Command, start: float, code: int, message: str) -> RunResult:
        wall = time.perf_counter() - start
        self.report.finish_step(index, "refused" if code == 2 else "failed", wall, defects=[message])
        self.history.append(
            {"Step": step_idx, "Command": command.name, "SpecHash": "", "Status": "failed", "Defects": 0, "WallTime": round(wall, 3), "Files": 0}
        )
        return RunResult(code, errors=[message])

    # ------------------------------------------------------------------
    # Output files
    # ------------------------------------------------------------------
    def write_outputs(self, command: Command, spec: ExperimentSpec, outcome: Outcome, wall_time_s: float) -> List[Path]:
        layout = OutputLayout.for_run(spec.out, command.output_name)
        files: List[Path] = []
        table_files: Dict[str, str] = {}
        for name, (rows, columns) in outcome.tables.items():
            path = write_csv(layout.table(name), rows, columns)
            table_files[name] = path.name
            files.append(path)
        for relative, data in outcome.artifacts.items():
            path = layout.directory / relative
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
            files.append(path)
        if outcome.plots and table_files:
            script = render_gnuplot(outcome.plots, table_files, command.name, spec.spec_hash, CODE_VERSION)
            layout.script().write_text(script, encoding="utf-8")
            files.append(layout.script())

        record = dict(to_plain(outcome.record))
        record["defects"] = list(outcome.defects)
        record["tables"] = {name: table_files[name] for name in sorted(table_files)}
        record["manifest"] = manifest(spec, wall_time_s)
        files.insert(0, write_json(layout.record, record))
        return files

    # ------------------------------------------------------------------
    # Trace helpers
    # ------------------------------------------------------------------
    def to_dataframe(self) -> pd.DataFrame:
        """The execution trace as a pandas DataFrame."""
        return pd.DataFrame(self.history, columns=["Step", "Command", "SpecHash", "Status", "Defects", "WallTime", "Files"])


def run(spec: ExperimentSpec, command: Optional[Command] = None, report_path: Optional[str] = None) -> int:
    """Run one spec end to end; returns 0 (success), 1 (defects or failure) or 2 (usage error)."""
    if command is None:
        command = COMMAND_DICT.get(spec.command)
        if command is None:
            log.error("command: unknown subcommand %r", spec.command)
            return 2
    executor = Executor(RunReport(f"percoz {spec.command}"))
    try:
        result = executor.run_step(1, command, spec)
    except UsageError as exc:
        for problem in exc.fields:
            log.error("%s", problem)
        return 2
    if result.outcome is not None:
        layout = OutputLayout.for_run(spec.out, command.output_name)
        executor.report.generate_html(report_path or layout.report(), CODE_VERSION)
        log.info("wrote %s", ", ".join(str(f) for f in result.files))
    return result.exit_code
