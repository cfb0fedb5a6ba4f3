from __future__ import annotations

import logging
import os
import sys

from rich.console import Console
from rich.logging import RichHandler

# All diagnostics go to stderr; stdout is reserved for command output.
console = Console(stderr=True)

_CONFIGURED = False


def setup_logging(level: str | None = None) -> None:
    """Install a single RichHandler on the root logger (idempotent)."""
    global _CONFIGURED
    level = (level or os.getenv("PERCOZ_LOG_LEVEL") or "INFO").upper()
    root = logging.getLogger()
    if not _CONFIGURED:
        handler = RichHandler(console=console, show_path=False, rich_tracebacks=True)
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        root.addHandler(handler)
        _CONFIGURED = True
    root.setLevel(level)


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


def progress_enabled(quiet: bool = False) -> bool:
    """tqdm bars only when someone is watching."""
    return not quiet and sys.stderr.isatty()
