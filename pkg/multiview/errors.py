"""
Error hierarchy shared by the library and the management commands.

Every error carries the process exit code the CLI uses for it:
1 = usage, 2 = data, 3 = numeric.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Optional


class MultiviewError(Exception):
    exit_code = 1


class UsageError(MultiviewError):
    """Bad flags, invalid configuration, missing manifest."""
    exit_code = 1


class DataError(MultiviewError):
    """
    Ingestion and shape problems. `path` and `line` locate the offending
    file position when there is one.
    """
    exit_code = 2

    def __init__(self, message: str, path: Optional[Path | str] = None, line: Optional[int] = None):
        self.path = Path(path) if path is not None else None
        self.line = line
        if self.path is not None and line is not None:
            message = f"{self.path}:{line}: {message}"
        elif self.path is not None:
            message = f"{self.path}: {message}"
        super().__init__(message)


class NumericalError(MultiviewError):
    """Non-finite weights, failed self-checks. `trace` holds the partial TrainTrace, if any."""
    exit_code = 3

    def __init__(self, message: str, trace: Any = None):
        self.trace = trace
        super().__init__(message)
