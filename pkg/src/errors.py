"""
Exception hierarchy for the completion toolkit.

Every error also derives from ValueError so callers that already guard
numeric code with ``except ValueError`` keep working.
"""
from typing import Optional


class TensorCompletionError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(TensorCompletionError, ValueError):
    """Shapes, modes or per-mode list lengths do not agree."""


class NumericalError(TensorCompletionError, ValueError):
    """Non-finite input or a degenerate quantity (e.g. zero reference norm)."""


class TensorFormatError(TensorCompletionError, ValueError):
    """A TNSR tensor or mask file is malformed."""

    def __init__(self, message: str, path: Optional[str] = None, offset: Optional[int] = None):
        self.path = path
        self.offset = offset
        location = ""
        if path is not None:
            location = f"{path}"
            if offset is not None:
                location += f" @ byte {offset}"
            location += ": "
        super().__init__(f"{location}{message}")


class ConfigError(TensorCompletionError, ValueError):
    """A solver configuration is unparsable or violates its invariants."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")


class RunLogError(TensorCompletionError, ValueError):
    """A CSV log or report violates its schema (bad header, non-increasing iter)."""
