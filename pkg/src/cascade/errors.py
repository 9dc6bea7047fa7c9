"""Exception types shared across the toolkit.

The CLI maps these onto distinct exit codes (see cli.EXIT_*).
"""

from __future__ import annotations


class CascadeError(Exception):
    """Base class for all toolkit errors."""


class TraceFormatError(CascadeError):
    """A trace file line could not be parsed; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ValidationError(CascadeError):
    """Input is well-formed but violates an invariant or a metric requirement."""


class UpstreamError(CascadeError):
    """A backend call failed (unreachable, timed out, or unknown id)."""
