"""Exception hierarchy shared across the toolkit.

Everything raised on bad data derives from CutcalError so callers (and the
CLI) can distinguish data problems from programming errors.
"""


class CutcalError(Exception):
    """Base class for all toolkit errors."""


class DegenerateConfiguration(CutcalError):
    """Input geometry does not constrain the quantity being solved for."""


class InsufficientMotion(CutcalError):
    """No relative motion large enough to calibrate from."""


class InconsistentSamples(CutcalError):
    """Repeated measurements of the same quantity disagree beyond tolerance."""


class EmptyAfterGating(CutcalError):
    """No trajectory samples survived the gating policy."""


class EmptyInput(CutcalError):
    """An operation that needs at least one value received none."""


class EmptyProfile(CutcalError):
    """A depth profile with no populated bins has no mean."""


class InvalidPolicy(CutcalError):
    """A pass policy with non-positive or contradictory parameters."""


class ParseError(CutcalError):
    """Malformed input file. ``line`` is 1-based; None when not line-scoped."""

    def __init__(self, reason: str, line: int | None = None):
        self.reason = reason
        self.line = line
        super().__init__(f"line {line}: {reason}" if line is not None else reason)


class FrameError(ParseError):
    """A frame label outside the known frame set."""


class NonMonotoneTime(ParseError):
    """Timestamps in a log are not strictly increasing."""
