"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: data problems (annotations, audio,
file formats) exit 2, scorer failures exit 3.
"""


class TamperlocError(Exception):
    """Base class for all toolkit errors."""


# --- annotation / manifest errors -----------------------------------------


class DegenerateError(TamperlocError):
    """Segment with start >= end or non-finite bounds."""


class OutOfRangeError(TamperlocError):
    """Segment lies (partly) outside [0, utterance duration]."""


class OverlapError(TamperlocError):
    """Segments overlap where disjointness is required (ground truth)."""


class ParseError(TamperlocError):
    """A manifest / prediction / score / transcript line failed to parse."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownUttError(TamperlocError):
    """A prediction references an utterance absent from the ground truth."""


# --- audio errors ----------------------------------------------------------


class UnsupportedFormatError(TamperlocError):
    """WAV file uses an encoding the reader does not handle."""


class RangeError(TamperlocError):
    """Requested window exceeds the audio buffer."""


class EmptyBufferError(TamperlocError):
    """Operation requires at least one sample."""


# --- scorer errors ----------------------------------------------------------


class ScorerError(TamperlocError):
    """Base class for scoring failures."""


class ScorerUnavailableError(ScorerError):
    """External scorer process died or could not be started."""


class ProtocolError(ScorerError):
    """External scorer sent a malformed or out-of-contract response."""


class ScorerTimeoutError(ScorerError):
    """External scorer did not answer within the per-request timeout."""


class MissingScoreError(ScorerError):
    """Precomputed score table has no entry for the request."""


# --- splice synthesis errors -------------------------------------------------


class InfeasibleError(TamperlocError):
    """Word selection cannot satisfy the requested count even fully relaxed."""


class AllSilentError(TamperlocError):
    """Every frame of the segment is below the trim threshold."""


class SilentSegmentError(TamperlocError):
    """Gain matching needs non-silent audio on both sides."""
