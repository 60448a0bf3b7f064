"""Exception types shared across the package."""


class SsrEntError(Exception):
    """Base class for all library errors."""


class MixedTotalNumber(SsrEntError):
    """Pure-state amplitudes span more than one total particle number."""


class ZeroVector(SsrEntError):
    """All amplitudes vanish."""


class SectorOutOfRange(SsrEntError):
    """Requested local-particle-number sector outside 0..N."""


class DimensionMismatch(SsrEntError):
    """Operator and state dimensions are incompatible."""


class ZeroProbabilityOutcome(SsrEntError):
    """Post-selection on an outcome of (numerically) zero probability."""


class ScaleExceeded(SsrEntError):
    """Requested computation is beyond the supported desk scale."""


class GapDetected(SsrEntError):
    """The many-copy particle-number distribution has a periodic gap.

    Carries the gap period and the support of the single-copy
    distribution so sweeps can report instead of aborting.
    """

    def __init__(self, period, support):
        self.period = period
        self.support = tuple(support)
        super().__init__(
            f"periodic gap of period {period} (single-copy support {self.support})"
        )


class NotAQubitState(SsrEntError):
    """Operation requires a two-level (qubit) pure state."""


class NotDirectSumOfPure(SsrEntError):
    """Input is not block-diagonal with one pure state per block."""


class DegenerateBlock(SsrEntError):
    """Standard form undefined: the one-particle block has a zero diagonal."""


class OutOfRange(SsrEntError):
    """Parameter outside its admissible range."""


class CutoffTooSmall(SsrEntError):
    """Truncation cutoff below the required mean + 6 sigma rule."""


class FrameNotNonnegative(SsrEntError):
    """Reference-frame coefficients must be real and non-negative."""


class NotNormalized(SsrEntError):
    """Input amplitudes do not have unit norm."""


class IndexOutOfRange(SsrEntError):
    """Index outside its admissible range."""


class ParseError(SsrEntError):
    """Malformed state file."""


class UnknownCommand(SsrEntError):
    """Unrecognized sweep command."""
