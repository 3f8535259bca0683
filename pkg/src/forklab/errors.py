"""Exception hierarchy shared across the toolkit."""


class ForklabError(Exception):
    """Base class for all toolkit errors."""


class ParseError(ForklabError):
    """Source text violates the MiniLang grammar or name rules."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class MiniRuntimeError(ForklabError):
    """Raised by the interpreter: division by zero, bad index, stack overflow."""


class UnsupportedMode(ForklabError):
    """Clock operation not available in the current mode."""


class NoProfile(ForklabError):
    """Profiling data requested for an unvisited loop."""


class InvalidLoop(ForklabError):
    """Loop id does not exist in the target function."""


class NotCounted(ForklabError):
    """Loop does not have the counted shape required for unrolling."""


class InvalidFactor(ForklabError):
    """Unroll factor outside the allowed set."""


class NoEligibleLoops(ForklabError):
    """Fork-target selection found nothing to fork."""


class MismatchedArity(ForklabError):
    """Forks of one unit disagree on their parameter lists."""


class InsufficientData(ForklabError):
    """Finalization requested before every fork reached the invocation floor."""


class CapacityExceeded(ForklabError):
    """Performance storage cannot hold another unit."""


class AlreadyInstrumented(ForklabError):
    """Self-time instrumentation applied twice to one fork."""


class MissingBaseline(ForklabError):
    """A unit's baseline fork has no recorded invocations."""


class ZeroVariance(ForklabError):
    """Standardization hit a constant column (sparsity reduction was skipped)."""


class FormatError(ForklabError):
    """Persisted file does not match its declared layout."""


class SchemaMismatch(ForklabError):
    """Model feature names are not a subset of the artifact schema."""


class KindMismatch(ForklabError):
    """Model kind does not match the requested prediction."""


class MissingMeasurement(ForklabError):
    """No measured average for a (decision, parameter) pair."""

    def __init__(self, decision, param):
        super().__init__(f"no measured average for decision {decision!r} with parameter {param!r}")
        self.decision = decision
        self.param = param


class NonPositiveSpeedup(ForklabError):
    """Histogram/geomean input must be strictly positive."""


class UsageError(ForklabError):
    """Bad command-line invocation (exit code 1)."""
