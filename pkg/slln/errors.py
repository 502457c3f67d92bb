"""Exception taxonomy and process exit codes.

Exit codes are part of the command-line contract:

====  ==========================================================
code  meaning
====  ==========================================================
0     success, every hard assertion passed
1     a hard assertion failed, or an unexpected error occurred
2     configuration could not be parsed or validated
3     invalid measure, model or experiment input
4     a state-space or strategy-space cap was hit
5     an extended expectation did not converge
10    internal invariant violated (engine bug)
====  ==========================================================
"""

from typing import Any, Optional

EXIT_OK = 0
EXIT_ASSERTION_FAILED = 1
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_CAPACITY = 4
EXIT_NOT_CONVERGED = 5
EXIT_INVARIANT = 10


class SllnError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code = EXIT_ASSERTION_FAILED


# Measures ------------------------------------------------------------------

class MeasureError(SllnError):
    exit_code = EXIT_INPUT


class EmptySupport(MeasureError):
    pass


class NegativeProb(MeasureError):
    pass


class NotNormalizable(MeasureError):
    pass


class LengthMismatch(MeasureError):
    pass


class EmptyAmbiguitySet(MeasureError):
    pass


# Models and operations -----------------------------------------------------

class ModelError(SllnError):
    exit_code = EXIT_INPUT


class NotExactCapable(ModelError):
    pass


class HorizonMismatch(ModelError):
    pass


class UnknownWindowFn(ModelError):
    pass


class InvalidStrategy(ModelError):
    pass


class UnboundedSupport(ModelError):
    pass


class GridTooCoarse(ModelError):
    pass


class NotMonotone(ModelError):
    pass


class TailNotSummable(ModelError):
    pass


class HorizonTooSmall(ModelError):
    pass


class IndexOutOfScheme(ModelError):
    pass


class HorizonExhausted(ModelError):
    pass


class BoundViolated(ModelError):
    """Raised when a greedy certificate fails; ``witness`` holds the offending pair."""

    def __init__(self, message: str, witness: Optional[Any] = None):
        super().__init__(message)
        self.witness = witness


class MuOutOfBand(ModelError):
    pass


class TargetOutOfBracket(ModelError):
    pass


class NoHeavyTailLaw(ModelError):
    pass


class WeightConditionFails(ModelError):
    pass


# Caps ----------------------------------------------------------------------

class CapacityLimitError(SllnError):
    exit_code = EXIT_CAPACITY


class StrategySpaceTooLarge(CapacityLimitError):
    pass


class StateSpaceCap(CapacityLimitError):
    pass


# Convergence ---------------------------------------------------------------

class NotConvergedError(SllnError):
    exit_code = EXIT_NOT_CONVERGED

    def __init__(self, message: str, result: Optional[Any] = None):
        super().__init__(message)
        self.result = result


# Configuration -------------------------------------------------------------

class ConfigError(SllnError):
    exit_code = EXIT_CONFIG


class ParseError(ConfigError):
    """Configuration text could not be parsed; carries the line and/or field."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field:
            location.append(f"field '{field}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.line = line
        self.field = field


class MissingSeed(ConfigError):
    pass


class TargetOrderError(ConfigError):
    pass


class ConfigValidationError(ConfigError):
    pass


# Internal ------------------------------------------------------------------

class InvariantViolation(SllnError):
    exit_code = EXIT_INVARIANT
