"""Error hierarchy shared by every module of the toolkit."""

from typing import Any, Dict, Optional


class HittingTimeError(Exception):
    """Base error carrying the raising module and a context mapping."""

    module = "core"

    def __init__(self, details: str, context: Optional[Dict[str, Any]] = None):
        """
        Initialize the error.

        Args:
            details: Human-readable description of the failure
            context: Parameters that reproduce the failure
        """
        super().__init__(details)
        self.details = details
        self.context = dict(context or {})

    def to_record(self) -> Dict[str, Any]:
        """Machine-readable error record (emitted by the CLI on failure)."""
        return {
            "error": type(self).__name__,
            "module": self.module,
            "details": self.details,
            "context": {k: _jsonable(v) for k, v in self.context.items()},
        }


def _jsonable(value: Any) -> Any:
    if isinstance(value, (str, int, bool)) or value is None:
        return value
    if isinstance(value, float):
        return value if value == value and abs(value) != float("inf") else str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return str(value)


class RangeError(HittingTimeError, ValueError):
    """A level or time lies outside the range where the quantity is defined."""

    module = "fluid"


# model

class ModelError(HittingTimeError):
    module = "model"


class InvalidDomain(ModelError, ValueError):
    pass


class OutOfDomain(ModelError, ValueError):
    pass


class NonzeroAtOrigin(ModelError):
    pass


class NegativeRate(ModelError):
    pass


class UnboundedDerivative(ModelError):
    pass


class NonpositiveStartDrift(ModelError):
    pass


# fluid

class StallDetected(HittingTimeError):
    module = "fluid"


class ConsistencyError(HittingTimeError):
    module = "fluid"


# rates

class DegenerateDenominator(HittingTimeError):
    module = "rates"


# engines

class InvalidN(HittingTimeError, ValueError):
    module = "ssa"


class InvalidStep(HittingTimeError, ValueError):
    module = "diffusion"


class SingularSystem(HittingTimeError):
    module = "oracle"


class OverflowGuard(HittingTimeError):
    module = "oracle"


# orchestration

class AllCensored(HittingTimeError):
    module = "experiment"


class BatchFailure(HittingTimeError):
    module = "workers"


class ConfigParseError(HittingTimeError):
    module = "cli"
