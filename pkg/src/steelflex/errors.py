"""Exception hierarchy shared by all steelflex modules."""
from typing import Any, Dict, Optional


class SteelFlexError(Exception):
    """Base class for every error raised by steelflex.

    Each subclass carries the process exit code the CLI uses when the error
    escapes a command, so scripted sweeps can tell failure classes apart.
    """

    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            "details": {k: _jsonable(v) for k, v in self.details.items()},
        }


def _jsonable(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return str(value)


class ConfigurationError(SteelFlexError):
    exit_code = 2


class InputFileError(SteelFlexError):
    exit_code = 3

    def __init__(self, message: str, path: Optional[str] = None, **details: Any):
        super().__init__(message, path=path, **details)
        self.path = path


class SolverError(SteelFlexError):
    """Backend failure or a non-optimal terminal status."""

    exit_code = 4

    def __init__(self, message: str, status: str = "error", window: Optional[int] = None, **details: Any):
        super().__init__(message, status=status, window=window, **details)
        self.status = status
        self.window = window


class DecodeMismatchError(SolverError):
    pass


class AuditError(SolverError):
    """Constraint replay found a residual above tolerance."""


class InfeasibleOrderError(SteelFlexError):
    exit_code = 5


class PacingInfeasibleError(SteelFlexError):
    exit_code = 5


class OrderShortfallError(SteelFlexError):
    exit_code = 5


# eaf_region
class EafRegionError(ConfigurationError):
    pass


class InfeasibleBoundsError(EafRegionError):
    pass


class SingularCoefficientError(EafRegionError):
    pass


class EmptyRegionError(EafRegionError):
    pass


# process_units
class InvalidCoefficientError(ConfigurationError):
    pass


class RoutingError(SteelFlexError):
    pass


class SiloOverflowError(RoutingError):
    pass


class SiloUnderflowError(RoutingError):
    pass


class StorageError(SteelFlexError):
    pass


class SimultaneousChargeDischargeError(StorageError):
    pass


class StorageBoundError(StorageError):
    pass


# rolling_engine / metrics
class DegenerateKernelError(SteelFlexError):
    pass


class LengthMismatchError(SteelFlexError):
    pass


class MissingUnitError(SteelFlexError):
    pass


# cli
class InternalError(SteelFlexError):
    """Unexpected exception that escaped a command, wrapped for the JSON error report."""
