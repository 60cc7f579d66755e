"""Exception types shared across the package."""


class ParseError(ValueError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ResourceError(RuntimeError):
    """Slot, port, or transmission-module bookkeeping violation."""


class IntentError(ValueError):
    """Illegal intent operation (unknown id, wrong kind, bad arguments)."""


class GroomingCapacityError(IntentError):
    """Adding a demand to a lightpath would exceed its residual capacity."""


class CycleError(IntentError):
    """Edge insertion would make the intent graph cyclic."""


class ContractError(RuntimeError):
    """A function was invoked outside its documented preconditions."""


class InvariantError(RuntimeError):
    """Internal consistency broken; indicates a bug, not a blocked intent."""
