"""Exception hierarchy shared by the library and the command line."""

EXIT_OK = 0
EXIT_IO = 1
EXIT_ARGUMENT = 2
EXIT_CAPACITY = 3


class UQError(Exception):
    """Base class for all uqising errors."""


class InvalidArgumentError(UQError, ValueError):
    """An argument violates an operation's precondition."""


class CapacityError(UQError):
    """A register or enumeration exceeds the configured size guard."""

    def __init__(self, what: str, size: int, guard: int):
        super().__init__(f"{what} of size {size} exceeds guard {guard}")
        self.size = size
        self.guard = guard


class DegenerateInstanceError(UQError, ValueError):
    """The instance has no usable energy scale (all-zero weights or flat spectrum)."""


class ZeroGradientError(UQError, ArithmeticError):
    """Normalized gradient descent hit a gradient with vanishing norm."""

    def __init__(self, norm: float):
        super().__init__(f"gradient norm {norm:.3e} below tolerance")
        self.norm = norm


class PersistenceError(UQError, OSError):
    """Writing results failed; the records computed so far are kept."""

    def __init__(self, message: str, records: list):
        super().__init__(message)
        self.records = records


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the command line exit code."""
    if isinstance(exc, CapacityError):
        return EXIT_CAPACITY
    if isinstance(exc, (InvalidArgumentError, DegenerateInstanceError)):
        return EXIT_ARGUMENT
    # OSError, PersistenceError and anything unexpected
    return EXIT_IO
