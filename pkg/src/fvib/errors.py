"""Exception hierarchy shared across the package."""


class FvibError(Exception):
    """Base class for all package errors."""


class ConfigError(FvibError, ValueError):
    """Invalid configuration. ``problems`` lists every offending key."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DataError(FvibError, ValueError):
    """Malformed or unusable input data."""


class ShapeError(FvibError, ValueError):
    pass


class DomainError(FvibError, ValueError):
    """A scalar argument lies outside its admissible range."""


class EmptyInputError(FvibError, ValueError):
    pass


class NumericError(FvibError, ArithmeticError):
    """An iterative numerical routine failed to converge."""

    def __init__(self, message, iterations=None):
        self.iterations = iterations
        if iterations is not None:
            message = f"{message} (after {iterations} iterations)"
        super().__init__(message)


class StateError(FvibError, RuntimeError):
    pass
