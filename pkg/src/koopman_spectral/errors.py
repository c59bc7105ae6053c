"""Exception hierarchy shared by all modules."""


class KoopmanError(Exception):
    """Base class for errors raised by this package."""


class InputError(KoopmanError, ValueError):
    """Malformed or inconsistent input (dimensions, ranges, empty data)."""


class ParseError(InputError):
    """A dataset or config file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(InputError):
    """An experiment config field is missing or invalid."""

    def __init__(self, field, message):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


class NumericError(KoopmanError, ArithmeticError):
    """A numerical routine failed (non-convergence, ill-posed fit)."""


class IntegrationDiverged(NumericError):
    """Non-finite state produced by the ODE integrator."""

    def __init__(self, step, time):
        super().__init__(f"integration diverged at step {step} (t={time:.6g})")
        self.step = step
        self.time = time


class DivergedScale(NumericError):
    """exp(2 * alpha * interval) left the floating-point range."""
