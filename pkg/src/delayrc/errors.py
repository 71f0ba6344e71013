"""Exception hierarchy.

Validation problems (bad arguments, malformed files) derive from
``ValidationError`` and map to CLI exit code 1; numerical failures derive
from ``NumericalError`` and map to exit code 2.
"""


class DelayRCError(Exception):
    """Base class for all package errors."""


class ValidationError(DelayRCError, ValueError):
    """Invalid argument, shape mismatch or violated precondition."""


class FormatError(ValidationError):
    """Malformed or incompatible dataset/result/config file."""


class ConfigError(FormatError):
    """Experiment configuration failed validation.

    Attributes:
        line: 1-based line in the config file the problem was traced to,
            or None when it cannot be located.
    """

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
            if line is not None:
                where += f"{line}:"
            where += " "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class NumericalError(DelayRCError, ArithmeticError):
    """A computation produced an unusable result."""


class SingularSystemError(NumericalError):
    """Ridge normal equations are singular; use ridge_lambda > 0."""


class IntegrationError(NumericalError):
    """The Mackey-Glass integrator produced a non-finite state."""


class NarmaDivergenceError(NumericalError):
    """The NARMA10 recursion left its bounded band for this input seed."""

    def __init__(self, seed, step, value):
        self.seed = seed
        self.step = step
        self.value = value
        super().__init__(
            f"NARMA10 diverged for input seed {seed}: |q({step})| = {abs(value):.3g} > 10"
        )
