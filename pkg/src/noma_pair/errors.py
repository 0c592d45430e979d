"""Exception hierarchy shared by all modules.

The CLI maps these onto process exit codes (configuration 2, numerical 3,
I/O 4).
"""


class NomaPairError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(NomaPairError, ValueError):
    """Invalid scenario or experiment configuration.

    ``field`` names the offending configuration key when it is known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ArgumentError(NomaPairError, ValueError):
    """An argument violates the precondition of an operation."""


class InfeasibleError(NomaPairError, ValueError):
    """The requested target cannot be met (e.g. a positive rate over a zero gain)."""


class DegenerateChannelError(NomaPairError, ValueError):
    """A channel matrix is identically zero where a direction is needed."""


class NumericalError(NomaPairError, ArithmeticError):
    """Ill-conditioning or non-convergence in a numerical routine."""

    def __init__(self, message, achieved_tolerance=None):
        super().__init__(message)
        self.achieved_tolerance = achieved_tolerance


class EnumerationLimitError(NomaPairError, ValueError):
    """Exhaustive search refused because the instance is too large."""


class OutputError(NomaPairError, OSError):
    """A result table could not be written or read."""
