"""User pairing for NOMA uplink with one-step successive interference cancellation."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ArgumentError,
    ConfigurationError,
    DegenerateChannelError,
    EnumerationLimitError,
    InfeasibleError,
    NomaPairError,
    NumericalError,
    OutputError,
)
