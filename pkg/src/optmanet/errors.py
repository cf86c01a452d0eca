"""Shared exception types.

Exit-code mapping in the CLI: ConfigError (and subclasses) -> 2, everything
else raised by the library -> 1.
"""


class OptmanetError(Exception):
    """Base class for all library errors."""


class ContractError(OptmanetError):
    """A caller violated a documented precondition (shape, mode, range)."""


class DomainError(OptmanetError):
    """A math-domain violation: division by exact zero, sqrt of a negative,
    a field evaluation point inside the source exclusion radius, and the like."""


class GradientError(OptmanetError):
    """A non-finite gradient or loss surfaced during training."""


class ConfigError(OptmanetError):
    """Invalid configuration content (bad JSON, missing keys, out-of-range values)."""


class ParseError(ConfigError):
    """A data file failed to parse; carries the 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
