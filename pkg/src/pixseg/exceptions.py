"""Exception hierarchy shared across the package."""


class PixsegError(Exception):
    """Base class for all package errors."""


class DimensionError(PixsegError, ValueError):
    """Operand shapes do not conform for an operation."""


class NumericError(PixsegError, FloatingPointError):
    """An operation produced NaN or Inf."""


class ContractError(PixsegError, ValueError):
    """A precondition on arguments was violated."""


class FormatError(PixsegError, ValueError):
    """Serialized data (RLE, records, tensor files) is malformed."""


class GenerationError(PixsegError, RuntimeError):
    """Synthetic scene placement failed within the retry budget."""


class ScorerTransportError(PixsegError, ConnectionError):
    """The remote scorer could not be reached."""


class ScorerProtocolError(PixsegError, ValueError):
    """The remote scorer replied with a malformed payload."""


class ConfigError(PixsegError, ValueError):
    """A run configuration failed validation."""

    def __init__(self, message, fields=None):
        super().__init__(message)
        self.fields = dict(fields or {})
