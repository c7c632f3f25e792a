"""Exception hierarchy shared across the package."""


class TDPError(Exception):
    """Base class for all errors raised by tdpnet."""


class DimensionError(TDPError, ValueError):
    """Tensor shape or length does not satisfy an operation's precondition."""


class ParameterError(TDPError, ValueError):
    """A scalar parameter is outside its allowed range."""


class WeightError(TDPError, ValueError):
    """Weights are missing or do not match the network description."""


class FormatError(TDPError, ValueError):
    """A file or encoded payload is malformed."""


class StateError(TDPError, RuntimeError):
    """An object was used before it was initialised."""


class UnsupportedArchitectureError(TDPError, ValueError):
    """The network cannot be executed with time-distributed processing."""


class InsufficientDataError(TDPError, ValueError):
    """Not enough samples to compute a statistic."""


class UndefinedMetricError(TDPError, ZeroDivisionError):
    """A metric or estimate is undefined for the given inputs."""
