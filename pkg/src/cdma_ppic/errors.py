"""Exception types shared across the simulator."""


class SimulationError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SimulationError, ValueError):
    """Inputs disagree on user count or code length, or a size is zero."""


class DomainError(SimulationError, ValueError):
    """A scalar argument lies outside its documented domain."""


class UndefinedAngleError(DomainError):
    """The angle of a zero weight was requested."""


class ConfigurationError(SimulationError, ValueError):
    """An experiment or scenario configuration is inconsistent."""


class NumericError(SimulationError, ArithmeticError):
    """A numeric quantity became non-finite during a recursion."""
