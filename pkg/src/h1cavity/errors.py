"""Exception hierarchy shared by all modules."""


class H1CavityError(Exception):
    """Base class for all package errors."""


class ConfigurationError(H1CavityError, ValueError):
    """Invalid user input: design parameters, resolution, sweep plan, config file."""


class NumericalError(H1CavityError, RuntimeError):
    """A computation produced a result that cannot be trusted (NaN, bad fit, ...)."""


class ProbeNodeError(NumericalError):
    """The ring-down probe sits on a nodal point of the mode."""


class MultiModeError(NumericalError):
    """The ring-down signal is not a single damped sinusoid."""


class NormalizationError(NumericalError):
    """Power bookkeeping is inconsistent (e.g. collection efficiency above 1/2)."""


class OutOfRangeError(H1CavityError, ValueError):
    """A query point lies outside the region where data was recorded."""
