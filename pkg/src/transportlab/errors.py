"""Exception types shared across the laboratory modules."""


class TransportLabError(Exception):
    """Base class for all package-specific errors."""


class ResolutionError(TransportLabError):
    """A smoothing length or step size is too coarse for the grid."""


class DomainError(TransportLabError):
    """A requested region or point lies outside the admissible domain."""


class ConfigurationError(TransportLabError):
    """A configuration is internally inconsistent or incomplete."""


class UnknownDriftError(TransportLabError, LookupError):
    """A drift name does not resolve against the catalog."""


class UnsupportedDriftError(TransportLabError):
    """The drift lacks the data required by the requested operation."""


class ValidationError(TransportLabError):
    """An experiment configuration failed validation."""
