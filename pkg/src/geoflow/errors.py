"""Exception types raised by the numerical routines."""


class GeoflowError(Exception):
    """Base class for all package errors."""


class NumericalFailure(GeoflowError):
    """A computation reached a state the mathematics does not allow."""


class NotAG2Structure(NumericalFailure):
    """The 3-form does not induce a positive definite metric."""


class PositivityLost(NumericalFailure):
    """A warped-product profile (ell or G) became non-positive."""


class ExtinctError(NumericalFailure):
    """An Einstein-ray Ricci flow was queried past its extinction time."""


class BlowUp(NumericalFailure):
    """A trajectory left the bounded region the integrator watches."""


class ConfigError(GeoflowError):
    """A run configuration failed validation."""
