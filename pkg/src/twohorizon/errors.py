"""Exception types shared across the package."""


class TwoHorizonError(Exception):
    """Base class for all package errors."""


class DataError(TwoHorizonError):
    """Malformed input data: bad CSV cell, schema mismatch, domain violation."""


class NumericalError(TwoHorizonError):
    """Non-finite values or a numerically impossible request."""
