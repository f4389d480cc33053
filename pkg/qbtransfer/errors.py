"""Exceptions raised by the transfer model, propagators and runner."""


class TransferModelError(Exception):
    """Base exception for qbtransfer errors."""


class ConfigurationError(TransferModelError):
    """Raised when a system, schedule or run configuration is inconsistent."""


class PreconditionError(TransferModelError):
    """Raised when an operation is called outside its domain of validity."""


class UnsupportedByAnalyticError(TransferModelError):
    """Raised when a closed form does not cover the request; use a numeric method."""


class NotPiecewiseConstantError(TransferModelError):
    """Raised when exact segment propagation gets a profile without constant segments."""


class AccuracyError(TransferModelError):
    """Raised when integrator norm drift exceeds the accepted bound."""


class DimensionMismatchError(TransferModelError):
    """Raised when a state does not match the dimension of its model."""


class GridMismatchError(TransferModelError):
    """Raised when traces or propagated states do not line up with their time grid."""


class StateNormError(TransferModelError):
    """Raised when a state vector is not normalized."""


class TraceCheckError(TransferModelError):
    """Raised when a trace violates energy conservation or bounds."""
