"""Exception types shared across the package."""


class BispeckleError(Exception):
    """Base class for all package errors."""


class ParameterError(BispeckleError, ValueError):
    """A function argument violates its contract (bad grid size, negative pitch, ...)."""


class ConfigError(BispeckleError, ValueError):
    """An experiment config file is malformed or inconsistent."""


class CalibrationError(BispeckleError, ValueError):
    """Source/camera calibration is inconsistent (e.g. large negative intensity mass)."""


class EstimationError(BispeckleError, RuntimeError):
    """A statistical estimator cannot produce a reliable value from its input."""
