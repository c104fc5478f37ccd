"""Exception hierarchy shared by every quantguard module."""


class QuantGuardError(Exception):
    """Base class for all errors raised by quantguard."""


class ShapeError(QuantGuardError, ValueError):
    pass


class DomainError(QuantGuardError, ValueError):
    pass


class IdxFormatError(QuantGuardError, ValueError):
    pass


class EmptyDatasetError(QuantGuardError, ValueError):
    pass


class CheckpointError(QuantGuardError, ValueError):
    pass


class ConfigError(QuantGuardError, ValueError):
    pass


class AttackError(QuantGuardError, ValueError):
    pass


class StaleCacheError(QuantGuardError, RuntimeError):
    pass


class DivergenceError(QuantGuardError, RuntimeError):
    """Non-finite loss or gradient; training cannot continue."""
