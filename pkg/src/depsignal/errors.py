class DepsignalError(Exception):
    """Base class for all package errors."""


class ConfigError(DepsignalError, ValueError):
    """Invalid configuration, lexicon or pattern file."""


class DataError(DepsignalError, ValueError):
    """Input data violates its schema or a documented invariant."""
