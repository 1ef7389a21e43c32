"""Depression-signal detection and monitoring for tweet corpora."""

from .errors import ConfigError, DataError, DepsignalError

__all__ = ["ConfigError", "DataError", "DepsignalError"]
