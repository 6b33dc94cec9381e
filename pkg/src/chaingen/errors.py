"""Common exception base for the chaingen toolchain.

Every module defines its own error types next to the code that raises them;
they all inherit from ChainGenError so callers (and the CLI) can catch the
whole family with one except clause.
"""


class ChainGenError(Exception):
    """Base class for all chaingen errors."""


class ConfigError(ChainGenError):
    """Raised when a pipeline configuration file is missing, malformed,
    or references paths that do not resolve."""
