"""Exception taxonomy.

ConfigError covers bad inputs (files, options); NumericalError covers
failures of the math (singular systems, divergence).  The CLI maps them
to exit codes 2 and 1 respectively.
"""


class RobustDseError(Exception):
    """Base class for all package errors."""


class ConfigError(RobustDseError):
    """Invalid configuration, file format, or missing input."""


class NumericalError(RobustDseError):
    """Numerical failure: singular system, divergence, degeneracy."""
