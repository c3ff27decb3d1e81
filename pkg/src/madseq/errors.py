"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes, so raising the right class matters:
ConfigurationError -> usage (1), DataError -> bad input data (2),
NumericalError -> runtime numerical failure (3).
"""


class MadseqError(Exception):
    """Base class for all package errors."""


class ConfigurationError(MadseqError):
    """Invalid spec, config, or argument combination."""


class DataError(MadseqError):
    """Malformed or out-of-range input data."""


class NumericalError(MadseqError):
    """Numerical failure at run time (non-convergence, empty slice, ...)."""
