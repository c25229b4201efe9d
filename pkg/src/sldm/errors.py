"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors exit 1, ``DataError`` exits 2,
``NumericError`` exits 3.
"""


class SldmError(Exception):
    """Base class for package errors."""


class DataError(SldmError):
    """Malformed or inconsistent input data (parse errors, bad graphs, splits)."""


class NumericError(SldmError):
    """Numerical failure during model evaluation or optimization."""


class SeriesTruncationWarning(UserWarning):
    """The 50-term Bessel series has not converged for some evaluation."""
