"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: InputDataError -> 2,
DegenerateStatisticError -> 3.
"""


class LocalmarkError(Exception):
    pass


class InputDataError(LocalmarkError):
    """Malformed or inconsistent input (files, geometry, patterns)."""


class DegenerateStatisticError(LocalmarkError):
    """A statistic is undefined for the given data (e.g. zero normalizer)."""
