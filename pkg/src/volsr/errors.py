"""Exception types shared across the package.

CLI exit-code mapping: UsageError -> 2, everything else -> 1.
"""


class UsageError(Exception):
    """Caller passed arguments that violate an operation's contract."""


class FormatError(Exception):
    """A file on disk does not match its declared format."""


class DataError(Exception):
    """File parsed fine but the payload values are unusable (NaN, bad range)."""
