"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
anything else -> 4.
"""


class FilamentQCError(Exception):
    pass


class ConfigError(FilamentQCError):
    """Invalid configuration: bad keys, values, or missing required fields."""


class DataError(FilamentQCError):
    """Invalid input data: missing files, parse failures, schema violations."""


class InternalError(FilamentQCError):
    """A pipeline invariant failed; indicates a bug, not a user error."""
