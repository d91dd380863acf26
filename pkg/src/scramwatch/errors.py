"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes (config/usage -> 1, data -> 2), so new
error conditions should subclass one of the two roots rather than raising
bare exceptions.
"""


class ConfigError(ValueError):
    """Invalid configuration: bad profile field, unknown key, out-of-range option."""


class DataError(ValueError):
    """Invalid or inconsistent data: malformed CSV, bounds violations, shape mismatches."""


class CheckpointError(DataError):
    """Unreadable model checkpoint: bad magic, unsupported version, truncated payload."""
