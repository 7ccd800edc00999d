"""Exception taxonomy shared across modules (CLI maps these to exit codes)."""


class DataError(Exception):
    """Bad input data: unreadable media, corrupt files, mode mismatches."""
