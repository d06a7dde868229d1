"""Exception hierarchy shared across the pipeline stages."""


class FlowError(Exception):
    """Base class for all cryptoflow errors."""


class DataError(FlowError):
    """Malformed or inconsistent input data."""


class RecordError(DataError):
    """A single transfer record failed to parse or validate.

    Carries enough context (row number, tx id) to locate the offending
    record in the source file.
    """

    def __init__(self, message, *, row=None, tx_id=None):
        self.row = row
        self.tx_id = tx_id
        prefix = []
        if row is not None:
            prefix.append(f"row {row}")
        if tx_id is not None:
            prefix.append(f"tx {tx_id}")
        if prefix:
            message = f"{', '.join(prefix)}: {message}"
        super().__init__(message)


class NumericError(FlowError):
    """A numerical routine failed to converge or produced invalid output."""
