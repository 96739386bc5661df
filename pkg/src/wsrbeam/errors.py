"""Exception types shared across the package.

The CLI maps these onto process exit codes (2 = invalid arguments,
3 = numerical failure, 4 = I/O) and the HTTP service maps them onto
status codes, so solver code should raise these rather than bare
ValueError/RuntimeError.
"""


class InvalidArgumentError(ValueError):
    """Caller passed an argument outside the documented domain."""


class DegenerateInputError(InvalidArgumentError):
    """Input is structurally degenerate (e.g. an all-zero channel vector)."""


class NumericalFailureError(RuntimeError):
    """An iterative routine failed to converge or produced non-finite values."""


class DatasetFormatError(ValueError):
    """A dataset or model file could not be parsed.

    ``record_index`` is the zero-based index of the offending record,
    or -1 when the header itself is malformed.
    """

    def __init__(self, message, record_index=-1):
        super().__init__(message)
        self.record_index = record_index
