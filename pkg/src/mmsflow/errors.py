"""Exception types shared across the package."""


class GridMismatchError(ValueError):
    """Two grid functions do not live on the same sample grid."""


class ParameterError(ValueError):
    """A scalar parameter is outside its admissible range."""


class NumericalError(RuntimeError):
    """An iterative kernel failed (NaN/Inf, non-convergence)."""


class SolverError(RuntimeError):
    """An inner solver aborted; carries whatever diagnostics were collected."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class IngestError(ValueError):
    """A data file could not be parsed; carries the offending location."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column
