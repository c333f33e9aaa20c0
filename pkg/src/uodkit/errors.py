"""Exception hierarchy. Each class maps onto one CLI exit code / HTTP error kind."""


class UodError(Exception):
    """Base class for all toolkit errors."""

    kind = "data"


class FormatError(UodError):
    """Malformed file or wire payload (bad magic, bad header, wrong structure)."""

    kind = "format"


class DataError(UodError):
    """Structurally valid input with illegal content (non-finite values, bad dims)."""

    kind = "data"


class DegenerateEmbeddingError(DataError):
    """An embedding row has (numerically) zero norm."""

    def __init__(self, row: int):
        super().__init__(f"embedding row {row} has zero norm")
        self.row = row


class ConvergenceError(UodError):
    """An iterative numerical routine failed to reach its tolerance."""

    kind = "convergence"

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class HarnessError(UodError):
    """Evaluation harness misuse: unmatched stems, mismatched image sets."""

    kind = "data"
