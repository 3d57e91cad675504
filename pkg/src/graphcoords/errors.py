class NumericalError(ArithmeticError):
    """SVD non-convergence, non-finite loss, and similar numerical failures."""


class DataError(ValueError):
    """Inputs that are well-formed but inconsistent (row counts, labels, ids)."""
