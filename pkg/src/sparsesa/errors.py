"""Exception hierarchy shared by every module."""


class SparseSAError(Exception):
    """Base class for all errors raised by sparsesa."""


class DimensionMismatch(SparseSAError, ValueError):
    pass


class RankDeficient(SparseSAError):
    """The Gram matrix of the selected columns is (numerically) singular."""


class DriftExceeded(SparseSAError):
    """Incrementally maintained RSS has drifted from a from-scratch solve."""


class DegenerateSupport(SparseSAError):
    """No pair flip exists (K = 0 or K = N)."""


class InitializationFailed(SparseSAError):
    pass


class TooLarge(SparseSAError):
    """Enumeration would exceed the configured cap on the number of supports."""


class LeverageSingular(SparseSAError):
    """A leverage value is too close to one for the closed-form LOO residual."""


class ParseError(SparseSAError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class NonNumericCell(ParseError):
    pass


class EmptyData(ParseError):
    pass
