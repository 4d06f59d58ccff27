"""Exception hierarchy shared by every module."""


class QReduceError(Exception):
    """Base class for all library errors."""


class InvalidOperator(QReduceError, ValueError):
    """An operator violates the invariant of its declared type."""


class DimensionError(QReduceError, ValueError):
    pass


class InconsistentAction(QReduceError):
    """A state-update rule on density operators admits no linear extension."""


class NotCP(QReduceError):
    def __init__(self, message: str, min_eigenvalue: float = float("nan")):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class NotCompatible(QReduceError):
    """A distribution or channel is not compatible with the given observable."""


class DegenerateObservable(QReduceError):
    pass


class CountMismatch(QReduceError, ValueError):
    pass


class NotIsometry(QReduceError, ValueError):
    pass


class ZeroProbability(QReduceError):
    """Conditioning on an event of (numerically) zero probability."""


class ParseError(QReduceError):
    """Malformed serialized input."""
