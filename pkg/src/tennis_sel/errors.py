"""Exception hierarchy shared across the package."""


class SelError(Exception):
    """Base class for all package errors."""


class ConfigError(SelError, ValueError):
    """Invalid parameters or option combinations."""


class DataError(SelError, ValueError):
    """Input data violates the match-record contract."""


class ParseError(DataError):
    """A CSV row could not be parsed.

    Parameters
    ----------
    line : int
        1-based line number in the source text (header is line 1).
    message : str
        What went wrong.
    """

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class DuplicateRecordError(DataError):
    """Two rows share (tournament_id, player1_id, player2_id, date)."""


class OrderingError(DataError):
    """Tournament blocks are interleaved or not chronological."""


class InvalidMatchError(DataError):
    """A match pairs a player with themself."""


class InsufficientDataError(DataError):
    """Too few tournaments or rows for the requested procedure."""


class NumericalError(SelError, ArithmeticError):
    """A fit failed numerically."""


class SingularDesignError(NumericalError):
    """The (penalized) weighted design matrix is rank deficient."""

    def __init__(self, message, term=None):
        self.term = term
        super().__init__(message)
