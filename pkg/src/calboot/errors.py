"""Exception types raised across the package."""


class CalbootError(Exception):
    """Base class for computational failures (as opposed to usage errors)."""


class SingularDesign(CalbootError):
    """The cross-product matrix failed the relative pivot test."""


class LeverageOne(CalbootError):
    """A leverage-weighted sandwich variant met a row with leverage ~1."""


class EmptySample(CalbootError, ValueError):
    pass


class TooManyDegenerateResamples(CalbootError):
    """A resample slot stayed degenerate after ``max_redraws`` retries."""


class NonFiniteEstimand(CalbootError):
    pass


class ParseError(CalbootError):
    """Input table could not be read; carries the 1-based row/column."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.row = row
        self.column = column
