"""Exception types raised by the rfrsabr package."""

from typing import List, Optional, Sequence


class RfrSabrError(ValueError):
    """Base class for all library errors."""


class DomainError(RfrSabrError):
    """An input lies outside the domain of an operation."""


class PriceBoundsError(DomainError):
    """A price lies outside the Black no-arbitrage bracket."""

    def __init__(self, price: float, lower: float, upper: float, message: Optional[str] = None):
        self.price = price
        self.lower = lower
        self.upper = upper
        super().__init__(message or f"price {price!r} outside the open bracket ({lower!r}, {upper!r})")


class QuadratureError(RfrSabrError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        self.achieved = achieved
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")


class CalibrationError(RfrSabrError):
    """A calibration could not be carried out."""


class BracketError(CalibrationError):
    """A quote lies outside the price range attainable by the model."""

    def __init__(self, quote: float, low: float, high: float):
        self.quote = quote
        self.low = low
        self.high = high
        super().__init__(
            f"quote {quote:.10g} outside attainable range [{low:.10g}, {high:.10g}]"
        )


class ConfigError(RfrSabrError):
    """A run configuration is invalid."""

    def __init__(self, messages: Sequence[str]):
        self.messages: List[str] = list(messages)
        super().__init__("; ".join(self.messages))


class QuoteFileError(ConfigError):
    """A quote file violates its schema."""

    def __init__(self, messages: Sequence[str], rows: Sequence[int] = ()):
        self.rows: List[int] = list(rows)
        super().__init__(messages)
