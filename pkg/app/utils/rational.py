"""Exact rationals and their ``"p/q"`` text form."""

from fractions import Fraction
from typing import Union

from app.core.exception import MarketInputError

RatLike = Union[Fraction, int, str]


def to_rat(value: RatLike) -> Fraction:
    """Parse ``"p/q"``, an integer string or an int into a Fraction.

    Floats are rejected; graph-market quantities must be exact.
    """
    if isinstance(value, bool):
        raise MarketInputError(f"not a rational: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            if "/" in text:
                num, den = text.split("/", 1)
                if int(den) == 0:
                    raise ZeroDivisionError
                return Fraction(int(num), int(den))
            return Fraction(int(text))
        except (ValueError, ZeroDivisionError):
            raise MarketInputError(f"malformed rational {value!r}; expected 'p/q'")
    raise MarketInputError(f"not a rational: {value!r}")


def format_rat(value: Fraction) -> str:
    """Canonical ``"p/q"`` (``"p"`` when integral)."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def harmonic(k: int) -> Fraction:
    return sum((Fraction(1, i) for i in range(1, k + 1)), Fraction(0))
