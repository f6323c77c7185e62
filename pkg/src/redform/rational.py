"""Exact rational parsing and formatting.

Everything in this package is computed over arbitrary-precision rationals;
decimal literals in input files are converted exactly (digits to fraction),
never through binary floating point.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import ValidationError


def parse_rational(value) -> Fraction:
    """Parse a rational from "p/q", a decimal literal string, an int, or a Fraction.

    Floats are rejected: a float has already lost the decimal literal.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        raise ValidationError(
            f"refusing binary float {value!r}; write it as a string literal"
        )
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"cannot parse rational {value!r}: {exc}") from exc
    raise ValidationError(f"cannot parse rational from {type(value).__name__}")


def rat_str(x: Fraction) -> str:
    """Canonical "p/q" string ("p" when the denominator is 1)."""
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def bit_length(x: Fraction) -> int:
    """Max bit length of numerator and denominator (0 counts as one bit)."""
    num = abs(x.numerator)
    return max(num.bit_length() if num else 1, x.denominator.bit_length())
