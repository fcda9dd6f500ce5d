"""Small helpers around gmpy2 so the rest of the package never touches contexts directly."""

from __future__ import annotations

import math
from contextlib import contextmanager

import gmpy2
from gmpy2 import mpfr

DEFAULT_PRECISION = 256


@contextmanager
def precision(bits: int):
    """Run the enclosed block with a binary mantissa of ``bits`` bits."""
    with gmpy2.context(gmpy2.get_context(), precision=int(bits)):
        yield


def to_mpfr(value) -> mpfr:
    """Convert to mpfr at the active precision.

    Python floats go through ``repr`` so that ``0.1`` means the decimal 0.1
    rounded at working precision, not the nearest double.
    """
    if isinstance(value, float):
        if not math.isfinite(value):
            return mpfr(value)
        return mpfr(float.__repr__(value))
    if isinstance(value, (int, str)):
        return mpfr(value)
    return mpfr(value)


def digits_for(bits: int) -> int:
    """Decimal digits needed to round-trip a ``bits``-bit mantissa."""
    return int(math.ceil(bits * math.log10(2))) + 2


def to_decimal_string(value: mpfr, ndigits: int) -> str:
    """Scientific-notation decimal string with ``ndigits`` significant digits."""
    if gmpy2.is_zero(value):
        return "0"
    if not gmpy2.is_finite(value):
        return str(value)
    if not isinstance(value, type(mpfr(0))):
        value = mpfr(value)
    mant, exp, _ = value.digits(10, ndigits)
    sign = ""
    if mant.startswith("-"):
        sign, mant = "-", mant[1:]
    # digits() returns 0.d1d2... x 10^exp; shift to d1.d2... x 10^(exp-1)
    return f"{sign}{mant[0]}.{mant[1:]}e{exp - 1:+d}"
