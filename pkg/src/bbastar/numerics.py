from __future__ import annotations

from decimal import Decimal
from fractions import Fraction

from .errors import ProbabilityError

ONE = Fraction(1)


def as_fraction(x: int | float | str | Fraction | Decimal) -> Fraction:
    """
    Exact rational from user input.

    Floats go through their shortest repr so that 0.7424 means 7424/10000, not the
    nearest binary double.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise ProbabilityError(f"not a number: {x!r}")
    if isinstance(x, float):
        return Fraction(repr(x))
    try:
        return Fraction(x)
    except (ValueError, ZeroDivisionError, TypeError) as e:
        raise ProbabilityError(f"not a number: {x!r}") from e


def probability(x: int | float | str | Fraction, *, allow_zero: bool = False) -> Fraction:
    p = as_fraction(x)
    lo_ok = p >= 0 if allow_zero else p > 0
    if not (lo_ok and p <= 1):
        rng = "[0,1]" if allow_zero else "(0,1]"
        raise ProbabilityError(f"probability {x!r} outside {rng}")
    return p


def _decimal_places(den: int) -> int | None:
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return None
    return max(twos, fives)


def render_fraction(x: Fraction) -> str:
    """
    Text form used in labels and `.aut` files.

    Always contains "." or "/" so it never reads back as an integer:
    1 -> "1.0", 7424/10000 -> "0.7424", 1/3 -> "1/3".
    """
    places = _decimal_places(x.denominator)
    if places is None:
        return f"{x.numerator}/{x.denominator}"
    if places == 0:
        return f"{x.numerator}.0"
    sign = "-" if x < 0 else ""
    scaled = abs(x.numerator) * (10**places // x.denominator)
    whole, frac = divmod(scaled, 10**places)
    return f"{sign}{whole}.{frac:0{places}d}"


def parse_value(token: str) -> int | Fraction:
    t = token.strip()
    if "." in t or "/" in t:
        return Fraction(t)
    return int(t)


def p_h(h: int | float | str | Fraction) -> Fraction:
    """Probability that the graded phase succeeds for honest money fraction h: h^2 (1 + h - h^2)."""
    h = probability(h, allow_zero=True)
    return h * h * (1 + h - h * h)


def p_v(c: int, n: int) -> Fraction:
    """Per-step committee selection probability c/n."""
    if isinstance(c, bool) or isinstance(n, bool) or not (1 <= c <= n):
        raise ProbabilityError(f"p_v needs 1 <= c <= n, got c={c!r}, n={n!r}")
    return Fraction(int(c), int(n))
