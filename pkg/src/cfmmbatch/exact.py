"""Exact-arithmetic helpers."""

from __future__ import annotations

from fractions import Fraction


def to_fraction(x, max_den: int = 10**12) -> Fraction:
    """The simplest rational that rounds to the float ``x`` (so 1/6 given as
    0.1666... comes back as 1/6); the float's exact value if none is simpler."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    x = float(x)
    exact = Fraction(x)
    simple = exact.limit_denominator(max_den)
    return simple if float(simple) == x else exact
