"""Exact valuation exponents.

Absolute values in this package live in the discrete value group q**E with E a
rational exponent (integral except inside the ramified extension), plus the
value 0.  We represent |x| by its exponent: a Fraction/int, or NEG_INF for the
zero element.  NEG_INF absorbs addition (products with 0 are 0) and compares
below every rational.  No floating point anywhere.
"""

from __future__ import annotations

from fractions import Fraction


class PrecisionInsufficient(ArithmeticError):
    """A quantity's leading behaviour is not certified by the tracked precision.

    ``bound_exp`` when present is a certified exponent bound: the uncertified
    quantity has absolute value <= q**bound_exp.
    """

    def __init__(self, msg: str, bound_exp=None):
        super().__init__(msg)
        self.bound_exp = bound_exp


class _NegInf:
    """Singleton exponent of |0|; totally ordered below every rational."""

    __slots__ = ()

    def __lt__(self, other):
        return not isinstance(other, _NegInf)

    def __le__(self, other):
        return True

    def __gt__(self, other):
        return False

    def __ge__(self, other):
        return isinstance(other, _NegInf)

    def __eq__(self, other):
        return isinstance(other, _NegInf)

    def __hash__(self):
        return hash("laurentlab.NEG_INF")

    def __add__(self, other):
        return self

    __radd__ = __add__

    def __neg__(self):
        raise ArithmeticError("cannot negate NEG_INF (no inverse of zero)")

    def __mul__(self, other):
        # exponent scaling |x|**k with k > 0 only; 0**k = 0
        if isinstance(other, _NegInf) or other <= 0:
            raise ArithmeticError("NEG_INF scales by positive factors only")
        return self

    __rmul__ = __mul__

    def __repr__(self):
        return "NEG_INF"


NEG_INF = _NegInf()

#: An exponent: Fraction | int | NEG_INF.
Exp = object


def exp_max(*exps):
    best = NEG_INF
    for e in exps:
        if best < e:
            best = e
    return best


def is_neg_inf(e) -> bool:
    return isinstance(e, _NegInf)


def as_fraction(e) -> Fraction:
    if is_neg_inf(e):
        raise ArithmeticError("NEG_INF has no finite value")
    return Fraction(e)
