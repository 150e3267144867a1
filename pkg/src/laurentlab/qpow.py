"""Exactly comparable constants of the form m * q**e (m rational >= 0, e rational).

Every constant that the verification inequalities compare — measures, the
estimate bounds, rho, the nondivergence right-hand sides — is of this shape.
Two such values compare exactly by clearing the exponent denominator:
m1*q^e1 <= m2*q^e2  iff  (m1/m2)**b <= q**a with e2-e1 = a/b.  Products,
quotients and integer powers stay in the class; rational powers stay in it
when the rational part has an exact root, and otherwise certified Fraction
bounds are available through integer k-th roots.  No floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .exponents import NEG_INF, is_neg_inf


def iroot(n: int, k: int) -> int:
    """floor(n ** (1/k)) for n >= 0, k >= 1, by Newton iteration on integers."""
    if n < 0:
        raise ValueError("iroot of negative")
    if n == 0:
        return 0
    if k == 1:
        return n
    x = 1 << (n.bit_length() // k + 1)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            return x
        x = y


def nth_root_bounds(x: Fraction, k: int, scale_bits: int = 64):
    """(lo, hi) Fractions with lo <= x**(1/k) <= hi, gap ~ 2**-scale_bits."""
    if x < 0:
        raise ValueError("root of negative")
    if x == 0:
        return Fraction(0), Fraction(0)
    S = 1 << (scale_bits * k)
    num = x.numerator * S
    den = x.denominator
    lo_i = iroot(num // den, k)
    hi_i = lo_i + 1
    scale = 1 << scale_bits
    return Fraction(lo_i, scale), Fraction(hi_i, scale)


@dataclass(frozen=True)
class QPow:
    """m * q**e with m a nonnegative Fraction and e a Fraction exponent."""

    q: int
    m: Fraction
    e: Fraction

    @staticmethod
    def make(q: int, m, e=0) -> "QPow":
        m = Fraction(m)
        if m < 0:
            raise ValueError("QPow magnitude must be >= 0")
        if m == 0:
            return QPow(q, Fraction(0), Fraction(0))
        return QPow(q, m, Fraction(e))

    @staticmethod
    def from_exp(q: int, e) -> "QPow":
        """q**e from an exponent; NEG_INF maps to 0."""
        if is_neg_inf(e):
            return QPow.make(q, 0)
        return QPow.make(q, 1, Fraction(e))

    @staticmethod
    def zero(q: int) -> "QPow":
        return QPow.make(q, 0)

    @property
    def is_zero(self) -> bool:
        return self.m == 0

    def _cmp(self, other: "QPow") -> int:
        if self.q != other.q:
            raise ValueError("comparing QPow values over different q")
        if self.is_zero or other.is_zero:
            a = (self.m > 0) - (other.m > 0)
            return a
        d = other.e - self.e  # compare m1 vs m2 * q**d
        b = d.denominator
        lhs = (self.m / other.m) ** b
        rhs = Fraction(self.q) ** d.numerator
        return (lhs > rhs) - (lhs < rhs)

    def __le__(self, other):
        return self._cmp(self._coerce(other)) <= 0

    def __lt__(self, other):
        return self._cmp(self._coerce(other)) < 0

    def __ge__(self, other):
        return self._cmp(self._coerce(other)) >= 0

    def __gt__(self, other):
        return self._cmp(self._coerce(other)) > 0

    def __eq__(self, other):
        if not isinstance(other, (QPow, int, Fraction)):
            return NotImplemented
        return self._cmp(self._coerce(other)) == 0

    def __hash__(self):
        lo, hi = self.bounds(32)
        return hash((self.q, lo, hi))

    def _coerce(self, other) -> "QPow":
        if isinstance(other, QPow):
            return other
        return QPow.make(self.q, Fraction(other))

    def __mul__(self, other) -> "QPow":
        o = self._coerce(other)
        if self.is_zero or o.is_zero:
            return QPow.zero(self.q)
        return QPow.make(self.q, self.m * o.m, self.e + o.e)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "QPow":
        o = self._coerce(other)
        if o.is_zero:
            raise ZeroDivisionError
        if self.is_zero:
            return self
        return QPow.make(self.q, self.m / o.m, self.e - o.e)

    def pow_int(self, k: int) -> "QPow":
        if self.is_zero:
            if k <= 0:
                raise ZeroDivisionError
            return self
        return QPow.make(self.q, self.m ** k, self.e * k)

    def pow_frac(self, r) -> "QPow":
        """self**r for rational r; exact only (raises if m has no exact root)."""
        r = Fraction(r)
        if self.is_zero:
            if r <= 0:
                raise ZeroDivisionError
            return self
        k = r.denominator
        mr = _exact_root(self.m, k)
        if mr is None:
            raise ValueError(f"{self.m} has no exact {k}-th root; use bounds()")
        return QPow.make(self.q, mr ** r.numerator, self.e * r)

    def bounds(self, scale_bits: int = 64):
        """Certified (lo, hi) Fractions with lo <= value <= hi."""
        if self.is_zero:
            return Fraction(0), Fraction(0)
        b = self.e.denominator
        lo_r, hi_r = nth_root_bounds(Fraction(self.q) ** self.e.numerator, b, scale_bits)
        return self.m * lo_r, self.m * hi_r

    def upper(self, scale_bits: int = 64) -> Fraction:
        return self.bounds(scale_bits)[1]

    def lower(self, scale_bits: int = 64) -> Fraction:
        return self.bounds(scale_bits)[0]

    def as_fraction(self) -> Fraction:
        if self.is_zero:
            return Fraction(0)
        if self.e.denominator != 1:
            raise ValueError("fractional exponent; not a rational value")
        return self.m * Fraction(self.q) ** self.e.numerator

    def __repr__(self):
        if self.is_zero:
            return "QPow(0)"
        return f"QPow({self.m} * {self.q}^{self.e})"


def _exact_root(x: Fraction, k: int):
    if k == 1:
        return x
    rn = iroot(x.numerator, k)
    rd = iroot(x.denominator, k)
    if rn ** k == x.numerator and rd ** k == x.denominator:
        return Fraction(rn, rd)
    return None


def qpow_min(*vals: QPow) -> QPow:
    best = vals[0]
    for v in vals[1:]:
        if v < best:
            best = v
    return best
