"""The field tower F_q -> F_q[T] -> F_q((1/T)) -> ramified monomials.

``Poly`` is the polynomial ring over F_q (the integer lattice of the theory,
discrete in the Laurent field).  ``Laurent`` is a formal series in 1/T with a
certified leading term and explicit big-O precision tracking: all coefficients
at exponents >= ``prec`` are known, everything below is unknown, and any
operation whose leading behaviour cannot be certified raises
``PrecisionInsufficient`` instead of silently truncating.  ``prec is None``
means the element is exact (a finite Laurent sum known completely).

``ScaledSeries`` is T**v * (Laurent) with v in (1/N)Z for a fixed ramification
index N; this monomial-graded form is all of the ramified extension the flow
computations ever need, since the diagonal flow entries are fractional
monomials.

Absolute values are exponents: |x| = q**deg(x), see ``exponents``.  All
arithmetic is exact over F_q and Fractions; no floats.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .exponents import NEG_INF, Exp, PrecisionInsufficient, is_neg_inf
from .fq import ConfigError, Fq


# ---------------------------------------------------------------------------
# Polynomials over F_q (lowest degree first, no high-end zero padding)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Poly:
    """Element of F_q[T]; ``coeffs`` lowest-first with nonzero top coefficient."""

    field: Fq
    coeffs: tuple = ()

    @staticmethod
    def make(field: Fq, coeffs) -> "Poly":
        cs = [field.elem(c) if not isinstance(c, tuple) else c for c in coeffs]
        while cs and field.is_zero(cs[-1]):
            cs.pop()
        return Poly(field, tuple(cs))

    @staticmethod
    def zero(field: Fq) -> "Poly":
        return Poly(field, ())

    @staticmethod
    def one(field: Fq) -> "Poly":
        return Poly(field, (field.one,))

    @staticmethod
    def T(field: Fq) -> "Poly":
        return Poly(field, (field.zero, field.one))

    @staticmethod
    def from_ints(field: Fq, ints) -> "Poly":
        return Poly.make(field, [field.elem(i) for i in ints])

    @property
    def degree(self) -> Exp:
        return len(self.coeffs) - 1 if self.coeffs else NEG_INF

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def is_unit(self) -> bool:
        return len(self.coeffs) == 1

    def coeff(self, k: int):
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        return self.field.zero

    def __add__(self, other: "Poly") -> "Poly":
        f = self.field
        n = max(len(self.coeffs), len(other.coeffs))
        return Poly.make(f, [f.add(self.coeff(k), other.coeff(k)) for k in range(n)])

    def __neg__(self) -> "Poly":
        f = self.field
        return Poly(f, tuple(f.neg(c) for c in self.coeffs))

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        f = self.field
        if self.is_zero or other.is_zero:
            return Poly.zero(f)
        out = [f.zero] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if f.is_zero(a):
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] = f.add(out[i + j], f.mul(a, b))
        return Poly.make(f, out)

    def scale(self, c) -> "Poly":
        f = self.field
        return Poly.make(f, [f.mul(c, a) for a in self.coeffs])

    def shift(self, k: int) -> "Poly":
        """Multiply by T**k, k >= 0."""
        if self.is_zero:
            return self
        return Poly(self.field, (self.field.zero,) * k + self.coeffs)

    def divmod(self, other: "Poly"):
        if other.is_zero:
            raise ZeroDivisionError("polynomial division by zero")
        f = self.field
        inv_lead = f.inv(other.coeffs[-1])
        rem = list(self.coeffs)
        dq = len(rem) - len(other.coeffs)
        quo = [f.zero] * (dq + 1 if dq >= 0 else 0)
        while len(rem) >= len(other.coeffs) and rem:
            if f.is_zero(rem[-1]):
                rem.pop()
                continue
            c = f.mul(rem[-1], inv_lead)
            s = len(rem) - len(other.coeffs)
            quo[s] = c
            for j, b in enumerate(other.coeffs):
                rem[s + j] = f.sub(rem[s + j], f.mul(c, b))
            rem.pop()
        return Poly.make(f, quo), Poly.make(f, rem)

    def __mod__(self, other: "Poly") -> "Poly":
        return self.divmod(other)[1]

    def __floordiv__(self, other: "Poly") -> "Poly":
        return self.divmod(other)[0]

    def monic(self) -> "Poly":
        if self.is_zero:
            return self
        return self.scale(self.field.inv(self.coeffs[-1]))

    def gcd(self, other: "Poly") -> "Poly":
        a, b = self, other
        while not b.is_zero:
            a, b = b, a % b
        return a.monic()

    def sort_key(self):
        return (len(self.coeffs), self.coeffs)

    def __repr__(self):
        return f"Poly({format_poly(self)})"


def poly_content(polys) -> Poly:
    """gcd of a family of polynomials (monic; zero if all are zero)."""
    polys = list(polys)
    g = Poly.zero(polys[0].field)
    for p in polys:
        g = g.gcd(p)
    return g


def all_polys(field: Fq, max_deg: int, include_zero: bool = True):
    """All polynomials of degree <= max_deg in deterministic order."""
    import itertools

    for idx in itertools.product(range(field.q), repeat=max_deg + 1):
        p = Poly.make(field, [field.from_index(k) for k in idx])
        if p.is_zero and not include_zero:
            continue
        yield p


def monic_polys(field: Fq, deg: int):
    import itertools

    for idx in itertools.product(range(field.q), repeat=deg):
        yield Poly(field, tuple(field.from_index(k) for k in idx) + (field.one,))


# ---------------------------------------------------------------------------
# Laurent series in 1/T with certified leading term
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Laurent:
    """Series sum_{k <= lead} c_k T**k, coefficients stored from ``lead`` down.

    Known exponent range is [prec, lead] (prec None: exact, all lower
    coefficients are zero).  When no known coefficient is nonzero and the
    element is inexact, ``coeffs`` is empty and ``lead`` = prec - 1.
    Construct through ``make``/the named constructors, which normalize.
    """

    field: Fq
    lead: int
    coeffs: tuple
    prec: int | None = None

    @staticmethod
    def make(field: Fq, lead: int, coeffs, prec: int | None = None) -> "Laurent":
        cs = [c if isinstance(c, tuple) else field.elem(c) for c in coeffs]
        if prec is not None:
            # clip below precision
            keep = lead - prec + 1
            cs = cs[:keep] if keep > 0 else []
        while cs and field.is_zero(cs[0]):
            cs.pop(0)
            lead -= 1
        if prec is None:
            while cs and field.is_zero(cs[-1]):
                cs.pop()
            if not cs:
                return Laurent(field, 0, (), None)
            return Laurent(field, lead, tuple(cs), None)
        if not cs:
            return Laurent(field, prec - 1, (), prec)
        # pad the known range down to prec with zeros
        want = lead - prec + 1
        cs = cs + [field.zero] * (want - len(cs))
        return Laurent(field, lead, tuple(cs), prec)

    # -- constructors --

    @staticmethod
    def zero(field: Fq) -> "Laurent":
        return Laurent(field, 0, (), None)

    @staticmethod
    def monomial(field: Fq, k: int, c=None) -> "Laurent":
        c = field.one if c is None else field.elem(c)
        if field.is_zero(c):
            return Laurent.zero(field)
        return Laurent(field, k, (c,), None)

    @staticmethod
    def one(field: Fq) -> "Laurent":
        return Laurent.monomial(field, 0)

    @staticmethod
    def from_poly(p: Poly) -> "Laurent":
        if p.is_zero:
            return Laurent.zero(p.field)
        return Laurent.make(p.field, len(p.coeffs) - 1, tuple(reversed(p.coeffs)), None)

    @staticmethod
    def big_o(field: Fq, prec: int) -> "Laurent":
        """The pure error term: all exponents < prec unknown."""
        return Laurent(field, prec - 1, (), prec)

    # -- structure --

    @property
    def is_exact(self) -> bool:
        return self.prec is None

    @property
    def is_exact_zero(self) -> bool:
        return self.prec is None and not self.coeffs

    @property
    def has_certified_lead(self) -> bool:
        return bool(self.coeffs) or self.is_exact_zero

    def coeff(self, k: int):
        """Coefficient at exponent k; raises if k is below the known range."""
        if self.prec is not None and k < self.prec:
            raise PrecisionInsufficient(
                f"coefficient at T^{k} unknown (prec {self.prec})", bound_exp=self.prec - 1
            )
        i = self.lead - k
        if 0 <= i < len(self.coeffs):
            return self.coeffs[i]
        return self.field.zero

    def val_exp(self) -> Exp:
        """deg(x) as exponent of |x| = q**deg; NEG_INF for exact zero."""
        if self.coeffs:
            return self.lead
        if self.is_exact_zero:
            return NEG_INF
        raise PrecisionInsufficient(
            f"all known coefficients vanish; |x| <= q^{self.prec - 1} uncertified",
            bound_exp=self.prec - 1,
        )

    def bound_exp(self) -> Exp:
        """Certified exponent bound: |x| <= q**bound_exp (NEG_INF for zero)."""
        if self.coeffs:
            return self.lead
        if self.is_exact_zero:
            return NEG_INF
        return self.prec - 1

    # -- arithmetic --

    def _hi(self) -> int:
        # exponent bound usable in error propagation; exact zero handled by caller
        if self.coeffs:
            return self.lead
        if self.prec is not None:
            return self.prec - 1
        return None  # exact zero

    def __add__(self, other: "Laurent") -> "Laurent":
        f = self.field
        if self.is_exact_zero:
            return other
        if other.is_exact_zero:
            return self
        if self.prec is None and other.prec is None:
            prec = None
            low = min(self.lead - len(self.coeffs) + 1, other.lead - len(other.coeffs) + 1)
        else:
            precs = [p for p in (self.prec, other.prec) if p is not None]
            prec = max(precs)
            low = prec
        hi = max(self.lead, other.lead)
        out = []
        for k in range(hi, low - 1, -1):
            a = self.coeff(k) if (self.prec is None or k >= self.prec) else f.zero
            b = other.coeff(k) if (other.prec is None or k >= other.prec) else f.zero
            out.append(f.add(a, b))
        return Laurent.make(f, hi, out, prec)

    def __neg__(self) -> "Laurent":
        f = self.field
        return Laurent(f, self.lead, tuple(f.neg(c) for c in self.coeffs), self.prec)

    def __sub__(self, other: "Laurent") -> "Laurent":
        return self + (-other)

    def __mul__(self, other: "Laurent") -> "Laurent":
        f = self.field
        if self.is_exact_zero or other.is_exact_zero:
            return Laurent.zero(f)
        # certified precision of the product: error terms x*err(y), err(x)*y,
        # err(x)*err(y) live at exponents < prec candidates below
        cands = []
        if self.prec is not None:
            cands.append(self.prec + other._hi())
        if other.prec is not None:
            cands.append(other.prec + self._hi())
        if self.prec is not None and other.prec is not None:
            cands.append(self.prec + other.prec - 1)
        prec = max(cands) if cands else None
        if not self.coeffs or not other.coeffs:
            # a pure error term: nothing certified
            return Laurent.big_o(f, prec)
        lead = self.lead + other.lead
        low_s = self.lead - len(self.coeffs) + 1
        low_o = other.lead - len(other.coeffs) + 1
        low = low_s + low_o if prec is None else prec
        out = [f.zero] * (lead - low + 1)
        for i, a in enumerate(self.coeffs):
            if f.is_zero(a):
                continue
            ea = self.lead - i
            for j, b in enumerate(other.coeffs):
                k = ea + (other.lead - j)
                if k < low:
                    continue
                out[lead - k] = f.add(out[lead - k], f.mul(a, b))
        return Laurent.make(f, lead, out, prec)

    def scale(self, c) -> "Laurent":
        f = self.field
        c = f.elem(c) if not isinstance(c, tuple) else c
        if f.is_zero(c):
            return Laurent.zero(f)
        return Laurent(f, self.lead, tuple(f.mul(c, a) for a in self.coeffs), self.prec)

    def shift(self, k: int) -> "Laurent":
        """Multiply by the exact monomial T**k."""
        if self.is_exact_zero:
            return self
        prec = None if self.prec is None else self.prec + k
        return Laurent(self.field, self.lead + k, self.coeffs, prec)

    def truncate(self, prec: int) -> "Laurent":
        """Forget coefficients below ``prec`` (weakens precision)."""
        if self.prec is not None and self.prec >= prec:
            return self
        return Laurent.make(self.field, self.lead if self.coeffs else prec - 1,
                            self.coeffs, prec)

    def div(self, other: "Laurent", prec: int) -> "Laurent":
        """self/other computed down to exponent ``prec`` (or better if exact)."""
        f = self.field
        if not other.coeffs:
            raise (ZeroDivisionError("division by exact zero") if other.is_exact_zero
                   else PrecisionInsufficient("divisor has no certified leading term",
                                              bound_exp=other.bound_exp()))
        if self.is_exact_zero:
            return self
        b = other.lead
        # certified floor from the operands' own precision
        cands = [prec]
        if self.coeffs:
            a_hi = self.lead
        else:
            a_hi = self.prec - 1
        if self.prec is not None:
            cands.append(self.prec - b)
        if other.prec is not None:
            cands.append(a_hi + other.prec - 2 * b)
        floor = max(cands)
        if not self.coeffs:
            return Laurent.big_o(f, floor)
        # long division: maintain remainder, emit quotient coefficients downward
        inv_lead = f.inv(other.coeffs[0])
        rem = self
        out = []
        top = self.lead - b
        k = top
        while k >= floor:
            try:
                rk = rem.coeff(k + b)
            except PrecisionInsufficient:
                break
            c = f.mul(rk, inv_lead)
            out.append(c)
            if not f.is_zero(c):
                rem = rem - other.shift(k).scale(c)
            k -= 1
        if rem.is_exact_zero and other.prec is None and self.prec is None:
            return Laurent.make(f, top, out, None)
        return Laurent.make(f, top, out, k + 1)

    def invert(self, prec: int) -> "Laurent":
        return Laurent.one(self.field).div(self, prec)

    def poly_part(self) -> Poly:
        """The polynomial part (coefficients at exponents >= 0)."""
        f = self.field
        if self.lead < 0:
            return Poly.zero(f)
        cs = [self.coeff(k) for k in range(0, self.lead + 1)]
        return Poly.make(f, cs)

    def tail_part(self) -> "Laurent":
        """Strictly negative-exponent part (same precision)."""
        f = self.field
        if self.lead < 0:
            return self
        lo = self.prec if self.prec is not None else self.lead - len(self.coeffs) + 1
        cs = [self.coeff(k) for k in range(-1, lo - 1, -1)] if lo <= -1 else []
        return Laurent.make(f, -1, cs, self.prec)

    def __repr__(self):
        return f"Laurent({format_laurent(self)})"


def abs_value(x) -> Exp:
    """|x| as an exponent (q**e), for Poly or Laurent; NEG_INF is |0|."""
    if isinstance(x, Poly):
        return x.degree
    return x.val_exp()


def sup_norm(vec) -> Exp:
    """max_i |v_i| over a vector of Laurent/Poly entries."""
    best = NEG_INF
    for v in vec:
        e = abs_value(v)
        if best < e:
            best = e
    return best


def dist_to_poly_lattice(x: Laurent) -> Exp:
    """min over polynomials p of |x + p| = |tail of x| (exact by orthogonality).

    The optimum is p = -(polynomial part); the strictly negative-degree tail is
    norm-orthogonal to the polynomial ring.  Raises PrecisionInsufficient when
    the tail's leading coefficient is not certified.
    """
    return x.tail_part().val_exp()


# ---------------------------------------------------------------------------
# Ramified monomial extension: T**shift * mantissa, shift in (1/ram)Z
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScaledSeries:
    """T**shift times a Laurent mantissa; shift normalized into [0, 1)."""

    ram: int
    shift: Fraction
    mantissa: Laurent

    @staticmethod
    def make(ram: int, shift, mantissa: Laurent) -> "ScaledSeries":
        s = Fraction(shift)
        if ram % s.denominator != 0:
            raise ConfigError(f"shift {s} not in (1/{ram})Z")
        if mantissa.is_exact_zero:
            return ScaledSeries(ram, Fraction(0), mantissa)
        k = s.numerator // s.denominator  # floor
        frac = s - k
        return ScaledSeries(ram, frac, mantissa.shift(k))

    @staticmethod
    def from_laurent(ram: int, x: Laurent) -> "ScaledSeries":
        return ScaledSeries(ram, Fraction(0), x)

    @staticmethod
    def monomial(ram: int, field: Fq, e) -> "ScaledSeries":
        return ScaledSeries.make(ram, Fraction(e), Laurent.one(field))

    @property
    def is_exact_zero(self) -> bool:
        return self.mantissa.is_exact_zero

    def val_exp(self) -> Exp:
        e = self.mantissa.val_exp()
        return e if is_neg_inf(e) else self.shift + e

    def bound_exp(self) -> Exp:
        e = self.mantissa.bound_exp()
        return e if is_neg_inf(e) else self.shift + e

    def __add__(self, other: "ScaledSeries") -> "ScaledSeries":
        if self.is_exact_zero:
            return other
        if other.is_exact_zero:
            return self
        if self.shift != other.shift:
            raise ConfigError(
                f"grading mismatch: cannot add shifts {self.shift} and {other.shift}"
            )
        return ScaledSeries.make(self.ram, self.shift, self.mantissa + other.mantissa)

    def __neg__(self) -> "ScaledSeries":
        return ScaledSeries(self.ram, self.shift, -self.mantissa)

    def __mul__(self, other: "ScaledSeries") -> "ScaledSeries":
        return ScaledSeries.make(
            self.ram, self.shift + other.shift, self.mantissa * other.mantissa
        )

    def scale_laurent(self, c: Laurent) -> "ScaledSeries":
        return ScaledSeries.make(self.ram, self.shift, self.mantissa * c)

    def shift_by(self, e) -> "ScaledSeries":
        return ScaledSeries.make(self.ram, self.shift + Fraction(e), self.mantissa)

    def __repr__(self):
        return f"ScaledSeries(T^{self.shift} * {format_laurent(self.mantissa)})"


# ---------------------------------------------------------------------------
# Flow scalars (the diagonal entries' building blocks)
# ---------------------------------------------------------------------------

def flow_scalar_exponents(n: int, t: int, r: int, beta: Fraction):
    """Exponents of (delta', eps', eps): the contraction scale T**-(nt+r), its
    (n+1)-th-root normalization, and the beta-twisted version."""
    beta = Fraction(beta)
    if n < 2 or t < 0 or r < 0:
        raise ConfigError("need n >= 2, t >= 0, r >= 0")
    if not (0 < beta < Fraction(1, n + 1)):
        raise ConfigError(f"beta = {beta} outside (0, 1/{n + 1})")
    e_delta = Fraction(-(n * t + r))
    e_eps_base = Fraction((t + 1) * (n - 1) - (n * t + r), n + 1)
    e_eps = beta * t + e_eps_base
    return e_delta, e_eps_base, e_eps


def make_flow_scalars(field: Fq, n: int, t: int, r: int, beta: Fraction,
                      ram: int | None = None):
    """(delta', eps', eps) as exact fractional monomials over the given field."""
    beta = Fraction(beta)
    e_delta, e_eps_base, e_eps = flow_scalar_exponents(n, t, r, beta)
    N = ram if ram is not None else _lcm(n + 1, beta.denominator)
    for e in (e_eps_base, e_eps):
        if N % Fraction(e).denominator != 0:
            raise ConfigError(f"ramification index {N} does not resolve exponent {e}")
    return (
        ScaledSeries.monomial(N, field, e_delta),
        ScaledSeries.monomial(N, field, e_eps_base),
        ScaledSeries.monomial(N, field, e_eps),
    )


def _lcm(a: int, b: int) -> int:
    import math

    return a * b // math.gcd(a, b)


# ---------------------------------------------------------------------------
# Textual serialization: "T^3 + T + 1 + O(T^-5)"
# ---------------------------------------------------------------------------

def _format_fq(field: Fq, c: tuple) -> str:
    if field.a == 1:
        return str(c[0])
    return "[" + ",".join(str(v) for v in c) + "]"


def format_poly(p: Poly) -> str:
    if p.is_zero:
        return "0"
    terms = []
    for i in range(len(p.coeffs) - 1, -1, -1):
        c = p.coeffs[i]
        if p.field.is_zero(c):
            continue
        terms.append(_term_str(p.field, c, i))
    return " + ".join(terms)


def _term_str(field: Fq, c: tuple, k: int) -> str:
    cs = _format_fq(field, c)
    is_one = c == field.one
    if k == 0:
        return cs
    tk = "T" if k == 1 else f"T^{k}"
    return tk if is_one and field.a == 1 else f"{cs}*{tk}"


def format_laurent(x: Laurent) -> str:
    terms = []
    for i, c in enumerate(x.coeffs):
        if x.field.is_zero(c):
            continue
        terms.append(_term_str(x.field, c, x.lead - i))
    if x.prec is not None:
        terms.append(f"O(T^{x.prec - 1})")
    if not terms:
        return "0"
    return " + ".join(terms)


_TERM_RE = re.compile(
    r"^(?:(?P<coeff>\[[0-9,\s]+\]|\d+)\*?)?(?P<T>T(?:\^(?P<exp>-?\d+))?)?$"
)


def parse_laurent(field: Fq, text: str) -> Laurent:
    """Parse the ``format_laurent`` form back into a Laurent element."""
    text = text.strip()
    if text == "0":
        return Laurent.zero(field)
    # minus signs inside exponents (T^-5) are not term separators
    parts = [p.strip() for p in text.replace(" - ", " + -").split("+") if p.strip()]
    prec = None
    terms = {}
    for part in parts:
        neg = part.startswith("-")
        if neg:
            part = part[1:].strip()
        m = re.match(r"^O\(T\^(-?\d+)\)$", part)
        if m:
            prec = int(m.group(1)) + 1
            continue
        m = _TERM_RE.match(part)
        if not m or (m.group("coeff") is None and m.group("T") is None):
            raise ConfigError(f"cannot parse Laurent term {part!r}")
        coeff_s = m.group("coeff")
        if coeff_s is None:
            c = field.one
        elif coeff_s.startswith("["):
            c = field.elem([int(v) for v in coeff_s[1:-1].split(",")])
        else:
            c = field.elem(int(coeff_s))
        if m.group("T") is None:
            k = 0
        elif m.group("exp") is None:
            k = 1
        else:
            k = int(m.group("exp"))
        if neg:
            c = field.neg(c)
        terms[k] = field.add(terms.get(k, field.zero), c)
    if not terms:
        return Laurent.big_o(field, prec)
    hi = max(terms)
    lo = min(terms) if prec is None else prec
    coeffs = [terms.get(k, field.zero) for k in range(hi, lo - 1, -1)]
    return Laurent.make(field, hi, coeffs, prec)


# ---------------------------------------------------------------------------
# Exact rational functions P/Q (for hyperplane data with rational entries)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RationalFunction:
    """P/Q over F_q[T], kept exact so lattice distances can vanish exactly."""

    num: Poly
    den: Poly

    def __post_init__(self):
        if self.den.is_zero:
            raise ZeroDivisionError("rational function with zero denominator")

    def mul_poly(self, p: Poly) -> "RationalFunction":
        return RationalFunction(self.num * p, self.den)

    def dist_to_poly_lattice(self) -> Exp:
        """min_p |self + p| computed exactly: |remainder| / |den|."""
        rem = self.num % self.den
        if rem.is_zero:
            return NEG_INF
        return rem.degree - self.den.degree

    def to_laurent(self, prec: int) -> Laurent:
        return Laurent.from_poly(self.num).div(Laurent.from_poly(self.den), prec)
