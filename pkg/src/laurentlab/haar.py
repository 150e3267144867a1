"""Ultrametric balls, coset grids and exact Haar measure on F**d.

Normalization: the closed unit ball has measure 1, so a closed ball of radius
q**r in F**d has measure q**(r*d).  Measures are only ever produced by exact
coset counting or by closed-form ultrametric identities cross-checked against
coset counting, and are carried as ``ExactMeasure`` = count * q**scale.

Sets written with a strict inequality |f(x)| < q**-j coincide with the closed
sublevel |f(x)| <= q**-(j+1) because the value group is discrete; the grid
machinery works with the closed threshold exponent throughout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .exponents import NEG_INF, Exp, PrecisionInsufficient, exp_max, is_neg_inf
from .fq import ConfigError, Fq
from .laurent import Laurent, abs_value
from .qpow import QPow


@dataclass(frozen=True)
class ExactMeasure:
    """count * q**scale with count a nonnegative integer."""

    q: int
    count: int
    scale: int = 0

    @staticmethod
    def make(q: int, count: int, scale: int = 0) -> "ExactMeasure":
        if count < 0:
            raise ValueError("negative measure")
        if count == 0:
            return ExactMeasure(q, 0, 0)
        while count % q == 0:
            count //= q
            scale += 1
        return ExactMeasure(q, count, scale)

    @staticmethod
    def zero(q: int) -> "ExactMeasure":
        return ExactMeasure(q, 0, 0)

    @staticmethod
    def q_power(q: int, e: int) -> "ExactMeasure":
        return ExactMeasure(q, 1, e)

    def as_fraction(self) -> Fraction:
        return self.count * Fraction(self.q) ** self.scale

    def as_qpow(self) -> QPow:
        return QPow.make(self.q, self.count, self.scale)

    def __add__(self, other: "ExactMeasure") -> "ExactMeasure":
        if self.q != other.q:
            raise ValueError("mixed q")
        s = min(self.scale, other.scale) if self.count and other.count else (
            other.scale if not self.count else self.scale)
        if not self.count:
            return other
        if not other.count:
            return self
        c = self.count * self.q ** (self.scale - s) + other.count * self.q ** (other.scale - s)
        return ExactMeasure.make(self.q, c, s)

    def scaled(self, e: int) -> "ExactMeasure":
        if not self.count:
            return self
        return ExactMeasure(self.q, self.count, self.scale + e)

    def times_int(self, k: int) -> "ExactMeasure":
        return ExactMeasure.make(self.q, self.count * k, self.scale)

    def _cmp(self, other):
        if isinstance(other, ExactMeasure):
            other = other.as_fraction()
        a, b = self.as_fraction(), Fraction(other)
        return (a > b) - (a < b)

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __eq__(self, other):
        if not isinstance(other, (ExactMeasure, int, Fraction)):
            return NotImplemented
        return self._cmp(other) == 0

    def __hash__(self):
        return hash(self.as_fraction())

    def __repr__(self):
        if not self.count:
            return "ExactMeasure(0)"
        return f"ExactMeasure({self.count} * {self.q}^{self.scale})"


# ---------------------------------------------------------------------------
# Balls and grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UltraBall:
    """Closed ball {x : max_i |x_i - c_i| <= q**radius_exp} in F**d."""

    center: tuple  # tuple[Laurent, ...]
    radius_exp: int

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def field(self) -> Fq:
        return self.center[0].field

    @staticmethod
    def at_zero(field: Fq, dim: int, radius_exp: int = 0) -> "UltraBall":
        return UltraBall(tuple(Laurent.zero(field) for _ in range(dim)), radius_exp)

    def measure(self) -> ExactMeasure:
        return ExactMeasure.q_power(self.field.q, self.radius_exp * self.dim)

    def contains(self, point) -> bool:
        for c, x in zip(self.center, point):
            if (x - c).bound_exp() > self.radius_exp:
                d = (x - c).val_exp()
                if d > self.radius_exp:
                    return False
        return True

    def recenter(self, point) -> "UltraBall":
        if not self.contains(point):
            raise ValueError("new center outside the ball")
        return UltraBall(tuple(point), self.radius_exp)

    def dilate(self, steps: int) -> "UltraBall":
        """Smallest ball containing the 3**steps-fold dilation: radius bumps by
        steps*ceil(log_q 3) in the exponent."""
        return UltraBall(self.center, self.radius_exp + steps * ceil_log_q(self.field.q, 3))


def ceil_log_q(q: int, n: int) -> int:
    e, v = 0, 1
    while v < n:
        v *= q
        e += 1
    return e


@dataclass(frozen=True)
class CellGrid:
    """The q**((radius_exp+m)*d) cosets of radius q**-m tiling a ball.

    Cell representatives are the center plus all offset tuples with digits at
    exponents radius_exp down to -m+1, enumerated lexicographically
    (coordinate-major, exponent descending, F_q elements by index).
    """

    ball: UltraBall
    m: int

    def __post_init__(self):
        if -self.m > self.ball.radius_exp:
            raise ConfigError("cell radius exceeds ball radius")

    @property
    def digits_per_coord(self) -> int:
        return self.ball.radius_exp + self.m

    @property
    def cell_count(self) -> int:
        return self.ball.field.q ** (self.digits_per_coord * self.ball.dim)

    def cell_measure(self) -> ExactMeasure:
        return ExactMeasure.q_power(self.ball.field.q, -self.m * self.ball.dim)

    def representative(self, index: int):
        f = self.ball.field
        q = f.q
        digs = self.digits_per_coord
        coords = []
        total = digs * self.ball.dim
        base = []
        for _ in range(total):
            base.append(index % q)
            index //= q
        base.reverse()
        for i in range(self.ball.dim):
            part = base[i * digs:(i + 1) * digs]
            coeffs = [f.from_index(k) for k in part]
            off = Laurent.make(f, self.ball.radius_exp, coeffs, -self.m + 1)
            off = Laurent.make(f, off.lead if off.coeffs else 0, off.coeffs, None)
            coords.append(self.ball.center[i] + off)
        return tuple(coords)

    def representatives(self):
        for i in range(self.cell_count):
            yield self.representative(i)


# ---------------------------------------------------------------------------
# Exact measures of predicate sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstancyCertificate:
    """Evidence that a predicate is constant on radius q**-m cells.

    For an affine comparison |f(x)| < q**-level (f of gradient exponent
    grad_exp), same-cell points differ by at most q**(grad_exp - m), so the
    strict sublevel (closed threshold -level-1) is cell-constant as soon as
    m >= grad_exp + level + 1.
    """

    grad_exp: Exp
    level: int

    def required_resolution(self) -> int:
        if is_neg_inf(self.grad_exp):
            return -(10 ** 9)  # constant predicate: any resolution works
        return int(self.grad_exp) + self.level + 1


TRIVIALLY_CONSTANT = ConstancyCertificate(NEG_INF, 0)


def exact_measure_of(predicate, grid: CellGrid, certificate: ConstancyCertificate) -> ExactMeasure:
    """Measure of a cell-constant predicate set by exact coset counting."""
    if grid.m < certificate.required_resolution():
        raise PrecisionInsufficient(
            f"grid resolution m={grid.m} below certificate requirement "
            f"{certificate.required_resolution()}"
        )
    count = sum(1 for rep in grid.representatives() if predicate(rep))
    return grid.cell_measure().times_int(count)


def sup_linear_on_ball(coeffs, const: Laurent, ball: UltraBall) -> Exp:
    """sup over the ball of |const + sum_i coeffs_i * x_i|, exact.

    Equals max(|value at center|, q**radius * max_i |coeff_i|) by
    ultrametricity (both are attained).  Coefficients whose leading term is
    only bounded, not certified, are fine as long as certified terms dominate
    their bound; otherwise the sup is uncertifiable.
    """
    at_center = const
    for b, c in zip(coeffs, ball.center):
        at_center = at_center + b * c
    certified = []
    bounds = []
    for b in coeffs:
        if b.is_exact_zero:
            continue
        if b.has_certified_lead:
            certified.append(b.val_exp() + ball.radius_exp)
        else:
            bounds.append(b.bound_exp() + ball.radius_exp)
    if at_center.has_certified_lead:
        certified.append(at_center.val_exp())
    else:
        bounds.append(at_center.bound_exp())
    best = exp_max(*certified) if certified else NEG_INF
    for bd in bounds:
        if not bd <= best:
            raise PrecisionInsufficient(
                "sup not certified: an unknown term may dominate",
                bound_exp=exp_max(best, bd),
            )
    return best


def affine_sublevel_measure(coeffs, const: Laurent, level_exp: int, ball: UltraBall) -> ExactMeasure:
    """measure{x in ball : |const + coeffs . x| <= q**level_exp}, closed form.

    With e = max|coeff| and rho the ball radius exponent:
      - all coefficients zero: full or empty by |const|;
      - e + rho <= level: full iff |const| <= q**level, else empty;
      - otherwise q**(level - e + rho(d-1)) iff |const at center| <= q**(e+rho),
        else empty.
    """
    q = ball.field.q
    w = const
    for b, c in zip(coeffs, ball.center):
        w = w + b * c
    e = NEG_INF
    u = NEG_INF
    for b in coeffs:
        if b.is_exact_zero:
            continue
        if b.has_certified_lead:
            v = b.val_exp()
            if e < v:
                e = v
        elif u < b.bound_exp():
            u = b.bound_exp()
    d, rho = ball.dim, ball.radius_exp
    # an uncertified gradient bound is harmless when dominated by a certified
    # entry, or when even the bound keeps the gradient below the level
    if not (u <= e or (u + rho <= level_exp and e + rho <= level_exp)):
        raise PrecisionInsufficient("gradient size uncertified", bound_exp=u)

    def w_le(s) -> bool:
        if w.has_certified_lead:
            return w.val_exp() <= s
        if w.bound_exp() <= s:
            return True
        raise PrecisionInsufficient("sublevel membership uncertified", bound_exp=w.bound_exp())

    if is_neg_inf(e):
        return ball.measure() if w_le(level_exp) else ExactMeasure.zero(q)
    if e + rho <= level_exp:
        return ball.measure() if w_le(level_exp) else ExactMeasure.zero(q)
    if w_le(e + rho):
        return ExactMeasure.q_power(q, (level_exp - int(e)) + rho * (d - 1))
    return ExactMeasure.zero(q)


def strip_measure(coeffs, const: Laurent, j: int, ball: UltraBall) -> ExactMeasure:
    """Exact measure of the strip {x in ball : |coeffs.x + const| < q**-j}."""
    return affine_sublevel_measure(coeffs, const, -j - 1, ball)


# ---------------------------------------------------------------------------
# Unions of balls in F (dimension 1): balls nest or are disjoint, so a union's
# measure is the sum over its maximal members.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ball1:
    center: Laurent
    radius_exp: int

    def contains_ball(self, other: "Ball1") -> bool:
        if other.radius_exp > self.radius_exp:
            return False
        diff = self.center - other.center
        b = diff.bound_exp()
        if b <= self.radius_exp:
            return True
        return diff.val_exp() <= self.radius_exp  # may raise PrecisionInsufficient


def ball_union_measure(balls, q: int) -> ExactMeasure:
    maximal: list[Ball1] = []
    for b in sorted(balls, key=lambda x: -x.radius_exp):
        if not any(m.contains_ball(b) for m in maximal):
            maximal.append(b)
    total = ExactMeasure.zero(q)
    for b in maximal:
        total = total + ExactMeasure.q_power(q, b.radius_exp)
    return total


def affine_solution_ball(coeff: Laurent, const: Laurent, level_exp: int,
                         ball: UltraBall, prec_hint: int | None = None):
    """Solution set of |coeff*x + const| <= q**level inside a 1-dim ball.

    Returns a Ball1, the whole ball, or None (empty).  ``coeff`` must have a
    certified nonzero leading term.
    """
    if ball.dim != 1:
        raise ValueError("affine_solution_ball is one-dimensional")
    e = coeff.val_exp()
    if is_neg_inf(e):
        w = const + coeff * ball.center[0]
        ok = (w.val_exp() if w.has_certified_lead else w.bound_exp()) <= level_exp
        return Ball1(ball.center[0], ball.radius_exp) if ok else None
    rad = level_exp - int(e)
    prec = min(prec_hint if prec_hint is not None else rad, rad)
    zeta = (-const).div(coeff, prec)
    sol = Ball1(zeta, rad)
    ambient = Ball1(ball.center[0], ball.radius_exp)
    if rad >= ball.radius_exp:
        return ambient if sol.contains_ball(ambient) else None
    return sol if ambient.contains_ball(sol) else None


def subballs(ball: UltraBall, min_radius_exp: int):
    """Every sub-ball of ``ball`` with radius >= q**min_radius_exp: exactly the
    grid cells at each intermediate resolution (ultrametric structure)."""
    for r in range(ball.radius_exp, min_radius_exp - 1, -1):
        grid = CellGrid(ball, -r)
        for rep in grid.representatives():
            yield UltraBall(rep, r)


def grid_report_rows(grid: CellGrid, predicate):
    """TSV-ready rows: cell index, representative, predicate value."""
    from .laurent import format_laurent

    for i, rep in enumerate(grid.representatives()):
        yield (i, "|".join(format_laurent(x) for x in rep), int(bool(predicate(rep))))
