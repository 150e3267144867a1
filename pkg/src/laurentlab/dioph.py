"""Approximation functions, shells, the hyperplane condition and exact L-set
measures.

Points on the hyperplane are (x, x~ . a) with x in F**(n-1), x~ = (1, x) and
a = (alpha_0, ..., alpha_{n-1}).  For an integer vector qv in the polynomial
lattice, the pairing is

    (x, x~ . a) . qv + p  =  sum_i (q_i + alpha_i q_n) x_i + alpha_0 q_n + p,

affine in x with gradient beta_i = q_i + alpha_i q_n.  Witnesses split by
whether every |beta_i| < 1 (small gradient) or some |beta_i| >= 1 (large
gradient); the x-sets are unions of affine sublevel sets whose exact measures
come from the haar module (ball unions in dimension 1, certified coset
counting in general).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

from .exponents import NEG_INF, Exp, PrecisionInsufficient, is_neg_inf
from .fq import ConfigError, Fq
from .haar import (
    Ball1,
    CellGrid,
    ConstancyCertificate,
    ExactMeasure,
    UltraBall,
    affine_solution_ball,
    ball_union_measure,
    exact_measure_of,
    strip_measure,
)
from .laurent import (
    Laurent,
    Poly,
    RationalFunction,
    abs_value,
    all_polys,
    dist_to_poly_lattice,
    monic_polys,
)


# ---------------------------------------------------------------------------
# Approximation functions psi(q**t) = q**s(t)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PsiFunction:
    """Nonincreasing approximation function given by its exponent map s."""

    table: tuple = ()          # ((t, s(t)), ...) overrides
    linear: tuple | None = None  # (c, b): s(t) = -c*t + b

    @staticmethod
    def from_linear(c: int, b: int = 0) -> "PsiFunction":
        if c < 0:
            raise ConfigError("psi must be nonincreasing: need c >= 0")
        return PsiFunction((), (c, b))

    @staticmethod
    def from_table(entries: dict) -> "PsiFunction":
        items = tuple(sorted((int(t), int(s)) for t, s in entries.items()))
        for (t0, s0), (t1, s1) in zip(items, items[1:]):
            if s1 > s0:
                raise ConfigError("psi table must be nonincreasing")
        return PsiFunction(items, None)

    def s(self, t: int) -> int:
        if self.linear is not None:
            c, b = self.linear
            return -c * t + b
        for tt, ss in self.table:
            if tt == t:
                return ss
        raise ConfigError(f"psi table has no entry for t={t}")

    def quantitative_ok(self, n: int, t: int) -> bool:
        """The regime psi(q**t) <= q**(-n t)."""
        return self.s(t) <= -n * t


# ---------------------------------------------------------------------------
# Hyperplane data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Hyperplane:
    """The affine hyperplane {(x, alpha_0 + alpha_1 x_1 + ...)} in F**n.

    Entries are Laurent elements (possibly truncated) or exact
    RationalFunction values; rational entries keep lattice distances exact,
    which is what exhibits structural condition failures.
    """

    n: int
    alpha: tuple  # length n: Laurent | RationalFunction

    def __post_init__(self):
        if len(self.alpha) != self.n:
            raise ConfigError("alpha must have n entries")

    @property
    def field(self) -> Fq:
        a0 = self.alpha[0]
        return a0.num.field if isinstance(a0, RationalFunction) else a0.field

    def alpha_laurent(self, i: int, prec: int = -64) -> Laurent:
        a = self.alpha[i]
        return a.to_laurent(prec) if isinstance(a, RationalFunction) else a

    def alpha_times(self, i: int, qprime: Poly):
        """alpha_i * q' in the most exact form available."""
        a = self.alpha[i]
        if isinstance(a, RationalFunction):
            return a.mul_poly(qprime)
        return a * Laurent.from_poly(qprime)

    def gradient(self, qvec) -> tuple:
        """beta_i = q_i + alpha_i * q_n for i = 1..n-1 (Laurent entries)."""
        qn = qvec[-1]
        out = []
        for i in range(1, self.n):
            ai_qn = self.alpha_times(i, qn)
            if isinstance(ai_qn, RationalFunction):
                prec = min(-1, -2 * (1 + max(0, _deg_int(qn)))) - 8
                ai_qn = ai_qn.to_laurent(prec)
            out.append(Laurent.from_poly(qvec[i - 1]) + ai_qn)
        return tuple(out)

    def offset(self, qvec) -> Laurent:
        """alpha_0 * q_n (the constant term before the p-shift)."""
        a0_qn = self.alpha_times(0, qvec[-1])
        if isinstance(a0_qn, RationalFunction):
            prec = min(-1, -2 * (1 + max(0, _deg_int(qvec[-1])))) - 8
            a0_qn = a0_qn.to_laurent(prec)
        return a0_qn

    def pairing_dist(self, x, qvec) -> Exp:
        """min over p of |(x, x~.a) . qvec + p| at the point x."""
        v = self.offset(qvec)
        for b, xi in zip(self.gradient(qvec), x):
            v = v + b * xi
        return dist_to_poly_lattice(v)


def _deg_int(p: Poly) -> int:
    d = p.degree
    return -1 if is_neg_inf(d) else int(d)


def hyperplane_zero(field: Fq, n: int) -> Hyperplane:
    return Hyperplane(n, tuple(Laurent.zero(field) for _ in range(n)))


# ---------------------------------------------------------------------------
# Shells {qv : ||qv|| = q**t}
# ---------------------------------------------------------------------------

def shell_count(q: int, n: int, t: int) -> int:
    if t == 0:
        return q ** n - 1
    return q ** (n * t) * (q ** n - 1)


def shell_enumerate(field: Fq, n: int, t: int):
    """All qv in the polynomial lattice with sup-norm exponent exactly t,
    lexicographically by coefficient tuples."""
    if t < 0:
        raise ConfigError("shell index t must be >= 0")
    polys = list(all_polys(field, t))
    for combo in itertools.product(polys, repeat=n):
        deg = max((_deg_int(p) for p in combo), default=-1)
        if deg == t and not all(p.is_zero for p in combo):
            yield combo
        elif t == 0 and deg == 0:
            yield combo


def lattice_vectors_up_to(field: Fq, n: int, max_deg: int, include_zero=False):
    polys = list(all_polys(field, max_deg))
    for combo in itertools.product(polys, repeat=n):
        if include_zero or not all(p.is_zero for p in combo):
            yield combo


# ---------------------------------------------------------------------------
# The Diophantine condition
# ---------------------------------------------------------------------------

@dataclass
class ConditionReport:
    delta: Fraction
    degree_bound: int
    violations: list = dc_field(default_factory=list)   # list[Poly]
    precision_failures: list = dc_field(default_factory=list)
    structural_modulus: Poly | None = None

    @property
    def verdict(self) -> str:
        return "fails-infinitely" if self.structural_modulus is not None else "holds-up-to-D"

    @property
    def nonconstant_violations(self) -> list:
        return [v for v in self.violations if _deg_int(v) >= 1]


def fractional_part_reduction(h: Hyperplane, i: int, qprime: Poly) -> Exp:
    """min over p of |p + alpha_i q'| = |tail of alpha_i q'|."""
    v = h.alpha_times(i, qprime)
    if isinstance(v, RationalFunction):
        return v.dist_to_poly_lattice()
    return dist_to_poly_lattice(v)


def condition_margin(h: Hyperplane, qprime: Poly, delta: Fraction):
    """(lhs_exp, rhs_exp) of the condition max_i |p_i + alpha_i q'| > |q'|^-(n-delta)."""
    lhs = NEG_INF
    for i in range(h.n):
        e = fractional_part_reduction(h, i, qprime)
        if lhs < e:
            lhs = e
    rhs = -Fraction(h.n - delta) * _deg_int(qprime)
    return lhs, rhs


def check_dioph_condition(h: Hyperplane, delta, D: int) -> ConditionReport:
    """Scan all nonzero q' of degree <= D for condition violations."""
    delta = Fraction(delta)
    if not (0 < delta < h.n):
        raise ConfigError(f"delta = {delta} outside (0, n)")
    rep = ConditionReport(delta, D)
    for qprime in all_polys(h.field, D, include_zero=False):
        try:
            lhs, rhs = condition_margin(h, qprime, delta)
        except PrecisionInsufficient:
            rep.precision_failures.append(qprime)
            continue
        if not (lhs > rhs):
            rep.violations.append(qprime)
    # structural family heuristic: a monic Q of degree >= 1 whose every nonzero
    # multiple of degree <= D violates
    vio = {(v.monic().sort_key()) for v in rep.violations}
    for degq in range(1, D + 1):
        for Q in monic_polys(h.field, degq):
            mults = [Q * s for s in all_polys(h.field, D - degq, include_zero=False)]
            if len(mults) >= 2 and all(m.monic().sort_key() in vio for m in mults):
                rep.structural_modulus = Q
                return rep
    return rep


# ---------------------------------------------------------------------------
# Membership and the gradient split
# ---------------------------------------------------------------------------

def membership(x, qvec, h: Hyperplane, psi: PsiFunction, kappa_exp: int = 0) -> bool:
    """x in L(qvec, kappa): min_p |(x, x~.a).qvec + p| < kappa * psi(||qvec||)."""
    t = sup_deg(qvec)
    threshold = psi.s(t) + kappa_exp
    try:
        d = _pairing_dist_value(x, qvec, h)
    except PrecisionInsufficient as err:
        if err.bound_exp is not None and err.bound_exp <= threshold - 1:
            return True  # certified below threshold even without an exact distance
        raise
    return d < threshold


def _pairing_dist_value(x, qvec, h: Hyperplane) -> Exp:
    v = h.offset(qvec)
    for b, xi in zip(h.gradient(qvec), x):
        v = v + b * xi
    return dist_to_poly_lattice(v)


def sup_deg(qvec) -> int:
    d = max(_deg_int(p) for p in qvec)
    if d < 0:
        raise ConfigError("zero vector has no shell")
    return d


def gradient_class(h: Hyperplane, qvec) -> str:
    """'small' when every |q_i + alpha_i q_n| < 1, else 'large'."""
    for b in h.gradient(qvec):
        e = b.bound_exp()
        if is_neg_inf(e) or e <= -1:
            continue
        if b.has_certified_lead:
            if b.val_exp() >= 0:
                return "large"
        else:
            raise PrecisionInsufficient("gradient size uncertified", bound_exp=e)
    return "small"


@dataclass(frozen=True)
class SplitResult:
    small: bool
    large: bool

    @property
    def classes(self):
        out = []
        if self.small:
            out.append("small")
        if self.large:
            out.append("large")
        return tuple(out)


def split_membership(x, t: int, h: Hyperplane, psi: PsiFunction,
                     kappa_exp: int = 0) -> SplitResult:
    """Scan the shell ||qv|| = q**t and report which witness classes contain x."""
    small = large = False
    for qvec in shell_enumerate(h.field, h.n, t):
        if small and large:
            break
        cls = gradient_class(h, qvec)
        if (cls == "small" and small) or (cls == "large" and large):
            continue
        if membership(x, qvec, h, psi, kappa_exp):
            if cls == "small":
                small = True
            else:
                large = True
    return SplitResult(small, large)


# ---------------------------------------------------------------------------
# Exact measures of the L-sets
# ---------------------------------------------------------------------------

def witness_solution_balls(qvec, h: Hyperplane, level_exp: int, U: UltraBall):
    """Solution balls of min_p |pairing| <= q**level inside a 1-dim ball U.

    Enumerates the finitely many lattice shifts p with a nonempty strip and
    returns the corresponding Ball1 list.
    """
    if U.dim != 1:
        raise ValueError("ball-union route is one-dimensional")
    beta = h.gradient(qvec)[0]
    w0 = h.offset(qvec) + beta * U.center[0]
    f = h.field
    e = beta.bound_exp()
    window_hi = max(level_exp, (int(e) if not is_neg_inf(e) else 0) + U.radius_exp)
    # p must bring w0 + p inside |.| <= q**window_hi: p = -(poly part) + correction
    base = -(w0.poly_part())
    balls = []
    for corr in all_polys(f, max(window_hi, 0)):
        p = base + corr
        wp = w0 + Laurent.from_poly(p)
        bexp = wp.bound_exp()
        if not is_neg_inf(bexp) and bexp > window_hi and wp.has_certified_lead:
            continue
        if beta.is_exact_zero or not beta.has_certified_lead:
            # |beta * x| <= q**(bound + radius); decidable only when that sits
            # under the level
            if beta.is_exact_zero or beta.bound_exp() + U.radius_exp <= level_exp:
                ok = (wp.val_exp() if wp.has_certified_lead else wp.bound_exp()) <= level_exp
                if ok:
                    return [Ball1(U.center[0], U.radius_exp)]
                continue
            raise PrecisionInsufficient(
                "gradient uncertified at the witness level", bound_exp=beta.bound_exp()
            )
        shifted_const = h.offset(qvec) + Laurent.from_poly(p)
        sol = affine_solution_ball(beta, shifted_const, level_exp, U)
        if sol is not None:
            balls.append(sol)
    return balls


def l_set_measure(t: int, h: Hyperplane, psi: PsiFunction, kappa_exp: int,
                  U: UltraBall, grad_filter: str | None) -> ExactMeasure:
    """Exact measure of the t-shell witness set, optionally restricted to one
    gradient class ('small' / 'large' / None for the full union)."""
    level = psi.s(t) + kappa_exp - 1  # strict threshold -> closed level
    q = h.field.q
    if U.dim == 1:
        balls = []
        for qvec in shell_enumerate(h.field, h.n, t):
            if grad_filter is not None and gradient_class(h, qvec) != grad_filter:
                continue
            balls.extend(witness_solution_balls(qvec, h, level, U))
        return ball_union_measure(balls, q)
    # general dimension: certified grid counting
    max_grad = 0
    witnesses = []
    for qvec in shell_enumerate(h.field, h.n, t):
        if grad_filter is not None and gradient_class(h, qvec) != grad_filter:
            continue
        witnesses.append(qvec)
        for b in h.gradient(qvec):
            e = b.bound_exp()
            if not is_neg_inf(e):
                max_grad = max(max_grad, int(e))
    cert = ConstancyCertificate(max_grad, -level - 1)
    m = max(cert.required_resolution(), 1 - U.radius_exp, 1)
    grid = CellGrid(U, m)

    def pred(rep):
        for qvec in witnesses:
            try:
                d = _pairing_dist_value(rep, qvec, h)
                if d <= level:
                    return True
            except PrecisionInsufficient as err:
                if err.bound_exp is not None and err.bound_exp <= level:
                    return True
                raise
        return False

    return exact_measure_of(pred, grid, cert)


def union_l_measure_up_to(tmax: int, h: Hyperplane, psi: PsiFunction,
                          kappa_exp: int, U: UltraBall) -> ExactMeasure:
    """measure of the union over all shells t <= tmax of L(qv, kappa) (d=1)."""
    if U.dim != 1:
        raise ValueError("union route is one-dimensional")
    balls = []
    for t in range(tmax + 1):
        level = psi.s(t) + kappa_exp - 1
        for qvec in shell_enumerate(h.field, h.n, t):
            balls.extend(witness_solution_balls(qvec, h, level, U))
    return ball_union_measure(balls, h.field.q)


# ---------------------------------------------------------------------------
# Proposition-style strip bound verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StripBoundResult:
    measured: ExactMeasure
    bound: Fraction
    passed: bool


def verify_strip_bound(qvec, h: Hyperplane, m: int, U: UltraBall) -> StripBoundResult:
    """Exact measure of {x in U : min_p |pairing| < q**-m} against q*lambda(U)/q**m.

    Requires the large-gradient hypothesis (some |q_i + alpha_i q_n| >= 1).
    """
    if gradient_class(h, qvec) != "large":
        raise ConfigError("strip bound requires a large-gradient witness")
    q = h.field.q
    level = -m - 1
    if U.dim == 1:
        measured = ball_union_measure(witness_solution_balls(qvec, h, level, U), q)
    else:
        beta = h.gradient(qvec)
        e = max(int(abs_value(b)) for b in beta if not b.is_exact_zero)
        res = max(e + m + 1, 1 - U.radius_exp)
        grid = CellGrid(U, res)

        def pred(rep):
            try:
                return _pairing_dist_value(rep, qvec, h) <= level
            except PrecisionInsufficient as err:
                if err.bound_exp is not None and err.bound_exp <= level:
                    return True
                raise

        measured = exact_measure_of(pred, grid, ConstancyCertificate(e, m))
    bound = q * U.measure().as_fraction() * Fraction(q) ** (-m)
    return StripBoundResult(measured, bound, measured.as_fraction() <= bound)


def strip_union_measure(qvec, h: Hyperplane, m: int, U: UltraBall) -> ExactMeasure:
    """The same set measured strip-by-strip (Fubini route, any dimension)."""
    q = h.field.q
    beta = h.gradient(qvec)
    f = h.field
    w0 = h.offset(qvec)
    wc = w0
    for b, c in zip(beta, U.center):
        wc = wc + b * c
    e = max((int(abs_value(b)) for b in beta if not b.is_exact_zero), default=0)
    base = -(wc.poly_part())
    total = ExactMeasure.zero(q)
    window_hi = max(-m - 1, e + U.radius_exp)
    for corr in all_polys(f, max(window_hi, 0)):
        p = base + corr
        total = total + strip_measure(beta, w0 + Laurent.from_poly(p), m, U)
    return total


# ---------------------------------------------------------------------------
# Partial sums and the kappa formula
# ---------------------------------------------------------------------------

def sum_psi_partial(psi: PsiFunction, q: int, n: int, tmax: int) -> Fraction:
    """sum_{t<=tmax} psi(q**t) * #shell(t) exactly."""
    total = Fraction(0)
    for t in range(tmax + 1):
        total += Fraction(q) ** psi.s(t) * shell_count(q, n, t)
    return total


def sum_psi_by_enumeration(psi: PsiFunction, field: Fq, n: int, tmax: int) -> Fraction:
    total = Fraction(0)
    for t in range(tmax + 1):
        for _ in shell_enumerate(field, n, t):
            total += Fraction(field.q) ** psi.s(t)
    return total


def kappa_exponent(xi: Fraction, n: int, q: int, sum_psi: Fraction,
                   k0k1_upper: Fraction) -> int:
    """Largest r with q**-r strictly below min{1, xi/(2q sum_psi),
    (xi/(2 K0 K1))**(n^2-1)}; exact rational arithmetic.

    ``k0k1_upper`` must be a certified upper bound for K0*K1 (a larger value
    only shrinks kappa, which stays admissible).
    """
    xi = Fraction(xi)
    if not (0 < xi < 1):
        raise ConfigError(f"xi = {xi} outside (0, 1)")
    if sum_psi <= 0 or k0k1_upper <= 0:
        raise ConfigError("sum_psi and K0*K1 must be positive")
    bound = min(
        Fraction(1),
        xi / (2 * q * sum_psi),
        (xi / (2 * k0k1_upper)) ** (n * n - 1),
    )
    r = 0
    while Fraction(q) ** (-r) >= bound:
        r += 1
    return r
