"""Exterior algebra over the 2n-dimensional flow space, with the projection
norm that discards components carrying two starred basis directions.

Basis labels, in canonical order (positions 0..2n-1):

    e_0 < e_*1 < ... < e_*(n-1) < e_1 < ... < e_n

Index sets are bitmasks over positions; the wedge sign is the parity of the
merge inversions.  The "plain" sublattice spanned by {e_0, e_1, ..., e_n}
hosts the rank-(n+1) module of integer vectors p*e_0 + sum q_i e_i whose flow
norms drive everything.

The unipotent point action u_x sends e_0, e_*i to themselves,
e_i -> x_i e_0 + e_*i + e_i (i < n) and
e_n -> (alpha_0 + sum alpha_i x_i) e_0 + sum alpha_i e_*i + e_n.
The diagonal action g_t multiplies e_0 by eps/delta', starred vectors by eps
and plain e_i by eps/T^(t+1); on a wedge each index multiplies its diagonal
monomials, so coefficients stay in the monomial-graded form.

Every coefficient of g_t u_x w for w over the plain sublattice is affine in x
(two affine slots would need e_0 twice), which the symbolic route exploits to
evaluate suprema over balls exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .exponents import NEG_INF, Exp, PrecisionInsufficient, is_neg_inf
from .fq import ConfigError, Fq
from .haar import UltraBall, sup_linear_on_ball
from .laurent import (
    Laurent,
    Poly,
    ScaledSeries,
    all_polys,
    flow_scalar_exponents,
)
from .qpow import QPow, qpow_min

from .dioph import Hyperplane, PsiFunction, ConditionReport, membership, gradient_class


# ---------------------------------------------------------------------------
# Basis positions and masks
# ---------------------------------------------------------------------------

def pos_e0() -> int:
    return 0


def pos_star(n: int, i: int) -> int:
    if not 1 <= i <= n - 1:
        raise ValueError("starred index out of range")
    return i


def pos_plain(n: int, i: int) -> int:
    if not 1 <= i <= n:
        raise ValueError("plain index out of range")
    return n - 1 + i


def star_mask(n: int) -> int:
    return ((1 << (n - 1)) - 1) << 1


def plain_positions(n: int) -> tuple:
    return (0,) + tuple(range(n, 2 * n))


def mask_bits(mask: int):
    p = 0
    while mask:
        if mask & 1:
            yield p
        mask >>= 1
        p += 1


def star_count(n: int, mask: int) -> int:
    return bin(mask & star_mask(n)).count("1")


def wedge_sign(a: int, b: int) -> int:
    """(-1)**inversions when concatenating sorted(a), sorted(b) and merging."""
    inv = 0
    for x in mask_bits(a):
        inv += bin(b & ((1 << x) - 1)).count("1")
    return -1 if inv & 1 else 1


# ---------------------------------------------------------------------------
# Multivectors with monomial-graded coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtContext:
    field: Fq
    n: int
    ram: int

    def scalar(self, x: Laurent) -> ScaledSeries:
        return ScaledSeries.from_laurent(self.ram, x)

    def scalar_one(self) -> ScaledSeries:
        return ScaledSeries.from_laurent(self.ram, Laurent.one(self.field))


@dataclass(frozen=True)
class MultiVector:
    """Sum over index masks of ScaledSeries coefficients; zeros pruned."""

    ctx: ExtContext
    coeffs: tuple  # sorted tuple of (mask, ScaledSeries)

    @staticmethod
    def make(ctx: ExtContext, items) -> "MultiVector":
        acc: dict[int, ScaledSeries] = {}
        for mask, c in items:
            if mask in acc:
                acc[mask] = acc[mask] + c
            else:
                acc[mask] = c
        pruned = tuple(sorted(
            (m, c) for m, c in acc.items() if not c.is_exact_zero
        ))
        return MultiVector(ctx, pruned)

    @staticmethod
    def zero(ctx: ExtContext) -> "MultiVector":
        return MultiVector(ctx, ())

    @staticmethod
    def basis(ctx: ExtContext, mask: int, coeff: ScaledSeries | None = None) -> "MultiVector":
        c = coeff if coeff is not None else ctx.scalar_one()
        return MultiVector.make(ctx, [(mask, c)])

    @staticmethod
    def from_plain_components(ctx: ExtContext, comps: dict) -> "MultiVector":
        """comps: {plain mask: Laurent or Poly coefficient}."""
        items = []
        for mask, c in comps.items():
            if isinstance(c, Poly):
                c = Laurent.from_poly(c)
            items.append((mask, ctx.scalar(c)))
        return MultiVector.make(ctx, items)

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def grade(self) -> int | None:
        gs = {bin(m).count("1") for m, _ in self.coeffs}
        return gs.pop() if len(gs) == 1 else None

    def coeff(self, mask: int) -> ScaledSeries:
        for m, c in self.coeffs:
            if m == mask:
                return c
        return ScaledSeries.from_laurent(self.ctx.ram, Laurent.zero(self.ctx.field))

    def __add__(self, other: "MultiVector") -> "MultiVector":
        return MultiVector.make(self.ctx, list(self.coeffs) + list(other.coeffs))

    def __neg__(self) -> "MultiVector":
        return MultiVector(self.ctx, tuple((m, -c) for m, c in self.coeffs))

    def scale(self, s: ScaledSeries) -> "MultiVector":
        return MultiVector.make(self.ctx, [(m, c * s) for m, c in self.coeffs])

    def scale_laurent(self, x: Laurent) -> "MultiVector":
        return MultiVector.make(self.ctx, [(m, c.scale_laurent(x)) for m, c in self.coeffs])

    def wedge(self, other: "MultiVector") -> "MultiVector":
        f = self.ctx.field
        items = []
        for m1, c1 in self.coeffs:
            for m2, c2 in other.coeffs:
                if m1 & m2:
                    continue
                s = wedge_sign(m1, m2)
                c = c1 * c2
                if s < 0:
                    c = -c
                items.append((m1 | m2, c))
        return MultiVector.make(self.ctx, items)

    def _norm_over(self, masks_ok) -> Exp:
        best = NEG_INF
        uncertified = []
        for m, c in self.coeffs:
            if not masks_ok(m):
                continue
            mant = c.mantissa
            if mant.has_certified_lead:
                e = c.val_exp()
                if best < e:
                    best = e
            else:
                uncertified.append(c.bound_exp())
        for b in uncertified:
            if not b <= best:
                raise PrecisionInsufficient(
                    "norm uncertified: unknown coefficient may dominate", bound_exp=b
                )
        return best

    def pi_norm(self) -> Exp:
        """Sup of |coefficient| over masks with at most one starred direction."""
        n = self.ctx.n
        return self._norm_over(lambda m: star_count(n, m) <= 1)

    def pi_star_norm(self) -> Exp:
        """Sup over masks inside the plain sublattice only."""
        n = self.ctx.n
        sm = star_mask(n)
        return self._norm_over(lambda m: not (m & sm))


def theta_vector(ctx: ExtContext, p: Poly, qvec) -> MultiVector:
    """p e_0 + sum q_i e_i as a grade-1 multivector."""
    comps = {1 << pos_e0(): p}
    for i, qi in enumerate(qvec, start=1):
        comps[1 << pos_plain(ctx.n, i)] = qi
    return MultiVector.from_plain_components(ctx, {m: c for m, c in comps.items()
                                                   if not c.is_zero})


def theta_wedges(ctx: ExtContext, ell: int, max_deg: int):
    """Nonzero elements of the ell-th wedge of the integer module with
    component degrees <= max_deg, as {plain mask: Poly} dictionaries."""
    n = ctx.n
    plain = plain_positions(n)
    masks = [sum(1 << p for p in sub) for sub in itertools.combinations(plain, ell)]
    polys = list(all_polys(ctx.field, max_deg))
    for combo in itertools.product(polys, repeat=len(masks)):
        if all(p.is_zero for p in combo):
            continue
        yield {m: c for m, c in zip(masks, combo) if not c.is_zero}


# ---------------------------------------------------------------------------
# Flow step and the diagonal action
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowStep:
    n: int
    t: int
    r: int
    beta: Fraction
    ram: int

    @staticmethod
    def make(n: int, t: int, beta, r: int = 0, ram: int | None = None) -> "FlowStep":
        beta = Fraction(beta)
        e_delta, e_base, e_eps = flow_scalar_exponents(n, t, r, beta)
        N = ram if ram is not None else _lcm(n + 1, beta.denominator)
        for e in (e_base, e_eps):
            if N % e.denominator != 0:
                raise ConfigError("ramification index does not resolve flow exponents")
        return FlowStep(n, t, r, beta, N)

    @property
    def e_delta(self) -> Fraction:
        return flow_scalar_exponents(self.n, self.t, self.r, self.beta)[0]

    @property
    def e_eps_base(self) -> Fraction:
        return flow_scalar_exponents(self.n, self.t, self.r, self.beta)[1]

    @property
    def e_eps(self) -> Fraction:
        return flow_scalar_exponents(self.n, self.t, self.r, self.beta)[2]

    def diag_exponent(self, pos: int) -> Fraction:
        if pos == 0:
            return self.e_eps - self.e_delta
        if 1 <= pos <= self.n - 1:
            return self.e_eps
        return self.e_eps - (self.t + 1)

    def diag_multiset(self) -> list:
        return [self.diag_exponent(p) for p in range(2 * self.n)]

    def mask_exponent(self, mask: int) -> Fraction:
        return sum((self.diag_exponent(p) for p in mask_bits(mask)), Fraction(0))

    def context(self, field: Fq) -> ExtContext:
        return ExtContext(field, self.n, self.ram)


def _lcm(a: int, b: int) -> int:
    import math

    return a * b // math.gcd(a, b)


def apply_gt(fs: FlowStep, v: MultiVector) -> MultiVector:
    return MultiVector.make(
        v.ctx, [(m, c.shift_by(fs.mask_exponent(m))) for m, c in v.coeffs]
    )


# ---------------------------------------------------------------------------
# The unipotent point action
# ---------------------------------------------------------------------------

def ux_images(ctx: ExtContext, h: Hyperplane, x) -> list:
    """Images of the 2n basis vectors under u_x at a concrete point x."""
    n = ctx.n
    f = ctx.field
    one = ctx.scalar_one()
    img = [None] * (2 * n)
    img[0] = MultiVector.basis(ctx, 1 << 0)
    for i in range(1, n):
        img[pos_star(n, i)] = MultiVector.basis(ctx, 1 << pos_star(n, i))
    for i in range(1, n):
        img[pos_plain(n, i)] = MultiVector.make(ctx, [
            (1 << 0, ctx.scalar(x[i - 1])),
            (1 << pos_star(n, i), one),
            (1 << pos_plain(n, i), one),
        ])
    xa = h.alpha_laurent(0)
    for i in range(1, n):
        xa = xa + h.alpha_laurent(i) * x[i - 1]
    items = [(1 << 0, ctx.scalar(xa))]
    for i in range(1, n):
        items.append((1 << pos_star(n, i), ctx.scalar(h.alpha_laurent(i))))
    items.append((1 << pos_plain(n, n), one))
    img[pos_plain(n, n)] = MultiVector.make(ctx, items)
    return img


def apply_ux(ctx: ExtContext, h: Hyperplane, x, v: MultiVector) -> MultiVector:
    img = ux_images(ctx, h, x)
    out = MultiVector.zero(ctx)
    for mask, c in v.coeffs:
        term = MultiVector.basis(ctx, 0, c)
        for p in mask_bits(mask):
            term = term.wedge(img[p])
        out = out + term
    return out


def flow_point(ctx: ExtContext, fs: FlowStep, h: Hyperplane, x, v: MultiVector) -> MultiVector:
    return apply_gt(fs, apply_ux(ctx, h, x, v))


# ---------------------------------------------------------------------------
# Symbolic route: coefficients of g_t u_x w as affine functions of x
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineForm:
    """const + grad . x with Laurent entries (length n-1 gradient)."""

    const: Laurent
    grad: tuple

    @staticmethod
    def constant(field: Fq, c: Laurent, dim: int) -> "AffineForm":
        return AffineForm(c, tuple(Laurent.zero(field) for _ in range(dim)))

    @property
    def is_const(self) -> bool:
        return all(g.is_exact_zero for g in self.grad)

    def __add__(self, other: "AffineForm") -> "AffineForm":
        return AffineForm(self.const + other.const,
                          tuple(a + b for a, b in zip(self.grad, other.grad)))

    def __neg__(self) -> "AffineForm":
        return AffineForm(-self.const, tuple(-g for g in self.grad))

    def scale(self, c: Laurent) -> "AffineForm":
        return AffineForm(self.const * c, tuple(g * c for g in self.grad))

    def mul(self, other: "AffineForm") -> "AffineForm":
        # products of two genuinely affine slots would leave the affine class;
        # the alternation of e_0 guarantees this never happens
        if other.is_const:
            return self.scale(other.const)
        if self.is_const:
            return other.scale(self.const)
        raise ArithmeticError("affine x affine product outside the affine class")

    def eval(self, x) -> Laurent:
        v = self.const
        for g, xi in zip(self.grad, x):
            v = v + g * xi
        return v

    def sup_on(self, ball: UltraBall) -> Exp:
        return sup_linear_on_ball(self.grad, self.const, ball)

    def is_zero_form(self) -> bool:
        return self.const.is_exact_zero and self.is_const


def ux_symbolic_images(ctx: ExtContext, h: Hyperplane) -> list:
    """Images of basis vectors with AffineForm coefficients (x symbolic)."""
    n, f = ctx.n, ctx.field
    d = n - 1
    zero = Laurent.zero(f)
    one_form = AffineForm.constant(f, Laurent.one(f), d)

    def unit_grad(i):
        return AffineForm(zero, tuple(
            Laurent.one(f) if k == i - 1 else zero for k in range(d)))

    img = [None] * (2 * n)
    img[0] = [(1 << 0, one_form)]
    for i in range(1, n):
        img[pos_star(n, i)] = [(1 << pos_star(n, i), one_form)]
    for i in range(1, n):
        img[pos_plain(n, i)] = [
            (1 << 0, unit_grad(i)),
            (1 << pos_star(n, i), one_form),
            (1 << pos_plain(n, i), one_form),
        ]
    xa = AffineForm(h.alpha_laurent(0), tuple(h.alpha_laurent(i) for i in range(1, n)))
    last = [(1 << 0, xa)]
    for i in range(1, n):
        last.append((1 << pos_star(n, i), AffineForm.constant(f, h.alpha_laurent(i), d)))
    last.append((1 << pos_plain(n, n), one_form))
    img[pos_plain(n, n)] = last
    return img


def flow_affine_forms(ctx: ExtContext, fs: FlowStep, h: Hyperplane, w_comps: dict) -> dict:
    """Coefficients of g_t u_x w: {mask: (Fraction shift, AffineForm)}.

    ``w_comps`` maps plain masks to Poly/Laurent coefficients.
    """
    f = ctx.field
    d = ctx.n - 1
    img = ux_symbolic_images(ctx, h)
    acc: dict[int, AffineForm] = {}
    for mask, wj in w_comps.items():
        wl = Laurent.from_poly(wj) if isinstance(wj, Poly) else wj
        terms = [(0, AffineForm.constant(f, wl, d))]
        for p in mask_bits(mask):
            new = []
            for m1, f1 in terms:
                for m2, f2 in img[p]:
                    if m1 & m2:
                        continue
                    form = f1.mul(f2)
                    if wedge_sign(m1, m2) < 0:
                        form = -form
                    new.append((m1 | m2, form))
            merged: dict[int, AffineForm] = {}
            for m, fo in new:
                merged[m] = merged[m] + fo if m in merged else fo
            terms = list(merged.items())
        for m, fo in terms:
            acc[m] = acc[m] + fo if m in acc else fo
    out = {}
    for m, fo in acc.items():
        if fo.is_zero_form():
            continue
        out[m] = (fs.mask_exponent(m), fo)
    return out


def sup_flow_norm_over_ball(ctx: ExtContext, fs: FlowStep, h: Hyperplane,
                            w_comps: dict, U: UltraBall,
                            projection: str = "pi") -> Exp:
    """Exact sup over the ball of the projected flow norm of g_t u_x w."""
    n = ctx.n
    sm = star_mask(n)
    forms = flow_affine_forms(ctx, fs, h, w_comps)
    best = NEG_INF
    pending = []
    for mask, (shift, form) in forms.items():
        if projection == "pi" and star_count(n, mask) > 1:
            continue
        if projection == "pi_star" and (mask & sm):
            continue
        try:
            e = form.sup_on(U)
            if not is_neg_inf(e):
                e = e + shift
        except PrecisionInsufficient as err:
            pending.append((err.bound_exp + shift) if err.bound_exp is not None else None)
            continue
        if best < e:
            best = e
    for b in pending:
        if b is None or not b <= best:
            raise PrecisionInsufficient("sup uncertified on a retained component",
                                        bound_exp=b)
    return best


# ---------------------------------------------------------------------------
# The coefficient vectors attached to masks containing e_0
# ---------------------------------------------------------------------------

def coeff_vector(ctx: ExtContext, I_mask: int, w_comps: dict) -> tuple:
    """c vector (length n+1, Laurent) with coefficient of e_I in the tilde
    action equal to (1, f(x)) . c; requires e_0 in I."""
    n, f = ctx.n, ctx.field
    if not (I_mask & 1):
        raise ValueError("mask must contain the e_0 direction")
    c = [Laurent.zero(f) for _ in range(n + 1)]
    wI = w_comps.get(I_mask, Poly.zero(f))
    c[0] = Laurent.from_poly(wI) if isinstance(wI, Poly) else wI
    for i in range(1, n + 1):
        pp = 1 << pos_plain(n, i)
        if I_mask & pp:
            continue
        J = (I_mask | pp) & ~1
        wJ = w_comps.get(J)
        if wJ is None:
            continue
        wJ = Laurent.from_poly(wJ) if isinstance(wJ, Poly) else wJ
        below = bin(J & (pp - 1)).count("1")
        if below & 1:
            wJ = -wJ
        c[i] = wJ
    return tuple(c)


def p_times(h: Hyperplane, c) -> tuple:
    """The block matrix [I_n | a^t] applied to c (length n+1 -> length n)."""
    n = h.n
    out = []
    for k in range(n):
        out.append(c[k] + h.alpha_laurent(k) * c[n])
    return tuple(out)


def max_pc_norm(ctx: ExtContext, h: Hyperplane, w_comps: dict, ell: int) -> Exp:
    """max over masks I containing e_0 (|I| = ell) of ||P c_{I,w}||."""
    n = ctx.n
    best = NEG_INF
    for sub in itertools.combinations(plain_positions(n)[1:], ell - 1):
        I_mask = 1 | sum(1 << p for p in sub)
        v = p_times(h, coeff_vector(ctx, I_mask, w_comps))
        e = NEG_INF
        for entry in v:
            if entry.is_exact_zero:
                continue
            if entry.has_certified_lead:
                ee = entry.val_exp()
                if e < ee:
                    e = ee
            elif not entry.bound_exp() <= e:
                raise PrecisionInsufficient("Pc norm uncertified",
                                            bound_exp=entry.bound_exp())
        if best < e:
            best = e
    return best


def lemma_enough_oracle(ctx: ExtContext, h: Hyperplane, ell: int, max_deg: int) -> bool:
    """Brute-force check that every nonzero degree-capped wedge has
    max_{0 in I} ||P c_{I,w}|| >= 1."""
    if not 2 <= ell <= ctx.n + 1:
        raise ConfigError("grade out of range for the lemma oracle")
    for w in theta_wedges(ctx, ell, max_deg):
        if max_pc_norm(ctx, h, w, ell) < 0:
            return False
    return True


# ---------------------------------------------------------------------------
# Norm equivalence constant and rho
# ---------------------------------------------------------------------------

def norm_equiv_constant(U: UltraBall) -> QPow:
    """Exact constant with sup_{x in U} |v_0 + sum v_i x_i| >= C' ||v||:
    C' = min(1, r) / max(1, ||center||)."""
    q = U.field.q
    from .laurent import sup_norm

    r = U.radius_exp
    c = sup_norm(U.center)
    c_exp = 0 if is_neg_inf(c) else max(0, int(c))
    return QPow.make(q, 1, min(0, r) - c_exp)


def rho_constant(q: int, n: int, delta: Fraction, c_prime: QPow, c_dprime: QPow) -> QPow:
    """The explicit flow lower-bound constant: min of the three grade bounds."""
    delta = Fraction(delta)
    mid = c_prime * QPow.make(q, 1, Fraction(2 * (n - 1), n + 1) - (n - 1))
    s = Fraction(1, n - delta + 1)
    low = c_dprime.pow_frac(s) * QPow.make(q, 1, s - 1)
    return qpow_min(QPow.make(q, Fraction(1, 2)), mid, low)


# ---------------------------------------------------------------------------
# The estimate sweep
# ---------------------------------------------------------------------------

@dataclass
class EstimateRecord:
    grade: int
    w_repr: str
    sup_exp: object
    bound: QPow
    passed: bool
    route: str
    note: str = ""


@dataclass
class EstimateReport:
    records: list
    chain_ok: bool
    worst_margin: Fraction | None

    @property
    def all_passed(self) -> bool:
        return self.chain_ok and all(r.passed for r in self.records if r.route != "excluded")


def middle_chain_values(q: int, fs: FlowStep, ell: int, c_prime: QPow) -> list:
    """The displayed chain for middle grades, each line as a QPow."""
    n, t, r, beta = fs.n, fs.t, fs.r, fs.beta
    e_eps, e_delta = fs.e_eps, fs.e_delta
    kappa = QPow.make(q, 1, Fraction(-r))
    line1 = c_prime * QPow.make(q, 1, ell * e_eps - e_delta - (t + 1) * (ell - 1))
    line2 = (c_prime * kappa.pow_frac(Fraction(ell, n + 1) - 1)
             * QPow.make(q, 1, Fraction(2 * (n - 1), n + 1)
                         - (Fraction(1, n + 1) - beta) * n * t
                         + n * t - (t + 1) * (n - 1)))
    line3 = c_prime * QPow.make(
        q, 1, Fraction(2 * (n - 1), n + 1) - (n - 1)
        + (1 - (Fraction(1, n + 1) - beta) * n) * t)
    final = c_prime * QPow.make(q, 1, Fraction(2 * (n - 1), n + 1) - (n - 1))
    return [line1, line2, line3, final]


def ell_one_balance_bound(q: int, fs: FlowStep, delta: Fraction, c_dprime: QPow) -> QPow:
    """The y-independent lower bound for grade 1: the balance point value of
    max{C'' (|eps|/|delta'|) y^-(n-delta), (|eps|/q^(t+1)) y}."""
    n, t = fs.n, fs.t
    s = n - delta + 1
    A = c_dprime * QPow.make(q, 1, fs.e_eps - fs.e_delta)
    B = QPow.make(q, 1, fs.e_eps - (t + 1))
    y0 = (A / B).pow_frac(Fraction(1, 1) / s)
    return B * y0


def ell_one_final_constant(q: int, n: int, delta: Fraction, c_dprime: QPow) -> QPow:
    s = Fraction(1, n - delta + 1)
    return c_dprime.pow_frac(s) * QPow.make(q, 1, s - 1)


def verify_estimates(ctx: ExtContext, fs: FlowStep, h: Hyperplane, U: UltraBall,
                     ell: int, max_deg: int, delta: Fraction,
                     cond_report: ConditionReport | None = None) -> EstimateReport:
    """Check the grade-appropriate flow lower bound for every enumerated w."""
    q = ctx.field.q
    n = ctx.n
    delta = Fraction(delta)
    c_prime = norm_equiv_constant(U)
    c_dprime = c_prime
    records = []
    chain_ok = True
    worst: Fraction | None = None

    if ell == n + 1:
        top_mask = 1 | (1 << pos_star(n, 1)) | sum(
            1 << pos_plain(n, i) for i in range(2, n + 1))
        bound = QPow.make(q, Fraction(1, 2))
        for w in theta_wedges(ctx, ell, max_deg):
            forms = flow_affine_forms(ctx, fs, h, w)
            shift, form = forms[top_mask]
            if not form.is_const:
                raise ArithmeticError("top coefficient unexpectedly depends on x")
            wI = next(iter(w.values()))
            expect = Fraction(int(wI.degree)) + fs.beta * (n + 1) * fs.t
            got = shift + form.const.val_exp()
            identity_ok = Fraction(got) == expect
            passed = identity_ok and QPow.make(q, 1, Fraction(got)) >= bound
            records.append(EstimateRecord(ell, _w_repr(w), got, bound, passed, "top"))
            worst = _margin(worst, QPow.make(q, 1, Fraction(got)), bound)
        return EstimateReport(records, True, worst)

    if 2 <= ell <= n:
        lines = middle_chain_values(q, fs, ell, c_prime)
        for a, b in zip(lines, lines[1:]):
            if not a >= b:
                chain_ok = False
        final = lines[-1]
        for w in theta_wedges(ctx, ell, max_deg):
            sup = sup_flow_norm_over_ball(ctx, fs, h, w, U, "pi")
            sup_star = sup_flow_norm_over_ball(ctx, fs, h, w, U, "pi_star")
            pc = max_pc_norm(ctx, h, w, ell)
            lemma_ok = pc >= 0
            sup_q = QPow.from_exp(q, sup)
            # estimate-1 right side with the actual lemma value
            est1 = lines[0] * QPow.from_exp(q, pc)
            ok = (QPow.from_exp(q, sup) >= QPow.from_exp(q, sup_star)
                  and QPow.from_exp(q, sup_star) >= est1
                  and lemma_ok and sup_q >= final)
            records.append(EstimateRecord(ell, _w_repr(w), sup, final, ok, "middle"))
            worst = _margin(worst, sup_q, final)
        return EstimateReport(records, chain_ok, worst)

    if ell == 1:
        if cond_report is None:
            raise ConfigError("grade-1 estimates need a condition report")
        if cond_report.verdict != "holds-up-to-D":
            raise ConfigError(
                "hyperplane fails the approximation condition structurally; "
                "grade-1 estimate certification refused")
        violators = {v.monic().sort_key() for v in cond_report.violations}
        bal = ell_one_balance_bound(q, fs, delta, c_dprime)
        final = ell_one_final_constant(q, n, delta, c_dprime)
        if not bal >= final:
            chain_ok = False
        direct_bound = c_prime * QPow.make(q, 1, fs.e_eps - fs.e_delta)
        for w in theta_wedges(ctx, 1, max_deg):
            comps = _grade1_components(ctx, w)
            qn = comps[-1]
            sup = sup_flow_norm_over_ball(ctx, fs, h, w, U, "pi")
            sup_q = QPow.from_exp(q, sup)
            if qn.is_zero:
                ok = sup_q >= direct_bound
                records.append(EstimateRecord(1, _w_repr(w), sup, direct_bound, ok,
                                              "direct", "q_n = 0"))
                worst = _margin(worst, sup_q, direct_bound)
                continue
            if qn.monic().sort_key() in violators:
                records.append(EstimateRecord(1, _w_repr(w), sup, final, True,
                                              "excluded", "q_n violates the condition"))
                continue
            dq = int(qn.degree)
            rhs3 = qpow_max(
                c_dprime * QPow.make(q, 1, fs.e_eps - fs.e_delta - (n - delta) * dq),
                QPow.make(q, 1, fs.e_eps - (fs.t + 1) + dq),
            )
            ok = sup_q >= rhs3 and rhs3 >= bal and sup_q >= final
            records.append(EstimateRecord(1, _w_repr(w), sup, final, ok, "condition"))
            worst = _margin(worst, sup_q, final)
        return EstimateReport(records, chain_ok, worst)

    raise ConfigError(f"grade {ell} out of range")


def qpow_max(*vals: QPow) -> QPow:
    best = vals[0]
    for v in vals[1:]:
        if v > best:
            best = v
    return best


def _grade1_components(ctx: ExtContext, w_comps: dict) -> list:
    n, f = ctx.n, ctx.field
    out = [w_comps.get(1 << pos_e0(), Poly.zero(f))]
    for i in range(1, n + 1):
        out.append(w_comps.get(1 << pos_plain(n, i), Poly.zero(f)))
    return out


def _w_repr(w_comps: dict) -> str:
    from .laurent import format_poly

    parts = []
    for m in sorted(w_comps):
        c = w_comps[m]
        s = format_poly(c) if isinstance(c, Poly) else str(c)
        parts.append(f"{m:x}:{s}")
    return ";".join(parts)


def _margin(worst, lhs: QPow, rhs: QPow):
    """Track the smallest certified lhs/rhs gap, as a rational lower bound."""
    if rhs.is_zero or lhs.is_zero:
        return worst
    ratio = (lhs / rhs).lower(32)
    if worst is None or ratio < worst:
        return ratio
    return worst


# ---------------------------------------------------------------------------
# beta selection and the small-gradient inclusion
# ---------------------------------------------------------------------------

def choose_beta(n: int, delta, ram: int | None = None) -> Fraction:
    """beta in (0, 1/(n+1)) making both chain exponents of t nonnegative.

    The binding constraint is beta >= 1/(n+1) - delta/(n+1-delta); the other
    (1 - (1/(n+1)-beta) n >= 0) holds automatically.  Returns the midpoint of
    the admissible interval, snapped to (1/ram)Z when ram is given.
    """
    delta = Fraction(delta)
    if not (0 < delta < n):
        raise ConfigError("delta outside (0, n)")
    hi = Fraction(1, n + 1)
    lo = max(Fraction(0), hi - delta / (n + 1 - delta))
    mid = (lo + hi) / 2
    if ram is None:
        return mid
    k = (mid * ram).__floor__()
    for cand in (Fraction(k, ram), Fraction(k + 1, ram)):
        if lo < cand < hi and cand > 0:
            return cand
    raise ConfigError(
        f"admissible beta interval ({lo}, {hi}) has no point in (1/{ram})Z; "
        "increase the ramification index")


def inclusion_check(ctx: ExtContext, fs: FlowStep, h: Hyperplane,
                    psi: PsiFunction, x, witness_cap_deg: int | None = None) -> dict:
    """At a point x: every small-gradient witness pair (qv, p) at shell t gives
    a lattice vector with flow norm < |eps|.

    Requires psi(q**t) <= q**(-n t) (the regime where the inclusion holds);
    returns {'applicable': bool, 'vacuous': bool, 'holds': bool, 'checked': int}.
    """
    t = fs.t
    if psi.s(t) > -ctx.n * t:
        return {"applicable": False, "vacuous": True, "holds": True, "checked": 0}
    from .dioph import shell_enumerate

    kappa_exp = -fs.r
    checked = 0
    holds = True
    for qvec in shell_enumerate(ctx.field, ctx.n, t):
        if gradient_class(h, qvec) != "small":
            continue
        if not membership(x, qvec, h, psi, kappa_exp):
            continue
        v = h.offset(qvec)
        for b, xi in zip(h.gradient(qvec), x):
            v = v + b * xi
        p = -(v.poly_part())
        theta = theta_vector(ctx, p, qvec)
        norm = flow_point(ctx, fs, h, x, theta).pi_norm()
        checked += 1
        if not norm < fs.e_eps:
            holds = False
    return {"applicable": True, "vacuous": checked == 0, "holds": holds,
            "checked": checked}
