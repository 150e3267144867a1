"""Sublevel-measure certificates: (C, alpha)-good functions, exactly.

A function f is (C, alpha)-good on U (w.r.t. the Haar measure) when for every
ball B inside U and every level eps > 0,

    measure{x in B : |f(x)| < eps}  <=  C * (eps / sup_B |f|)**alpha * measure(B).

In the ultrametric setting the ball family is finite (sub-balls are grid cells
at intermediate resolutions) and the levels only matter at value-group points
eps = q**-j, so the certificate is an exhaustive exact computation, never a
tolerance check.  Ratios are carried as exact q-power constants.
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
    ExactMeasure,
    UltraBall,
    affine_sublevel_measure,
    affine_solution_ball,
    subballs,
    sup_linear_on_ball,
)
from .laurent import Laurent, format_laurent
from .qpow import QPow


@dataclass(frozen=True)
class PolyFunction:
    """Multivariate polynomial over the Laurent field, evaluated exactly.

    ``terms`` maps exponent tuples to Laurent coefficients; affine instances
    (total degree <= 1) get closed-form norms and sublevel measures.
    """

    dim: int
    terms: tuple  # ((exps, Laurent), ...)

    @staticmethod
    def make(dim: int, term_map: dict) -> "PolyFunction":
        items = tuple(sorted(
            ((tuple(e), c) for e, c in term_map.items() if not c.is_exact_zero),
            key=lambda item: item[0]))
        return PolyFunction(dim, items)

    @staticmethod
    def affine(const: Laurent, grad) -> "PolyFunction":
        d = len(grad)
        tm = {(0,) * d: const}
        for i, g in enumerate(grad):
            e = [0] * d
            e[i] = 1
            tm[tuple(e)] = g
        return PolyFunction.make(d, tm)

    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self.terms), default=0)

    @property
    def is_affine(self) -> bool:
        return self.degree <= 1

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def affine_parts(self, field: Fq):
        const = Laurent.zero(field)
        grad = [Laurent.zero(field) for _ in range(self.dim)]
        for e, c in self.terms:
            if sum(e) == 0:
                const = c
            else:
                grad[e.index(1)] = c
        return const, tuple(grad)

    def eval(self, x) -> Laurent:
        field = x[0].field if x else None
        total = None
        for e, c in self.terms:
            v = c
            for xi, k in zip(x, e):
                for _ in range(k):
                    v = v * xi
            total = v if total is None else total + v
        if total is None:
            if field is None:
                raise ConfigError("cannot evaluate the zero polynomial dimension-free")
            return Laurent.zero(field)
        return total

    def scale(self, c: Laurent) -> "PolyFunction":
        return PolyFunction(self.dim, tuple((e, cc * c) for e, cc in self.terms))


def norm_on_ball(f: PolyFunction, B: UltraBall) -> Exp:
    """sup over the ball of |f|, exact.

    Affine: the closed ultrametric formula.  Higher degree: grid maximum at a
    resolution where the perturbation bound certifies attainment.
    """
    field = B.field
    if f.is_zero:
        return NEG_INF
    if f.is_affine:
        const, grad = f.affine_parts(field)
        return sup_linear_on_ball(grad, const, B)
    pert = _perturbation_base(f, B)
    m = max(1 - B.radius_exp, 1)
    while True:
        best = NEG_INF
        for rep in CellGrid(B, m).representatives():
            v = f.eval(rep)
            if v.has_certified_lead:
                e = v.val_exp()
                if best < e:
                    best = e
            elif not v.bound_exp() <= best:
                raise PrecisionInsufficient("polynomial norm uncertified",
                                            bound_exp=v.bound_exp())
        if not is_neg_inf(best) and pert - m <= best:
            return best
        if m > 40:
            raise PrecisionInsufficient("norm attainment not certified by depth 40")
        m += 2


def _perturbation_base(f: PolyFunction, B: UltraBall) -> int:
    """|f(x)-f(y)| <= q**(base - m) for same-cell points at resolution m."""
    rho = B.radius_exp
    worst = None
    for e, c in f.terms:
        d = sum(e)
        if d == 0:
            continue
        ce = c.bound_exp()
        if is_neg_inf(ce):
            continue
        cand = int(ce) + rho * (d - 1) + (0 if d == 1 else 0)
        worst = cand if worst is None or cand > worst else worst
    return worst if worst is not None else -(10 ** 9)


def sublevel_measure(f: PolyFunction, level_exp: int, B: UltraBall) -> ExactMeasure:
    """measure{x in B : |f(x)| <= q**level}, exact."""
    field = B.field
    if f.is_zero:
        return B.measure()
    if f.is_affine:
        const, grad = f.affine_parts(field)
        return affine_sublevel_measure(grad, const, level_exp, B)
    pert = _perturbation_base(f, B)
    m = max(pert - level_exp, 1 - B.radius_exp, 1)
    grid = CellGrid(B, m)
    count = 0
    for rep in grid.representatives():
        v = f.eval(rep)
        if v.bound_exp() <= level_exp:
            count += 1
        elif not v.has_certified_lead:
            raise PrecisionInsufficient("sublevel membership uncertified",
                                        bound_exp=v.bound_exp())
    return grid.cell_measure().times_int(count)


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------

@dataclass
class GoodCertificate:
    C: QPow
    alpha: Fraction
    m: int
    J: int
    ball_count: int
    worst_ratio: QPow
    passed: bool
    failures: list = dc_field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "C": _qpow_json(self.C),
            "alpha": str(self.alpha),
            "m": self.m,
            "J": self.J,
            "ball_count": self.ball_count,
            "worstRatio": _qpow_json(self.worst_ratio),
            "passed": self.passed,
            "failures": self.failures,
        }


def _qpow_json(v: QPow) -> dict:
    return {"m": str(v.m), "q_exponent": str(v.e)}


def _ratio(q: int, lhs: ExactMeasure, C: QPow, alpha: Fraction,
           eps_exp: int, norm_exp, ball_measure: ExactMeasure) -> QPow:
    rhs = C * QPow.make(q, 1, (Fraction(eps_exp) - Fraction(norm_exp)) * alpha) \
        * ball_measure.as_qpow()
    if rhs.is_zero:
        raise ConfigError("degenerate certificate right side")
    return lhs.as_qpow() / rhs


def _affine_ball_data(f: PolyFunction, B: UltraBall):
    """Per-ball invariants for an affine f: (grad_exp, grad_bound, w_exp, w_bound)
    where w is the value at the center; exps are None when uncertified."""
    const, grad = f.affine_parts(B.field)
    w = const
    for b, c in zip(grad, B.center):
        w = w + b * c
    e = NEG_INF
    u = NEG_INF
    for b in grad:
        if b.is_exact_zero:
            continue
        if b.has_certified_lead:
            if e < b.val_exp():
                e = b.val_exp()
        elif u < b.bound_exp():
            u = b.bound_exp()
    w_exp = w.val_exp() if w.has_certified_lead else None
    return e, u, w_exp, w.bound_exp()


def _affine_level_measure_exp(data, level, B: UltraBall):
    """Exponent of the sublevel measure (None for empty), from ball data.

    Mirrors the closed form used by affine_sublevel_measure.
    """
    e, u, w_exp, w_bound = data
    rho, d = B.radius_exp, B.dim
    if not (u <= e or (u + rho <= level and e + rho <= level)):
        raise PrecisionInsufficient("gradient size uncertified", bound_exp=u)

    def w_le(s):
        if w_exp is not None:
            return w_exp <= s
        if w_bound <= s:
            return True
        raise PrecisionInsufficient("sublevel membership uncertified", bound_exp=w_bound)

    if is_neg_inf(e):
        return rho * d if w_le(level) else None
    if e + rho <= level:
        return rho * d if w_le(level) else None
    if w_le(e + rho):
        return (level - int(e)) + rho * (d - 1)
    return None


def _affine_norm_exp(data, B: UltraBall) -> Exp:
    e, u, w_exp, w_bound = data
    grad_term = NEG_INF if is_neg_inf(e) else e + B.radius_exp
    cands = [grad_term]
    if w_exp is not None:
        cands.append(w_exp)
    best = NEG_INF
    for c in cands:
        if best < c:
            best = c
    for bd in ([] if w_exp is not None else [w_bound]) + \
            ([] if is_neg_inf(u) else [u + B.radius_exp]):
        if not bd <= best:
            raise PrecisionInsufficient("norm uncertified", bound_exp=bd)
    return best


def check_good(f: PolyFunction, U: UltraBall, C, alpha, m: int, J: int) -> GoodCertificate:
    """Exhaustive certificate over every sub-ball of U down to radius q**-m
    and every level q**-j, 0 <= j <= J."""
    q = U.field.q
    alpha = Fraction(alpha)
    C = C if isinstance(C, QPow) else QPow.make(q, Fraction(C))
    if f.is_zero:
        raise ConfigError("the zero function admits no goodness certificate")
    worst = QPow.zero(q)
    failures = []
    count = 0
    affine = f.is_affine
    for B in subballs(U, -m):
        count += 1
        data = _affine_ball_data(f, B) if affine else None
        norm = _affine_norm_exp(data, B) if affine else norm_on_ball(f, B)
        if is_neg_inf(norm):
            raise ConfigError("function vanishes identically on a sub-ball")
        meas_exp = B.radius_exp * B.dim
        for j in range(0, J + 1):
            if affine:
                le = _affine_level_measure_exp(data, -j - 1, B)
                lhs = (ExactMeasure.zero(q) if le is None
                       else ExactMeasure.q_power(q, le))
            else:
                lhs = sublevel_measure(f, -j - 1, B)  # strict level q**-j
            if lhs.count == 0:
                continue
            ratio = _ratio(q, lhs, C, alpha, -j, norm, B.measure())
            if ratio > worst:
                worst = ratio
            if ratio > 1:
                failures.append({
                    "ball": _ball_json(B),
                    "eps_exp": -j,
                    "lhs": str(lhs.as_fraction()),
                    "rhs_ratio": _qpow_json(ratio),
                })
    return GoodCertificate(C, alpha, m, J, count, worst, not failures, failures)


def _ball_json(B: UltraBall) -> dict:
    return {"center": [format_laurent(c) for c in B.center],
            "radius_exp": B.radius_exp}


def min_c_for_alpha(f: PolyFunction, U: UltraBall, alpha, m: int, J: int) -> QPow:
    """The least constant making the certificate pass on the enumerated family."""
    q = U.field.q
    alpha = Fraction(alpha)
    if f.is_zero:
        raise ConfigError("the zero function admits no goodness certificate")
    if f.is_affine:
        # pure exponent sweep: ratio = q**(lhs - meas - alpha (eps - norm))
        worst_exp = None
        for B in subballs(U, -m):
            data = _affine_ball_data(f, B)
            norm = _affine_norm_exp(data, B)
            if is_neg_inf(norm):
                raise ConfigError("function vanishes identically on a sub-ball")
            meas_exp = B.radius_exp * B.dim
            for j in range(0, J + 1):
                le = _affine_level_measure_exp(data, -j - 1, B)
                if le is None:
                    continue
                r = Fraction(le - meas_exp) - alpha * (Fraction(-j) - Fraction(norm))
                if worst_exp is None or r > worst_exp:
                    worst_exp = r
        return QPow.zero(q) if worst_exp is None else QPow.make(q, 1, worst_exp)
    worst = QPow.zero(q)
    one = QPow.make(q, 1)
    for B in subballs(U, -m):
        norm = norm_on_ball(f, B)
        if is_neg_inf(norm):
            raise ConfigError("function vanishes identically on a sub-ball")
        for j in range(0, J + 1):
            lhs = sublevel_measure(f, -j - 1, B)
            ratio = _ratio(q, lhs, one, alpha, -j, norm, B.measure())
            if ratio > worst:
                worst = ratio
    return worst


# ---------------------------------------------------------------------------
# Closure properties of the certificate family
# ---------------------------------------------------------------------------

def scaling_preserves_certificate(f: PolyFunction, c: Laurent, U: UltraBall,
                                  alpha, m: int, J: int) -> bool:
    """Scaling f by a nonzero constant leaves the minimal constant unchanged."""
    return min_c_for_alpha(f, U, alpha, m, J) == min_c_for_alpha(f.scale(c), U, alpha, m, J)


def sup_pair_passes(f1: PolyFunction, f2: PolyFunction, U: UltraBall,
                    C, alpha, m: int, J: int) -> bool:
    """max(|f1|, |f2|) satisfies the same certificate as its arguments.

    Implemented for affine pairs in one variable: the sublevel set of the max
    is the intersection of two solution balls.
    """
    q = U.field.q
    alpha = Fraction(alpha)
    C = C if isinstance(C, QPow) else QPow.make(q, Fraction(C))
    field = U.field
    if U.dim != 1 or not (f1.is_affine and f2.is_affine):
        raise ConfigError("sup-pair check implemented for affine pairs in F^1")
    for B in subballs(U, -m):
        n1 = norm_on_ball(f1, B)
        n2 = norm_on_ball(f2, B)
        norm = max(n1, n2)
        for j in range(0, J + 1):
            level = -j - 1
            r1 = _region(f1, level, B, field)
            r2 = _region(f2, level, B, field)
            lhs_ball = _intersect(r1, r2, B)
            lhs = (ExactMeasure.zero(q) if lhs_ball is None
                   else ExactMeasure.q_power(q, min(lhs_ball.radius_exp, B.radius_exp)))
            ratio = _ratio(q, lhs, C, alpha, -j, norm, B.measure())
            if ratio > 1:
                return False
    return True


def _region(f: PolyFunction, level: int, B: UltraBall, field):
    const, grad = f.affine_parts(field)
    if all(g.is_exact_zero for g in grad):
        w = const
        ok = (w.val_exp() if w.has_certified_lead else w.bound_exp()) <= level
        return Ball1(B.center[0], B.radius_exp) if ok else None
    return affine_solution_ball(grad[0], const, level, B)


def _intersect(r1, r2, B: UltraBall):
    if r1 is None or r2 is None:
        return None
    try:
        if r1.contains_ball(r2):
            return r2
        if r2.contains_ball(r1):
            return r1
    except PrecisionInsufficient:
        raise
    return None


def quotient_transfer_constant(C: QPow, alpha, c1: QPow, c2: QPow) -> QPow:
    """If c1 <= |f/g| <= c2 pointwise and f is (C, alpha)-good, then g is
    (C (c2/c1)**alpha, alpha)-good."""
    alpha = Fraction(alpha)
    return C * (c2 / c1).pow_frac(alpha)


def weakening_passes(f: PolyFunction, U: UltraBall, C1, alpha1, C2, alpha2,
                     m: int, J: int) -> bool:
    """(C1, alpha1) certificate plus C1 <= C2, alpha2 <= alpha1 gives
    (C2, alpha2); verified by direct recomputation."""
    cert1 = check_good(f, U, C1, alpha1, m, J)
    cert2 = check_good(f, U, C2, alpha2, m, J)
    return cert1.passed and cert2.passed


# ---------------------------------------------------------------------------
# The flow-coefficient family (the application driving the constants)
# ---------------------------------------------------------------------------

def flow_coefficient_functions(ctx, fs, h, w_comps, retained_only=True):
    """Affine parts of the coefficients of g_t u_x w, for certification.

    The fractional monomial shift scales both sides of the defining
    inequality identically, so only the affine part over F matters.
    """
    from .exterior import flow_affine_forms, star_count

    forms = flow_affine_forms(ctx, fs, h, w_comps)
    out = []
    for mask, (shift, form) in sorted(forms.items()):
        if retained_only and star_count(ctx.n, mask) > 1:
            continue
        out.append((mask, PolyFunction.affine(form.const, form.grad)))
    return out


def certify_flow_family(ctx, fs, h, wedge_iter, U: UltraBall, alpha,
                        m: int, J: int):
    """Shared constant for every coefficient function of every w in the
    family: (max of per-function minimal constants, certificates all pass)."""
    q = ctx.field.q
    alpha = Fraction(alpha)
    best = QPow.zero(q)
    seen = {}
    total = 0
    for w in wedge_iter:
        for mask, f in flow_coefficient_functions(ctx, fs, h, w):
            key = _normalize_key(f, ctx.field)
            if key in seen:
                continue
            seen[key] = True
            total += 1
            c = min_c_for_alpha(f, U, alpha, m, J)
            if c > best:
                best = c
    return best, total


def _normalize_key(f: PolyFunction, field) -> tuple:
    # collapse exact repeats and scalar multiples (cheap normalization by the
    # first certified leading coefficient; T-power multiples recompute, which
    # is rare and harmless)
    const, grad = f.affine_parts(field)
    entries = [const, *grad]
    lead = next((e for e in entries if e.has_certified_lead and not e.is_exact_zero), None)
    if lead is None:
        return ("zero",)
    c = field.inv(lead.coeffs[0])
    normd = []
    for e in entries:
        v = e.scale(c)
        normd.append((v.lead - lead.lead, v.coeffs[:24], v.prec))
    return tuple(normd)
