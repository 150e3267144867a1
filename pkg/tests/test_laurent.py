import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from laurentlab.exponents import NEG_INF, PrecisionInsufficient
from laurentlab.fq import ConfigError, Fq
from laurentlab.laurent import (
    Laurent,
    Poly,
    RationalFunction,
    ScaledSeries,
    abs_value,
    all_polys,
    dist_to_poly_lattice,
    flow_scalar_exponents,
    format_laurent,
    make_flow_scalars,
    parse_laurent,
    sup_norm,
)

from conftest import lau, poly


# -- abs_value -------------------------------------------------------------

def test_abs_poly(f2):
    assert abs_value(poly(f2, [1, 0, 1])) == 2  # T^2 + 1
    assert abs_value(Poly.zero(f2)) == NEG_INF


def test_abs_rational_expansion(f2):
    # deg P = 3, deg Q = 5 expanded as Laurent -> exponent -2
    P = poly(f2, [1, 1, 0, 1])
    Q = poly(f2, [1, 0, 1, 1, 0, 1])
    x = Laurent.from_poly(P).div(Laurent.from_poly(Q), -12)
    assert x.val_exp() == -2


def test_abs_uncertified_zero_raises(f2):
    x = Laurent.big_o(f2, -3)
    with pytest.raises(PrecisionInsufficient):
        x.val_exp()
    assert x.bound_exp() == -4


# -- addition / subtraction with precision ----------------------------------

def test_char2_cancellation_with_precision(f2):
    # (T + 1 + O(T^-1)) + T  ->  1 + O(T^-1)
    x = lau(f2, {1: 1, 0: 1}, prec=0)
    y = lau(f2, {1: 1})
    z = x + y
    assert z.lead == 0 and z.prec == 0
    assert z.val_exp() == 0


def test_add_precision_is_max(f2):
    x = lau(f2, {2: 1}, prec=-5)
    y = lau(f2, {0: 1}, prec=-2)
    assert (x + y).prec == -2


def test_mul_precision_certified(f2):
    # x = T^5 + O(T^0), y = 1 + O(T^-10): error x*O(T^-10) reaches T^-6,
    # error O(T^0)*y reaches T^-1 -> only exponents >= 0 certified
    x = lau(f2, {5: 1}, prec=0)
    y = lau(f2, {0: 1}, prec=-10)
    z = x * y
    assert z.prec == 0
    assert z.val_exp() == 5


def test_invert_f3_geometric():
    f3 = Fq(3)
    # 1/(T-1) = T^-1 + T^-2 + T^-3 + T^-4 + O(T^-5) over F_3
    x = lau(f3, {1: 1, 0: -1})
    inv = x.invert(-4)
    for k in (-1, -2, -3, -4):
        assert inv.coeff(k) == f3.one
    check = x * inv
    one = Laurent.one(f3)
    diff = check - one
    assert diff.bound_exp() <= -4


def test_valuation_multiplicative_random(f2):
    rng = random.Random(7)
    for _ in range(200):
        x = _random_laurent(f2, rng)
        y = _random_laurent(f2, rng)
        if x.is_exact_zero or y.is_exact_zero:
            continue
        assert (x * y).val_exp() == x.val_exp() + y.val_exp()


def _random_laurent(field, rng, window=(-4, 4)):
    lo, hi = window
    lead = rng.randint(lo, hi)
    length = rng.randint(1, 5)
    coeffs = [field.from_index(rng.randrange(field.q)) for _ in range(length)]
    coeffs[0] = field.from_index(rng.randrange(1, field.q))
    return Laurent.make(field, lead, coeffs, None)


def test_ultrametric_exhaustive_window(f2):
    # all exact elements with support in exponents 2..-3 (window of width 6)
    exps = range(2, -4, -1)
    elems = []
    for bits in itertools.product([0, 1], repeat=6):
        terms = {e: b for e, b in zip(exps, bits)}
        elems.append(lau(f2, {k: v for k, v in terms.items() if v}))
    for x in elems:
        for y in elems:
            s = x + y
            bx, by = x.bound_exp(), y.bound_exp()
            assert s.bound_exp() <= max(bx, by)
            if bx != by:
                assert s.bound_exp() == max(bx, by)
            if not x.is_exact_zero and not y.is_exact_zero:
                assert (x * y).val_exp() == x.val_exp() + y.val_exp()


@given(st.integers(-6, 6), st.integers(-6, 6), st.integers(1, 4), st.integers(1, 4))
@settings(max_examples=60, deadline=None)
def test_ultrametric_hypothesis(lead_x, lead_y, nx, ny):
    f3 = Fq(3)
    x = Laurent.make(f3, lead_x, [f3.one] * nx, None)
    y = Laurent.make(f3, lead_y, [f3.elem(2)] * ny, None)
    s = x + y
    assert s.bound_exp() <= max(x.val_exp(), y.val_exp())
    if lead_x != lead_y:
        assert s.val_exp() == max(lead_x, lead_y)


def test_poly_discretely_embedded(f2):
    for p in all_polys(f2, 3, include_zero=False):
        assert abs_value(p) >= 0


# -- sup norm ---------------------------------------------------------------

def test_sup_norm_examples(f2):
    v = (lau(f2, {1: 1}), Laurent.one(f2), lau(f2, {-2: 1}))
    assert sup_norm(v) == 1
    assert sup_norm((Laurent.zero(f2),) * 3) == NEG_INF


def test_sup_norm_ultrametric_random(f3):
    rng = random.Random(11)
    for _ in range(200):
        x = [_random_laurent(f3, rng) for _ in range(3)]
        y = [_random_laurent(f3, rng) for _ in range(3)]
        s = [a + b for a, b in zip(x, y)]
        assert sup_norm(s) <= max(sup_norm(x), sup_norm(y))


# -- dist to the polynomial lattice ------------------------------------------

def test_dist_polynomial_is_zero(f2):
    x = Laurent.from_poly(poly(f2, [1, 1, 1]))
    assert dist_to_poly_lattice(x) == NEG_INF


def test_dist_simple_tail(f2):
    assert dist_to_poly_lattice(lau(f2, {-1: 1})) == -1
    assert dist_to_poly_lattice(lau(f2, {3: 1, -2: 1})) == -2


def test_dist_exact_rational_cancellation(f2):
    # 1/(T+1) * (T+1) = 1 exactly
    alpha = RationalFunction(Poly.one(f2), poly(f2, [1, 1]))
    assert alpha.mul_poly(poly(f2, [1, 1])).dist_to_poly_lattice() == NEG_INF
    assert alpha.dist_to_poly_lattice() == -1  # rem 1 / deg-1 denominator


def test_dist_oracle_vs_bruteforce(f2, f3):
    # brute force: min over p with deg p <= deg(x)+1
    rng = random.Random(23)
    for field in (f2, f3):
        for _ in range(100):
            x = _random_laurent(field, rng)
            got = dist_to_poly_lattice(x)
            cap = max(0, int(x.val_exp()) if not x.is_exact_zero else 0) + 1
            best = NEG_INF
            best = min(
                (abs_value(x + Laurent.from_poly(p)) for p in all_polys(field, cap)),
                default=NEG_INF,
            )
            assert got == best


# -- ScaledSeries ------------------------------------------------------------

def test_scaled_series_grading(f2):
    x = lau(f2, {2: 1, 0: 1})
    s = ScaledSeries.make(6, Fraction(5, 6), x)
    assert s.val_exp() == Fraction(5, 6) + 2
    t = s.shift_by(Fraction(7, 6))
    assert t.val_exp() == s.val_exp() + Fraction(7, 6)


def test_scaled_series_add_requires_same_grading(f2):
    a = ScaledSeries.monomial(6, f2, Fraction(1, 6))
    b = ScaledSeries.monomial(6, f2, Fraction(1, 3))
    with pytest.raises(ConfigError):
        a + b
    c = ScaledSeries.monomial(6, f2, Fraction(7, 6))  # differs by integer: rebases
    s = a + c
    assert s.val_exp() == Fraction(7, 6)  # 1/6 + 7/6: same leading? no: max
    # T^(1/6) + T^(7/6) has leading exponent 7/6
    assert not s.is_exact_zero


def test_scaled_series_mul(f2):
    a = ScaledSeries.monomial(6, f2, Fraction(1, 6))
    b = ScaledSeries.monomial(6, f2, Fraction(1, 2))
    assert (a * b).val_exp() == Fraction(2, 3)


# -- flow scalars -------------------------------------------------------------

def test_flow_scalars_basic(f2):
    d, eb, e = make_flow_scalars(f2, n=2, t=0, r=0, beta=Fraction(1, 6))
    assert eb.val_exp() == Fraction(1, 3)  # (n-1)/(n+1) at t=0
    assert d.val_exp() == 0
    assert e.val_exp() == Fraction(1, 3)


def test_flow_scalars_spec_values(f2):
    _, _, e = make_flow_scalars(f2, n=2, t=3, r=0, beta=Fraction(1, 6))
    assert e.val_exp() == Fraction(-1, 6)  # 1/2 + (-2)/3


def test_flow_scalars_kappa(f2):
    d, _, _ = make_flow_scalars(f2, n=2, t=1, r=2, beta=Fraction(1, 6))
    assert d.val_exp() == -(2 * 1 + 2)  # |delta'| = kappa * q^-nt with kappa = q^-2


def test_flow_scalars_beta_domain(f2):
    with pytest.raises(ConfigError):
        make_flow_scalars(f2, 2, 0, 0, Fraction(1, 3))
    with pytest.raises(ConfigError):
        make_flow_scalars(f2, 2, 0, 0, Fraction(0))


def test_flow_scalar_identity_top_exponent():
    # eps^(n+1) / (delta' T^((t+1)(n-1))) has exponent beta*(n+1)*t exactly
    for n in (2, 3):
        for t in range(4):
            for r in (0, 1, 3):
                beta = Fraction(1, 2 * (n + 1))
                ed, _, ee = flow_scalar_exponents(n, t, r, beta)
                assert ee * (n + 1) - ed - (t + 1) * (n - 1) == beta * (n + 1) * t


# -- serialization ------------------------------------------------------------

def test_format_parse_roundtrip(f2, f3):
    rng = random.Random(5)
    for field in (f2, f3):
        for _ in range(50):
            x = _random_laurent(field, rng)
            if rng.random() < 0.5:
                x = x.truncate(x.lead - rng.randint(1, 3))
            y = parse_laurent(field, format_laurent(x))
            assert y == x


def test_format_example(f2):
    x = lau(f2, {3: 1, 1: 1, 0: 1}, prec=-4)
    assert format_laurent(x) == "T^3 + T + 1 + O(T^-5)"
    assert parse_laurent(f2, "T^3 + T + 1 + O(T^-5)") == x


def test_parse_extension_field_vectors():
    from conftest import make_field

    f4 = make_field(4)
    x = Laurent.make(f4, 1, [f4.elem([1, 1]), f4.elem([0, 1])], None)
    assert parse_laurent(f4, format_laurent(x)) == x
