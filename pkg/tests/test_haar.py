import random
from fractions import Fraction

import pytest

from laurentlab.exponents import NEG_INF, PrecisionInsufficient
from laurentlab.fq import Fq
from laurentlab.haar import (
    Ball1,
    CellGrid,
    ConstancyCertificate,
    ExactMeasure,
    TRIVIALLY_CONSTANT,
    UltraBall,
    affine_solution_ball,
    affine_sublevel_measure,
    ball_union_measure,
    ceil_log_q,
    exact_measure_of,
    strip_measure,
    subballs,
    sup_linear_on_ball,
)
from laurentlab.laurent import Laurent, abs_value

from conftest import lau


def unit_ball(field, dim=1):
    return UltraBall.at_zero(field, dim, 0)


# -- measures -----------------------------------------------------------------

def test_measure_normalization(f2, f3):
    assert unit_ball(f2).measure() == 1
    assert UltraBall.at_zero(f2, 3, -2).measure().as_fraction() == Fraction(1, 64)
    assert UltraBall.at_zero(f3, 1, 1).measure().as_fraction() == 3


def test_exact_measure_arithmetic():
    a = ExactMeasure.make(2, 3, -2)
    b = ExactMeasure.make(2, 1, -2)
    assert (a + b).as_fraction() == 1
    assert a.scaled(2).as_fraction() == 3
    assert a > b
    assert ExactMeasure.make(2, 4, -2) == ExactMeasure.make(2, 1, 0)


def test_every_member_is_a_center(f2):
    rng = random.Random(3)
    ball = UltraBall.at_zero(f2, 2, -1)
    grid = CellGrid(ball, 3)
    reps = list(grid.representatives())
    for rep in rng.sample(reps, 10):
        moved = ball.recenter(rep)
        assert moved.measure() == ball.measure()
        for other in rng.sample(reps, 10):
            assert moved.contains(other)


# -- grids ---------------------------------------------------------------------

def test_cell_count_formula(f2, f3):
    for field in (f2, f3):
        for rad in (0, 1, -1):
            for m in (1, 2):
                if -m > rad:
                    continue
                g = CellGrid(UltraBall.at_zero(field, 2, rad), m)
                assert g.cell_count == field.q ** ((rad + m) * 2)
                assert len(set(
                    tuple((x.lead, x.coeffs) for x in rep) for rep in g.representatives()
                )) == g.cell_count


def test_cells_cover_and_are_disjoint(f2):
    # every representative at a finer grid lies in exactly one cell
    ball = unit_ball(f2)
    coarse = CellGrid(ball, 1)
    fine = CellGrid(ball, 3)
    cells = [UltraBall(rep, -1) for rep in coarse.representatives()]
    for rep in fine.representatives():
        assert sum(1 for c in cells if c.contains(rep)) == 1


# -- exact_measure_of ------------------------------------------------------------

def test_strict_sublevel_unit_ball(f2):
    # {|x| < q^-1} on the unit ball = ball of radius q^-2: measure 1/4
    ball = unit_ball(f2)
    grid = CellGrid(ball, 2)
    cert = ConstancyCertificate(grad_exp=0, level=1)

    def pred(rep):
        x = rep[0]
        return x.bound_exp() <= -2 if not x.has_certified_lead else x.val_exp() <= -2

    assert exact_measure_of(pred, grid, cert).as_fraction() == Fraction(1, 4)


def test_always_true_predicate(f3):
    ball = UltraBall.at_zero(f3, 2, 0)
    grid = CellGrid(ball, 1)
    assert exact_measure_of(lambda rep: True, grid, TRIVIALLY_CONSTANT) == ball.measure()


def test_zero_function_full_measure(f2):
    ball = unit_ball(f2)
    grid = CellGrid(ball, 1)
    pred = lambda rep: (rep[0] - rep[0]).is_exact_zero
    assert exact_measure_of(pred, grid, TRIVIALLY_CONSTANT) == ball.measure()


def test_certificate_refusal(f2):
    ball = unit_ball(f2)
    grid = CellGrid(ball, 1)
    cert = ConstancyCertificate(grad_exp=0, level=1)  # needs m >= 2
    with pytest.raises(PrecisionInsufficient):
        exact_measure_of(lambda rep: True, grid, cert)


def test_resolution_independence(f2):
    ball = unit_ball(f2)
    cert = ConstancyCertificate(grad_exp=0, level=1)

    def pred(rep):
        x = rep[0]
        return x.is_exact_zero or (x.has_certified_lead and x.val_exp() <= -2) \
            or (not x.has_certified_lead and x.bound_exp() <= -2)

    m2 = exact_measure_of(pred, CellGrid(ball, 2), cert)
    m3 = exact_measure_of(pred, CellGrid(ball, 3), cert)
    assert m2 == m3


# -- sup of affine functions -------------------------------------------------

def test_sup_identity_on_unit_ball(f2):
    ball = unit_ball(f2)
    assert sup_linear_on_ball((Laurent.one(f2),), Laurent.zero(f2), ball) == 0


def test_sup_gradient_vs_constant(f2):
    # beta=(T), y=1, radius q^-1: max(q^0, q^1 * q^-1) = q^0
    ball = UltraBall.at_zero(f2, 1, -1)
    got = sup_linear_on_ball((lau(f2, {1: 1}),), Laurent.one(f2), ball)
    assert got == 0


def test_sup_scaling_homogeneity(f2):
    ball = UltraBall.at_zero(f2, 1, 0)
    b = lau(f2, {2: 1})
    y = lau(f2, {0: 1})
    base = sup_linear_on_ball((b,), y, ball)
    shifted = sup_linear_on_ball((b.shift(1),), y, ball)
    assert shifted == base + 1  # gradient dominates: scaling beta by T adds 1


def _sup_bruteforce(coeffs, const, ball, m):
    best = NEG_INF
    for rep in CellGrid(ball, m).representatives():
        v = const
        for b, x in zip(coeffs, rep):
            v = v + b * x
        e = v.val_exp() if v.has_certified_lead else NEG_INF
        if best < e:
            best = e
    return best


@pytest.mark.parametrize("q", [2, 3])
def test_sup_oracle_small(q):
    field = Fq(q)
    rng = random.Random(q * 100)
    for _ in range(60):
        dim = rng.choice([1, 2])
        ball = UltraBall.at_zero(field, dim, rng.choice([0, -1]))
        coeffs = tuple(
            lau(field, {rng.randint(-1, 2): rng.randrange(1, q)}) if rng.random() < 0.8
            else Laurent.zero(field)
            for _ in range(dim)
        )
        const = lau(field, {rng.randint(-2, 2): rng.randrange(1, q)})
        got = sup_linear_on_ball(coeffs, const, ball)
        grad = max((abs_value(c) for c in coeffs if not c.is_exact_zero), default=NEG_INF)
        # resolution high enough that the sup is attained on representatives
        m = 4 if grad is NEG_INF else int(grad) - min(int(got), 0) + 1
        m = max(m, 1 - ball.radius_exp, 1)
        assert got == _sup_bruteforce(coeffs, const, ball, m)


# -- strips -------------------------------------------------------------------

def test_strip_measure_d2(f2):
    # d=2, beta=(1,0), y=0, j=1, unit ball: {|x1| < 1/2} = {|x1| <= 1/4}
    ball = UltraBall.at_zero(f2, 2, 0)
    m = strip_measure((Laurent.one(f2), Laurent.zero(f2)), Laurent.zero(f2), 1, ball)
    assert m.as_fraction() == Fraction(1, 4)


def test_strip_empty_when_offset_large(f2):
    ball = unit_ball(f2)
    m = strip_measure((Laurent.one(f2),), lau(f2, {3: 1}), 1, ball)
    assert m == 0


def test_strip_fubini_bound_random(f3):
    # per-strip bound r(U)^(d-1) * q^-j / max|beta|
    rng = random.Random(17)
    for _ in range(100):
        d = rng.choice([1, 2])
        ball = UltraBall.at_zero(f3, d, rng.choice([0, 1]))
        coeffs = tuple(lau(f3, {rng.randint(0, 2): rng.randrange(1, 3)}) for _ in range(d))
        const = lau(f3, {rng.randint(-1, 2): rng.randrange(1, 3)})
        j = rng.randint(0, 3)
        got = strip_measure(coeffs, const, j, ball)
        e = max(int(abs_value(c)) for c in coeffs)
        bound = Fraction(3) ** (ball.radius_exp * (d - 1) - j - e)
        assert got.as_fraction() <= bound


def test_strip_oracle_grid(f2, f3):
    rng = random.Random(29)
    for field in (f2, f3):
        for _ in range(40):
            d = 1 if rng.random() < 0.7 else 2
            ball = UltraBall.at_zero(field, d, 0)
            coeffs = tuple(
                lau(field, {rng.randint(0, 1): rng.randrange(1, field.q)})
                for _ in range(d))
            const = lau(field, {rng.randint(-2, 1): rng.randrange(1, field.q)})
            j = rng.randint(0, 2)
            got = strip_measure(coeffs, const, j, ball)
            e = max(int(abs_value(c)) for c in coeffs)
            grid = CellGrid(ball, e + j + 1)

            def pred(rep):
                v = const
                for b, x in zip(coeffs, rep):
                    v = v + b * x
                return v.bound_exp() <= -j - 1

            oracle = exact_measure_of(pred, grid, ConstancyCertificate(e, j))
            assert got == oracle


def test_degenerate_all_zero_coeffs(f2):
    ball = unit_ball(f2)
    full = strip_measure((Laurent.zero(f2),), lau(f2, {-3: 1}), 1, ball)
    assert full == ball.measure()
    empty = strip_measure((Laurent.zero(f2),), Laurent.one(f2), 1, ball)
    assert empty == 0


# -- additivity / ball unions ---------------------------------------------------

def test_disjoint_cell_union_additivity(f3):
    ball = unit_ball(f3)
    grid = CellGrid(ball, 2)
    total = ExactMeasure.zero(3)
    for _ in grid.representatives():
        total = total + grid.cell_measure()
    assert total == ball.measure()


def test_ball_union_merging(f2):
    zero = Laurent.zero(f2)
    one = Laurent.one(f2)
    balls = [Ball1(zero, -2), Ball1(zero, -1), Ball1(one, -1), Ball1(lau(f2, {-1: 1}), -2)]
    # B(0,q^-1) contains B(0,q^-2) and B(T^-1, q^-2); B(1,q^-1) disjoint
    assert ball_union_measure(balls, 2).as_fraction() == Fraction(1, 2) + Fraction(1, 2)


def test_affine_solution_ball(f2):
    ball = unit_ball(f2)
    sol = affine_solution_ball(Laurent.one(f2), Laurent.zero(f2), -2, ball)
    assert sol is not None and sol.radius_exp == -2
    # |T*x + 1| <= q^-1 -> x = T^-1 + O(..): ball of radius q^-3 around T^-1
    sol = affine_solution_ball(lau(f2, {1: 1}), Laurent.one(f2), -2, ball)
    assert sol is not None and sol.radius_exp == -3
    assert sol.center.val_exp() == -1
    none = affine_solution_ball(Laurent.one(f2), lau(f2, {2: 1}), -1, ball)
    assert none is None


def test_affine_sublevel_matches_solution_ball(f3):
    rng = random.Random(41)
    for _ in range(80):
        ball = UltraBall.at_zero(f3, 1, rng.choice([0, 1]))
        coeff = lau(f3, {rng.randint(-1, 2): rng.randrange(1, 3)})
        const = lau(f3, {rng.randint(-2, 2): rng.randrange(1, 3)})
        s = rng.randint(-4, 1)
        m = affine_sublevel_measure((coeff,), const, s, ball)
        sol = affine_solution_ball(coeff, const, s, ball)
        expect = Fraction(0) if sol is None else Fraction(3) ** min(sol.radius_exp, ball.radius_exp)
        assert m.as_fraction() == expect


def test_subball_family(f2):
    fam = list(subballs(unit_ball(f2), -2))
    # resolutions 0,-1,-2: 1 + 2 + 4 balls
    assert len(fam) == 7
    assert ceil_log_q(2, 3) == 2 and ceil_log_q(3, 3) == 1 and ceil_log_q(5, 3) == 1


def test_dilation(f2, f3):
    assert unit_ball(f2).dilate(1).radius_exp == 2
    assert unit_ball(f3).dilate(3).radius_exp == 3
