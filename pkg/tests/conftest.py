import pytest

from laurentlab.fq import Fq
from laurentlab.laurent import Laurent, Poly


MODULI = {
    2: None,
    3: None,
    4: (2, (1, 1, 1)),       # X^2 + X + 1 over F_2
    5: None,
    7: None,
    8: (2, (1, 1, 0, 1)),    # X^3 + X + 1 over F_2
    9: (3, (1, 0, 1)),       # X^2 + 1 over F_3
}


def make_field(q: int) -> Fq:
    spec = MODULI[q]
    if spec is None:
        return Fq(q)
    p, mod = spec
    a = len(mod) - 1
    return Fq(p, a, mod)


@pytest.fixture
def f2():
    return Fq(2)


@pytest.fixture
def f3():
    return Fq(3)


def lau(field, terms, prec=None):
    """Laurent element from {exponent: int coefficient}."""
    if not terms:
        return Laurent.big_o(field, prec) if prec is not None else Laurent.zero(field)
    hi = max(terms)
    lo = min(terms) if prec is None else prec
    coeffs = [field.elem(terms.get(k, 0)) for k in range(hi, lo - 1, -1)]
    return Laurent.make(field, hi, coeffs, prec)


def poly(field, ints) -> Poly:
    return Poly.from_ints(field, ints)
