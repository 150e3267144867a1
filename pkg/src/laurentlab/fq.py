"""Arithmetic in the finite field F_q, q = p**a.

Elements are coefficient tuples of length ``a`` over Z/p: ``(c0, ..., c_{a-1})``
represents c0 + c1*X + ... reduced modulo a monic irreducible degree-a
polynomial supplied at construction.  For a = 1 the modulus is implicit and
elements are 1-tuples ``(c,)``.

The field object carries the operations; elements stay plain tuples so they
hash, compare and pickle with no ceremony.  Irreducibility of the modulus is
verified at construction by exhaustive trial division, which is adequate for
the desk-scale extensions (a <= 4) this package targets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass


class ConfigError(ValueError):
    """Invalid field/lab configuration."""


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    d = 2
    while d * d <= p:
        if p % d == 0:
            return False
        d += 1
    return True


# -- polynomial helpers over Z/p (coefficient tuples, lowest degree first) --

def _ptrim(c):
    i = len(c)
    while i > 0 and c[i - 1] == 0:
        i -= 1
    return tuple(c[:i])


def _pmul(x, y, p):
    if not x or not y:
        return ()
    out = [0] * (len(x) + len(y) - 1)
    for i, xi in enumerate(x):
        if xi:
            for j, yj in enumerate(y):
                out[i + j] = (out[i + j] + xi * yj) % p
    return _ptrim(out)


def _pmod(x, mod, p):
    # mod is monic
    x = list(x)
    dm = len(mod) - 1
    while len(x) > dm:
        lead = x[-1]
        if lead:
            shift = len(x) - 1 - dm
            for j, mj in enumerate(mod):
                x[shift + j] = (x[shift + j] - lead * mj) % p
        x.pop()
    return _ptrim(x)


def _pdivmod(x, y, p):
    # y nonzero; leading coefficient inverted mod p
    x = list(x)
    dy = len(y) - 1
    inv_lead = pow(y[-1], -1, p)
    q = [0] * max(0, len(x) - dy)
    while len(x) - 1 >= dy and x:
        lead = x[-1]
        if lead == 0:
            x.pop()
            continue
        c = (lead * inv_lead) % p
        shift = len(x) - 1 - dy
        q[shift] = c
        for j, yj in enumerate(y):
            x[shift + j] = (x[shift + j] - c * yj) % p
        x.pop()
    return _ptrim(q), _ptrim(x)


def _pgcd_ext(x, y, p):
    # returns (g, u, v) with u*x + v*y = g
    r0, r1 = _ptrim(x), _ptrim(y)
    s0, s1 = (1,), ()
    t0, t1 = (), (1,)
    while r1:
        q, r = _pdivmod(r0, r1, p)
        r0, r1 = r1, r
        s0, s1 = s1, _ptrim([a - b for a, b in itertools.zip_longest(s0, _pmul(q, s1, p), fillvalue=0)])
        s1 = tuple(c % p for c in s1)
        t0, t1 = t1, _ptrim([a - b for a, b in itertools.zip_longest(t0, _pmul(q, t1, p), fillvalue=0)])
        t1 = tuple(c % p for c in t1)
    return r0, s0, t0


def _irreducible(mod, p) -> bool:
    """Trial division by every monic polynomial of degree 1..deg/2."""
    deg = len(mod) - 1
    for d in range(1, deg // 2 + 1):
        for low in itertools.product(range(p), repeat=d):
            cand = low + (1,)
            _, rem = _pdivmod(mod, cand, p)
            if not rem:
                return False
    return True


@dataclass(frozen=True)
class Fq:
    """The finite field F_q with q = p**a, elements as coefficient tuples."""

    p: int
    a: int = 1
    modulus: tuple = ()

    def __post_init__(self):
        if not _is_prime(self.p):
            raise ConfigError(f"p = {self.p} is not prime")
        if self.a < 1:
            raise ConfigError("extension degree a must be >= 1")
        if self.a == 1:
            object.__setattr__(self, "modulus", (0, 1))
        else:
            mod = tuple(c % self.p for c in self.modulus)
            if len(mod) != self.a + 1 or mod[-1] != 1:
                raise ConfigError("modulus must be monic of degree a")
            if not _irreducible(mod, self.p):
                raise ConfigError("modulus is reducible over F_p")
            object.__setattr__(self, "modulus", mod)

    @property
    def q(self) -> int:
        return self.p ** self.a

    # -- element constructors --

    @property
    def zero(self):
        return (0,) * self.a

    @property
    def one(self):
        return (1,) + (0,) * (self.a - 1)

    def elem(self, coeffs) -> tuple:
        if isinstance(coeffs, int):
            coeffs = (coeffs,)
        c = tuple(int(x) % self.p for x in coeffs)
        if len(c) > self.a:
            c = _pmod(c, self.modulus, self.p)
        return c + (0,) * (self.a - len(c))

    def from_index(self, k: int) -> tuple:
        """Element number k in the lexicographic enumeration (base-p digits)."""
        digits = []
        for _ in range(self.a):
            digits.append(k % self.p)
            k //= self.p
        return tuple(digits)

    def elements(self):
        for k in range(self.q):
            yield self.from_index(k)

    def nonzero_elements(self):
        for x in self.elements():
            if any(x):
                yield x

    # -- arithmetic --

    def add(self, x, y):
        return tuple((a + b) % self.p for a, b in zip(x, y))

    def sub(self, x, y):
        return tuple((a - b) % self.p for a, b in zip(x, y))

    def neg(self, x):
        return tuple((-a) % self.p for a in x)

    def mul(self, x, y):
        prod = _pmod(_pmul(_ptrim(x), _ptrim(y), self.p), self.modulus, self.p)
        return prod + (0,) * (self.a - len(prod))

    def inv(self, x):
        xt = _ptrim(x)
        if not xt:
            raise ZeroDivisionError("inversion of zero in F_q")
        g, u, _ = _pgcd_ext(xt, self.modulus, self.p)
        # g is a nonzero constant since the modulus is irreducible
        c = pow(g[0], -1, self.p)
        out = tuple((ci * c) % self.p for ci in _pmod(u, self.modulus, self.p))
        return out + (0,) * (self.a - len(out))

    def pow(self, x, k: int):
        if k < 0:
            x, k = self.inv(x), -k
        r = self.one
        while k:
            if k & 1:
                r = self.mul(r, x)
            x = self.mul(x, x)
            k >>= 1
        return r

    def is_zero(self, x) -> bool:
        return not any(x)


def fq_arith(field: Fq, x, y, op: str):
    """Dispatch form of the field operations (add/mul/inv/neg); inv ignores y."""
    if op == "add":
        return field.add(x, y)
    if op == "mul":
        return field.mul(x, y)
    if op == "neg":
        return field.neg(x)
    if op == "inv":
        return field.inv(x)
    raise ValueError(f"unknown op {op!r}")
