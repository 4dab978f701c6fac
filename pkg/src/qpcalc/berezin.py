"""Berezin integration over odd coordinates and the Berezinian of even supermatrices."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import _linalg
from .errors import InvalidData, NotInvertible, SingularD
from .graded_core import GradedAlgebra, GradedPolynomial, derive, substitute
from .sampling import random_scalar

# Measure convention: in  int dth^1 ... dth^k  the rightmost differential acts
# first, each as a left derivative.  Hence int dth^1 dth^2 (th^2 th^1) = +1.
MEASURE_ORDER = "rightmost-first"


def berezin_integral(p: GradedPolynomial, variables: Sequence) -> GradedPolynomial:
    alg = p.algebra
    keys = []
    for v in variables:
        c = alg.coordinates[alg.position(v)]
        if not c.parity:
            raise InvalidData(f"{c} is even; only odd variables can be integrated")
        if c.key in keys:
            raise InvalidData(f"{c} appears twice in the measure")
        keys.append(c.key)
    out = p
    for key in reversed(keys):
        out = derive(out, key, "left")
    return out


def change_odd_variables(p: GradedPolynomial, variables: Sequence, M) -> GradedPolynomial:
    """``p`` with ``th^i -> sum_j M[i][j] th^j`` (``M`` a rational matrix).

    For the top monomial ``int p(M th) = det(M) int p``, i.e. the integral
    scales by the inverse of the Berezinian of the purely odd map.
    """
    alg = p.algebra
    th = [alg.var(alg.coordinates[alg.position(v)].key) for v in variables]
    assignment = {}
    for i, v in enumerate(variables):
        image = alg.zero()
        for j in range(len(variables)):
            if M[i][j]:
                image = image + th[j].scale(M[i][j])
        assignment[alg.coordinates[alg.position(v)].key] = image
    return substitute(p, assignment)


def _is_even(p: GradedPolynomial) -> bool:
    return all(p.algebra.mono_parity(m) == 0 for m in p.terms)


def _is_odd(p: GradedPolynomial) -> bool:
    return all(p.algebra.mono_parity(m) == 1 for m in p.terms)


def even_inverse(u: GradedPolynomial) -> GradedPolynomial:
    """Inverse of an even element with invertible body, by a terminating geometric series."""
    alg = u.algebra
    b = u.constant_term()
    if not b:
        raise NotInvertible(f"body of {u} is zero")
    n = (u - alg.const(b)).scale(1 / b)
    odd_count = sum(alg.parities)
    out, power = alg.one(), alg.one()
    for k in range(1, odd_count // 2 + 2):
        power = power * n
        if power.is_zero():
            return out.scale(1 / b)
        out = out + (power if k % 2 == 0 else -power)
    raise NotInvertible(f"{u} is not body plus nilpotent")


@dataclass(frozen=True)
class SuperMatrix:
    """Even supermatrix ``[[A, B], [C, D]]``: ``A`` p x p and ``D`` q x q with even
    entries, ``B`` and ``C`` with odd entries."""

    algebra: GradedAlgebra
    A: tuple
    B: tuple
    C: tuple
    D: tuple

    def __post_init__(self):
        p, q = len(self.A), len(self.D)
        shapes = {"A": (self.A, p, p), "B": (self.B, p, q), "C": (self.C, q, p), "D": (self.D, q, q)}
        for name, (block, rows, cols) in shapes.items():
            if len(block) != rows or any(len(r) != cols for r in block):
                raise InvalidData(f"block {name} must be {rows}x{cols}")
            check = _is_odd if name in "BC" else _is_even
            for row in block:
                for entry in row:
                    if not check(entry):
                        raise InvalidData(f"block {name} entry {entry} has the wrong parity")

    @classmethod
    def build(cls, algebra: GradedAlgebra, A, B=None, C=None, D=None) -> "SuperMatrix":
        def lift(block, rows, cols):
            if block is None:
                return tuple(tuple(algebra.zero() for _ in range(cols)) for _ in range(rows))
            return tuple(tuple(e if isinstance(e, GradedPolynomial) else algebra.const(e) for e in r)
                         for r in block)
        p, q = len(A), len(D or ())
        return cls(algebra, lift(A, p, p), lift(B, p, q), lift(C, q, p), lift(D, q, q))

    @classmethod
    def identity(cls, algebra: GradedAlgebra, p: int, q: int) -> "SuperMatrix":
        eye = lambda n: [[int(i == j) for j in range(n)] for i in range(n)]
        return cls.build(algebra, eye(p), None, None, eye(q))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.A), len(self.D)

    def rows(self) -> list[list[GradedPolynomial]]:
        return [list(a) + list(b) for a, b in zip(self.A, self.B)] + \
               [list(c) + list(d) for c, d in zip(self.C, self.D)]

    def __matmul__(self, other: "SuperMatrix") -> "SuperMatrix":
        if self.shape != other.shape:
            raise InvalidData("supermatrix shapes differ")
        p, q = self.shape
        m, n = self.rows(), other.rows()
        size = p + q
        prod = [[sum((m[i][k] * n[k][j] for k in range(size)), self.algebra.zero()) for j in range(size)]
                for i in range(size)]
        return SuperMatrix.build(
            self.algebra,
            [r[:p] for r in prod[:p]], [r[p:] for r in prod[:p]],
            [r[:p] for r in prod[p:]], [r[p:] for r in prod[p:]],
        )


def _matmul(X, Y, zero):
    return [[sum((X[i][k] * Y[k][j] for k in range(len(Y))), zero) for j in range(len(Y[0]))]
            for i in range(len(X))]


def berezinian(M: SuperMatrix) -> GradedPolynomial:
    """``Ber(M) = det(A - B D^-1 C) / det(D)``."""
    alg = M.algebra
    p, q = M.shape
    one = alg.one()
    det_d = _linalg.det([list(r) for r in M.D], one)
    if not det_d.constant_term():
        raise SingularD("body of det D is zero")
    inv_det_d = even_inverse(det_d)
    if q == 0:
        return _linalg.det([list(r) for r in M.A], one)
    adj = _linalg.adjugate([list(r) for r in M.D], one)
    d_inv = [[e * inv_det_d for e in row] for row in adj]
    if p == 0:
        return inv_det_d
    bdc = _matmul(_matmul(M.B, d_inv, alg.zero()), M.C, alg.zero())
    schur = [[M.A[i][j] - bdc[i][j] for j in range(p)] for i in range(p)]
    return _linalg.det(schur, one) * inv_det_d


def random_even_nilpotent(odd: Sequence[GradedPolynomial], rng: random.Random, terms: int = 2) -> GradedPolynomial:
    out = odd[0].algebra.zero()
    for _ in range(terms):
        i, j = rng.sample(range(len(odd)), 2)
        out = out + (odd[i] * odd[j]).scale(random_scalar(rng))
    return out


def random_odd(odd: Sequence[GradedPolynomial], rng: random.Random, terms: int = 2) -> GradedPolynomial:
    out = odd[0].algebra.zero()
    for _ in range(terms):
        if len(odd) >= 3 and rng.random() < 0.3:
            i, j, k = rng.sample(range(len(odd)), 3)
            out = out + (odd[i] * odd[j] * odd[k]).scale(random_scalar(rng))
        else:
            out = out + odd[rng.randrange(len(odd))].scale(random_scalar(rng))
    return out


def random_supermatrix(algebra: GradedAlgebra, p: int, q: int, rng: random.Random) -> SuperMatrix:
    """Even supermatrix with nilpotent-extended entries and invertible body of ``D``."""
    odd = [algebra.var(c.key) for c in algebra.coordinates if c.parity]

    def even_block(n):
        while True:
            body = [[random_scalar(rng) if rng.random() < 0.8 else Fraction(0) for _ in range(n)] for _ in range(n)]
            try:
                _linalg.inverse(body)
                break
            except NotInvertible:
                continue
        return [[algebra.const(body[i][j]) + random_even_nilpotent(odd, rng, 1) for j in range(n)] for i in range(n)]

    B = [[random_odd(odd, rng) for _ in range(q)] for _ in range(p)]
    C = [[random_odd(odd, rng) for _ in range(p)] for _ in range(q)]
    return SuperMatrix.build(algebra, even_block(p), B, C, even_block(q))
