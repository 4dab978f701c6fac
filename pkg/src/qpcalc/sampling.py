"""Seeded random generators for polynomials, sections and supermatrices.

Every generator takes an explicit :class:`random.Random` so checks are
reproducible from a seed.
"""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Sequence

from .graded_core import GradedAlgebra, GradedPolynomial, JetSymbol, Monomial, mono_mul

COEFFS = (-3, -2, -1, 1, 2, 3, Fraction(1, 2), Fraction(-1, 2), Fraction(3, 2))


def random_scalar(rng: random.Random) -> Fraction:
    return Fraction(rng.choice(COEFFS))


def random_monomial(algebra: GradedAlgebra, rng: random.Random, max_factors: int = 3,
                    jets: Sequence[JetSymbol] = (), jet_prob: float = 0.3,
                    degree: int | None = None, tries: int = 50) -> GradedPolynomial:
    """A random monomial times a random coefficient; ``degree`` pins the total degree."""
    n = len(algebra.coordinates)
    degrees, parities = algebra.degrees, algebra.parities
    for _ in range(tries):
        picks = [rng.randrange(n) for _ in range(rng.randint(0, max_factors))]
        if degree is not None and sum(degrees[i] for i in picks) != degree:
            continue
        mono, sign = Monomial(), 1
        for pos in picks:
            factor = Monomial(odd=1 << pos) if parities[pos] else Monomial(even=((pos, 1),))
            prod = mono_mul(mono, factor)
            if prod is None:
                break
            s, mono = prod
            sign *= s
        else:
            if jets and rng.random() < jet_prob:
                mono = mono_mul(mono, Monomial(jets=(rng.choice(jets),)))[1]
            return GradedPolynomial(algebra, {mono: random_scalar(rng) * sign})
    return algebra.zero()


def random_polynomial(algebra: GradedAlgebra, rng: random.Random, max_terms: int = 3,
                      max_factors: int = 3, jets: Sequence[JetSymbol] = (),
                      degree: int | None = None) -> GradedPolynomial:
    out = algebra.zero()
    for _ in range(rng.randint(1, max_terms)):
        out = out + random_monomial(algebra, rng, max_factors, jets, degree=degree)
    return out


def random_homogeneous(algebra: GradedAlgebra, rng: random.Random, degrees: Sequence[int],
                       max_terms: int = 3, max_factors: int = 3,
                       jets: Sequence[JetSymbol] = ()) -> GradedPolynomial:
    """Nonzero homogeneous polynomial of a degree drawn from ``degrees``."""
    for _ in range(100):
        p = random_polynomial(algebra, rng, max_terms, max_factors, jets, degree=rng.choice(degrees))
        if not p.is_zero():
            return p
    raise RuntimeError("could not sample a nonzero homogeneous polynomial")


def random_body_polynomial(algebra: GradedAlgebra, rng: random.Random, max_degree: int = 2,
                           max_terms: int = 3, allow_zero: bool = True) -> GradedPolynomial:
    """Random polynomial in the degree-0 coordinates with total degree <= ``max_degree``."""
    body = [c.key for c in algebra.body]
    monos = []
    for d in range(max_degree + 1):
        monos.extend(combinations_with_replacement(body, d))
    while True:
        out = algebra.zero()
        for _ in range(rng.randint(1, max_terms)):
            term = algebra.const(random_scalar(rng))
            for key in rng.choice(monos):
                term = term * algebra.var(key)
            out = out + term
        if allow_zero or not out.is_zero():
            return out


def hbar_monomial(algebra: GradedAlgebra) -> GradedPolynomial:
    return GradedPolynomial(algebra, {Monomial(hbar=1): Fraction(1)})
