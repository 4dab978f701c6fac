import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpcalc.errors import ChartMismatch, DegreeMismatch, UnknownCoordinate
from qpcalc.graded_core import (
    GradedAlgebra,
    GradedCoordinate,
    Symbol,
    derive,
    multiply,
    normalize,
    substitute,
)
from qpcalc.sampling import random_homogeneous, random_polynomial
from qpcalc.structures import levi_civita

TH1, TH2, TH3 = (GradedCoordinate("th", (i,), 1) for i in (1, 2, 3))
X1, X2 = GradedCoordinate("x", (1,), 0), GradedCoordinate("x", (2,), 0)
XI1, XI2 = GradedCoordinate("xi", (1,), 1), GradedCoordinate("xi", (2,), 1)
P2 = GradedCoordinate("p", (), 2)

ALG = GradedAlgebra([TH1, TH2, TH3, X1, X2, XI1, XI2, P2])
PI = Symbol("pi", 2, "antisymmetric")


def v(c):
    return ALG.var(c.key)


def test_coordinate_parity_follows_degree():
    assert GradedCoordinate("a", (), -1).parity == 1
    assert GradedCoordinate("a", (), 2).parity == 0


def test_duplicate_coordinates_rejected():
    with pytest.raises(Exception):
        GradedAlgebra([TH1, GradedCoordinate("th", (1,), 1)])


def test_canonical_order_is_degree_name_index():
    names = [(c.degree, c.name, c.index) for c in ALG.coordinates]
    assert names == sorted(names)


def test_normalize_swaps_odd_factors_with_sign():
    assert normalize([(1, [TH2, TH1])], ALG) == -(v(TH1) * v(TH2))


def test_normalize_odd_square_vanishes():
    assert normalize([(1, [TH1, TH1])], ALG).is_zero()


def test_even_odd_commute():
    assert (v(X1) * v(XI1) - v(XI1) * v(X1)).is_zero()


def test_normalize_unknown_coordinate():
    with pytest.raises(UnknownCoordinate):
        normalize([(1, [GradedCoordinate("zz", (), 0)])], ALG)


def test_normalize_idempotent():
    p = normalize([(3, [TH3, X1, TH1]), (Fraction(1, 2), [P2, P2])], ALG)
    assert normalize(p, ALG) == p


def test_multiply_examples():
    s = v(TH1) + v(TH2)
    assert multiply(s, s).is_zero()
    lhs = (ALG.const(2) + v(TH1)) * (ALG.const(3) + v(TH2))
    assert lhs == ALG.const(6) + v(TH1).scale(3) + v(TH2).scale(2) + v(TH1) * v(TH2)
    jet = ALG.jet(PI, 1, 2)
    assert (jet * v(XI1)) * v(XI2) == jet * (v(XI1) * v(XI2))


def test_even_coordinates_of_nonzero_degree_take_powers():
    assert str(v(P2) * v(P2)) == "p^2"


def test_multiply_rejects_other_chart():
    other = GradedAlgebra([TH1])
    with pytest.raises(ChartMismatch):
        multiply(v(TH1), other.var(TH1.key))


def test_symbol_symmetries():
    assert ALG.jet(PI, 2, 1) == -ALG.jet(PI, 1, 2)
    assert ALG.jet(PI, 1, 1).is_zero()
    k = Symbol("k", 2, "symmetric")
    assert ALG.jet(k, 2, 1) == ALG.jet(k, 1, 2)
    C = Symbol("C", 3, "totally-antisymmetric")
    assert ALG.jet(C, 3, 1, 2) == ALG.jet(C, 1, 2, 3)
    assert ALG.jet(C, 2, 1, 3) == -ALG.jet(C, 1, 2, 3)


def test_derive_examples():
    t12 = v(TH1) * v(TH2)
    assert derive(t12, TH1, "left") == v(TH2)
    assert derive(t12, TH1, "right") == -v(TH2)
    p = ALG.jet(PI, 1, 2) * v(XI1) * v(XI2)
    assert derive(p, X1) == ALG.jet(PI, 1, 2, deriv=[X1.key]) * v(XI1) * v(XI2)
    assert str(derive(p, X1)) == "pi[1,2],1*xi[1]*xi[2]"


def test_mixed_partials_commute_on_jets():
    j = ALG.jet(PI, 1, 2)
    assert derive(derive(j, X1), X2) == derive(derive(j, X2), X1)


def test_substitute_examples():
    j = PI.canonical((1, 2))[1]
    p = ALG.jet(PI, 1, 2) * v(XI1) * v(XI2)
    assert substitute(p, {j: v(X1)}) == v(X1) * v(XI1) * v(XI2)
    dp = derive(p, X1)
    assert substitute(dp, {j: v(X1)}) == v(XI1) * v(XI2)


def test_substitute_degree_mismatch():
    with pytest.raises(DegreeMismatch):
        substitute(v(X1), {X1.key: v(TH1)})


def test_substitute_su2_pattern():
    lie = GradedAlgebra([GradedCoordinate(n, (a,), 1) for n in "cb" for a in (1, 2, 3)])
    C = Symbol("C", 3, "antisymmetric")  # C[c, a, b] = C^c_ab
    c = [lie.var("c", a) for a in (1, 2, 3)]
    b = [lie.var("b", a) for a in (1, 2, 3)]
    theta = lie.zero()
    for i in range(3):
        for j in range(3):
            for k in range(3):
                theta = theta + lie.jet(C, i + 1, j + 1, k + 1) * c[j] * c[k] * b[i]
    theta = theta.scale(Fraction(1, 2))
    # C^3_12 = 1 and its cyclic images; every other component vanishes
    values = {C: lambda idx: lie.const(levi_civita(*idx))}
    expected = c[0] * c[1] * b[2] + c[1] * c[2] * b[0] + c[2] * c[0] * b[1]
    assert substitute(theta, values) == expected


# -- properties on random input ----------------------------------------------------------

seeds = st.integers(min_value=0, max_value=10**6)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_graded_commutativity(seed):
    rng = random.Random(seed)
    p = random_homogeneous(ALG, rng, [0, 1, 2, 3])
    q = random_homogeneous(ALG, rng, [0, 1, 2, 3])
    sign = (-1) ** (p.degree() * q.degree())
    assert p * q == (q * p).scale(sign)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_left_derivative_is_graded_leibniz(seed):
    rng = random.Random(seed)
    p = random_homogeneous(ALG, rng, [0, 1, 2, 3])
    q = random_polynomial(ALG, rng)
    c = rng.choice(ALG.coordinates)
    sign = (-1) ** (c.parity * p.degree())
    assert derive(p * q, c) == derive(p, c) * q + (p * derive(q, c)).scale(sign)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_derivatives_commute_up_to_koszul_sign(seed):
    rng = random.Random(seed)
    p = random_polynomial(ALG, rng, max_terms=4, max_factors=4)
    c1, c2 = rng.choice(ALG.coordinates), rng.choice(ALG.coordinates)
    sign = (-1) ** (c1.parity * c2.parity)
    assert derive(derive(p, c2), c1) == derive(derive(p, c1), c2).scale(sign)
    odd = rng.choice([TH1, TH2, TH3, XI1, XI2])
    assert derive(derive(p, odd), odd).is_zero()


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_substitute_is_multiplicative(seed):
    rng = random.Random(seed)
    p, q = random_polynomial(ALG, rng), random_polynomial(ALG, rng)
    assignment = {X1.key: v(X2) * v(X2) + ALG.const(1), TH1.key: v(TH2) + v(XI1).scale(2)}
    assert substitute(p * q, assignment) == substitute(p, assignment) * substitute(q, assignment)


def test_hbar_and_imaginary_unit():
    i = ALG.imag_unit()
    assert i * i == ALG.const(-1)
    assert (ALG.hbar() * ALG.hbar()).degree() == 0
