import random
from fractions import Fraction

import pytest

from qpcalc import bracket_engine as be
from qpcalc.errors import DegreeMismatch, InvalidData, WrongChartDegree
from qpcalc.graded_core import Symbol
from qpcalc.sampling import random_homogeneous, random_polynomial
from qpcalc.structures import CourantData, CourantStructure, PoissonData, body_algebra, levi_civita


def sign(n):
    return -1 if n % 2 else 1


def test_darboux_pair_gives_delta():
    ch = be.cotangent_chart(2, 1)
    x, xi = ch.var("x", 1), ch.var("xi", 1)
    assert be.poisson_bracket(x, xi, ch) == ch.algebra.one()
    assert be.poisson_bracket(x, ch.var("xi", 2), ch).is_zero()
    assert be.poisson_bracket(xi, ch.var("xi", 2), ch).is_zero()


def test_metric_block_gives_inverse_metric():
    k = [[2, 1], [1, 1]]  # inverse [[1, -1], [-1, 2]]
    ch = be.courant_chart(1, k)
    e1, e2 = ch.var("eta", 1), ch.var("eta", 2)
    assert be.poisson_bracket(e1, e1, ch) == ch.algebra.const(1)
    assert be.poisson_bracket(e1, e2, ch) == ch.algebra.const(-1)
    assert be.poisson_bracket(e2, e2, ch) == ch.algebra.const(2)


def test_chart_validation():
    body = body_algebra(1)
    with pytest.raises(DegreeMismatch):
        be.Chart(list(body.coordinates) + [be.GradedCoordinate("y", (), 0)], 1,
                 [(("x", (1,)), ("y", ()))])
    with pytest.raises(InvalidData):
        be.courant_chart(1, [[0, 1], [2, 0]])  # not symmetric
    with pytest.raises(InvalidData):
        be.Chart(list(body.coordinates), 1, [])  # unpaired coordinate


def lie_theta(ch, C):
    """Theta = 1/2 C^c_ab c^a c^b b_c with C given as a function."""
    out = ch.algebra.zero()
    for a in range(1, 4):
        for b in range(1, 4):
            for c in range(1, 4):
                val = C(c, a, b)
                if val:
                    out = out + (ch.var("c", a) * ch.var("c", b) * ch.var("b", c)).scale(Fraction(val, 2))
    return out


def test_q_apply_on_lie_algebra_chart():
    ch = be.lie_algebra_chart(3)
    theta = lie_theta(ch, lambda c, a, b: levi_civita(c, a, b))
    q3 = be.q_apply(theta, ch.var("c", 3), ch)
    # {b_c, c^a} = +delta, so {Theta, c^3} = 1/2 C^3_ab c^a c^b = c^1 c^2
    assert q3 == ch.var("c", 1) * ch.var("c", 2)
    assert be.q_apply(theta, ch.algebra.one(), ch).is_zero()


def test_q_apply_on_poisson_chart():
    data = PoissonData.formal(2)
    ch = data.chart()
    theta = data.theta(ch)
    got = be.q_apply(theta, ch.var("x", 1), ch)
    pi12 = ch.algebra.embed(data(1, 2))
    # {xi_i, x^j} = -delta and Theta d_right/d xi_1 = -pi^12 xi_2
    assert got == pi12 * ch.var("xi", 2)


def test_q_apply_rejects_wrong_degree():
    ch = be.cotangent_chart(1, 1)
    with pytest.raises(DegreeMismatch):
        be.q_apply(ch.var("xi", 1), ch.var("x", 1), ch)


def test_master_examples():
    ch = be.lie_algebra_chart(3)
    assert be.master_obstruction(lie_theta(ch, lambda c, a, b: levi_civita(c, a, b)), ch).passed
    d2 = PoissonData.from_components(body_algebra(2), {(1, 2): body_algebra(2).var("x", 1)})
    assert be.master_obstruction(d2.theta(d2.chart()), d2.chart()).passed


def test_master_report_is_half_bracket():
    data = PoissonData.formal(3)
    ch = data.chart()
    theta = data.theta(ch)
    rep = be.master_obstruction(theta, ch)
    assert rep.verdict == "fail"
    assert rep.obstruction == be.poisson_bracket(theta, theta, ch).scale(Fraction(1, 2))


def test_derived_bracket_examples():
    cs = CourantStructure(CourantData.standard(1))
    ch, theta = cs.chart, cs.theta
    x = ch.var("x", 1)
    assert be.derived_bracket(x, x * x, theta, ch).is_zero()
    e = cs.section([1, 0])  # the section d/dx^1
    # anchor(e) x^1 = -{{e, Theta}, x^1} = 1
    assert be.derived_bracket(e, x, theta, ch) == -ch.algebra.one()


@pytest.mark.parametrize("n", [-1, 1, 2])
def test_bracket_axioms_random(n):
    if n == -1:
        ch = be.bv_chart([0, 1])
    elif n == 1:
        ch = be.cotangent_chart(2, 1)
    else:
        ch = be.courant_chart(1, [[0, 1], [1, 0]])
    alg = ch.algebra
    jets = [Symbol("f", 1).canonical((1,))[1]]
    rng = random.Random(7 + n)
    degrees = sorted({c.degree for c in alg.coordinates} | {0, 1, 2})
    pb = lambda f, g: be.poisson_bracket(f, g, ch)
    for _ in range(40):
        f, g, h = (random_homogeneous(alg, rng, degrees, jets=jets if n != -1 else ()) for _ in range(3))
        F, G = f.degree() - n, g.degree() - n
        assert pb(f, g) == pb(g, f).scale(-sign(F * G))
        assert pb(f, g * h) == pb(f, g) * h + (g * pb(f, h)).scale(sign(F * g.degree()))
        assert pb(f, pb(g, h)) == pb(pb(f, g), h) + pb(g, pb(f, h)).scale(sign(F * G))


def test_q_squared_identity():
    data = PoissonData.formal(2)
    ch = data.chart()
    theta = data.theta(ch)
    rng = random.Random(3)
    for _ in range(10):
        f = random_polynomial(ch.algebra, rng)
        lhs = be.q_apply(theta, be.q_apply(theta, f, ch), ch)
        rhs = be.poisson_bracket(be.poisson_bracket(theta, theta, ch), f, ch).scale(Fraction(1, 2))
        assert lhs == rhs


def test_bv_laplacian_examples():
    ch = be.bv_chart([0])
    phi, star = ch.var("phi", 1), ch.var("phistar", 1)
    assert be.bv_laplacian(ch.algebra.const(5), ch).is_zero()
    assert be.bv_laplacian(phi * star, ch) == ch.algebra.one()
    with pytest.raises(WrongChartDegree):
        be.bv_laplacian(phi, be.cotangent_chart(1, 1))


def test_bv_laplacian_squares_to_zero_and_is_compatible():
    ch = be.bv_chart([0, 1, -2])
    rng = random.Random(11)
    D = lambda h: be.bv_laplacian(h, ch)
    degrees = [-2, -1, 0, 1, 2]
    for _ in range(60):
        f, g = random_homogeneous(ch.algebra, rng, degrees), random_homogeneous(ch.algebra, rng, degrees)
        assert D(D(f)).is_zero()
        s = sign(f.degree())
        assert D(f * g) - D(f) * g - (f * D(g)).scale(s) == be.poisson_bracket(f, g, ch).scale(s)


def test_quantum_master_examples():
    ch = be.bv_chart([0, 0])
    s1, s2 = ch.var("phistar", 1), ch.var("phistar", 2)
    assert be.quantum_master_obstruction(s1 * s2, ch).passed
    phi, star = ch.var("phi", 1), ch.var("phistar", 1)
    rep = be.quantum_master_obstruction(phi * star, ch)
    assert not rep.passed
    assert 1 in rep.obstruction.hbar_coefficients()


def test_quantum_reduces_to_classical_at_hbar_zero():
    ch = be.bv_chart([0, 1])
    rng = random.Random(5)
    for _ in range(20):
        S = random_homogeneous(ch.algebra, rng, [0])
        q = be.quantum_master_obstruction(S, ch).obstruction
        assert be.at_hbar_zero(q) == be.poisson_bracket(S, S, ch)
