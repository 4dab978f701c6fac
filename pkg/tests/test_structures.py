import random
from fractions import Fraction
from itertools import product

import pytest

from qpcalc.bracket_engine import master_obstruction
from qpcalc.errors import InvalidData
from qpcalc.forms import AltForm
from qpcalc.sampling import random_body_polynomial
from qpcalc.structures import (
    JACOBI_NORMALIZATION,
    CourantData,
    CourantStructure,
    LieAlgebroidData,
    PoissonData,
    PreCourantData,
    TwistedPoissonData,
    body_algebra,
    courant_axiom_report,
    jacobiator,
    jacobiator_contraction,
    jacobiator_pairing,
    levi_civita,
    lie_algebroid_from_q,
    lie_algebroid_identities,
    master_defect_pairing,
    poisson_bracket_of_functions,
    poisson_equivalence_report,
    pre_courant_axiom_report,
    pre_courant_jacobiator,
    schouten_bracket,
    twisted_lie_algebroid_bracket,
    twisted_lie_algebroid_data,
    twisted_poisson_obstruction,
)


def linear_so3_pi():
    body = body_algebra(3)
    x = [body.var("x", i) for i in (1, 2, 3)]
    return PoissonData.from_function(
        body, lambda i, j: sum((x[k - 1].scale(levi_civita(i, j, k)) for k in (1, 2, 3)), body.zero()))


# -- Poisson -----------------------------------------------------------------------

def test_poisson_bracket_carries_one_half():
    body = body_algebra(2)
    data = PoissonData.from_components(body, {(1, 2): 1})
    assert poisson_bracket_of_functions(body.var("x", 1), body.var("x", 2), data) == body.const(Fraction(1, 2))


def test_poisson_bracket_self_vanishes():
    data = linear_so3_pi()
    rng = random.Random(1)
    for _ in range(10):
        f = random_body_polynomial(data.body, rng, 2, 3)
        assert poisson_bracket_of_functions(f, f, data).is_zero()


def test_poisson_bracket_linear_pi():
    data = linear_so3_pi()
    x = [data.body.var("x", i) for i in (1, 2, 3)]
    assert poisson_bracket_of_functions(x[0], x[1], data) == x[2].scale(Fraction(1, 2))


def test_pi_must_be_antisymmetric():
    body = body_algebra(2)
    with pytest.raises(InvalidData):
        PoissonData(body, ((body.zero(), body.one()), (body.one(), body.zero())))


def test_schouten_examples():
    ch = PoissonData.formal(2).chart()
    alg = ch.algebra
    x1, x2 = alg.var("x", 1), alg.var("x", 2)
    xi1, xi2 = alg.var("xi", 1), alg.var("xi", 2)
    assert schouten_bracket(xi1, xi2, ch).is_zero()
    assert schouten_bracket(x1 * xi2, x2, ch) == x1
    # vector fields: [x1 d2, x2 d1] = x1 d1 - x2 d2
    assert schouten_bracket(x1 * xi2, x2 * xi1, ch) == x1 * xi1 - x2 * xi2


def test_schouten_of_any_planar_bivector_vanishes():
    data = PoissonData.formal(2)
    theta = data.theta()
    assert schouten_bracket(theta, theta, data.chart()).is_zero()


def test_poisson_triangle_formal_d3():
    data = PoissonData.formal(3)
    rep = poisson_equivalence_report(data)
    assert not rep.obstructions["jacobi"].is_zero()
    assert rep.obstructions["agreement:master-jacobi"].is_zero()
    assert rep.obstructions["agreement:master-schouten"].is_zero()
    assert JACOBI_NORMALIZATION == Fraction(1, 6)


def test_poisson_triangle_linear_pi_passes():
    data = linear_so3_pi()
    assert poisson_equivalence_report(data).passed
    assert jacobiator_contraction(data).is_zero()


# -- twisted Poisson ------------------------------------------------------------------

def twisted_d4():
    body = body_algebra(4)
    x2 = body.var("x", 2)
    pi = PoissonData.from_components(body, {(1, 2): -1, (2, 4): x2, (3, 4): -1})
    H = AltForm(body, 4, 3, {(1, 2, 3): 1})
    return TwistedPoissonData(pi, H)


def test_twisted_with_zero_h_is_the_jacobiator():
    pi = PoissonData.formal(3)
    data = TwistedPoissonData(pi, AltForm.zero(pi.body, 3, 3))
    rep = twisted_poisson_obstruction(data)
    expected = jacobiator_contraction(pi).scale(JACOBI_NORMALIZATION)
    assert rep.obstructions[""] == expected


def test_twisted_planar_always_passes():
    pi = PoissonData.formal(2)
    assert twisted_poisson_obstruction(TwistedPoissonData(pi, AltForm.zero(pi.body, 2, 3))).passed


@pytest.mark.parametrize("c", [0, 1, Fraction(-5, 3)])
def test_twisted_linear_so3_passes_for_every_c(c):
    pi = linear_so3_pi()
    H = AltForm(pi.body, 3, 3, {(1, 2, 3): c})
    # both sides vanish separately: pi is Poisson and H(pi# a, pi# b, pi# c) is det(pi) = 0
    assert twisted_poisson_obstruction(TwistedPoissonData(pi, H)).passed


def test_twisted_nonzero_h_is_needed_in_d4():
    data = twisted_d4()
    assert twisted_poisson_obstruction(data).passed
    untwisted = TwistedPoissonData(data.poisson, AltForm.zero(data.body, 4, 3))
    assert not twisted_poisson_obstruction(untwisted).passed


def test_twisted_h_must_be_closed():
    body = body_algebra(4)
    pi = PoissonData.from_components(body, {})
    with pytest.raises(InvalidData):
        TwistedPoissonData(pi, AltForm(body, 4, 3, {(1, 2, 3): body.var("x", 4)}))


def test_twisted_bracket_constant_forms_vanish():
    body = body_algebra(3)
    pi = PoissonData.from_components(body, {(1, 2): 3, (2, 3): -1})
    data = TwistedPoissonData(pi, AltForm.zero(body, 3, 3))
    out = twisted_lie_algebroid_bracket([1, 2, 0], [0, 1, 5], data)
    assert all(v.is_zero() for v in out)


def test_twisted_bracket_is_alternating():
    data = twisted_d4()
    rng = random.Random(4)
    for _ in range(10):
        alpha = [random_body_polynomial(data.body, rng, 2, 2) for _ in range(4)]
        assert all(v.is_zero() for v in twisted_lie_algebroid_bracket(alpha, alpha, data))


def test_twisted_algebroid_is_lie_exactly_when_twisted_condition_holds():
    data = twisted_d4()
    assert lie_algebroid_from_q(twisted_lie_algebroid_data(data)).passed
    broken = TwistedPoissonData(data.poisson, AltForm(data.body, 4, 3, {(1, 2, 3): 2}))
    assert not twisted_poisson_obstruction(broken).passed
    assert not lie_algebroid_from_q(twisted_lie_algebroid_data(broken)).passed


# -- Lie algebroids -------------------------------------------------------------------

def test_tangent_algebroid_passes():
    assert lie_algebroid_from_q(LieAlgebroidData.tangent(3)).passed


def test_so3_action_algebroid_passes():
    data = LieAlgebroidData.so3_action()
    assert lie_algebroid_from_q(data).passed
    ids = lie_algebroid_identities(data)
    assert all(v.is_zero() for fam in ids.values() for v in fam.values())


def test_so3_with_plus_epsilon_anchor_breaks_anchor_compatibility():
    body = body_algebra(3)
    x = [body.var("x", i) for i in (1, 2, 3)]
    data = LieAlgebroidData.from_functions(
        body, 3,
        lambda i, a: sum((x[b - 1].scale(levi_civita(i, a, b)) for b in (1, 2, 3)), body.zero()),
        levi_civita)
    rep = lie_algebroid_from_q(data)
    failing = {name for name, v in rep.obstructions.items() if not v.is_zero()}
    assert failing and all(name.startswith("anchor") for name in failing)


def table_bracket(body, table):
    def C(c, a, b):
        if (c, a, b) in table:
            return table[(c, a, b)]
        if (c, b, a) in table:
            return -table[(c, b, a)]
        return 0
    return LieAlgebroidData.from_functions(body, 3, lambda i, a: 0, C)


def test_pointwise_lie_bundle_passes():
    # [e1,e2] = e3, [e2,e3] = x1 e1: every cyclic term vanishes, so this is a bundle of Lie algebras
    body = body_algebra(1)
    assert lie_algebroid_from_q(table_bracket(body, {(3, 1, 2): 1, (1, 2, 3): body.var("x", 1)})).passed


def test_broken_bracket_fails_jacobi():
    # [e1,e2] = e3, [e1,e3] = e1 leaves [e2,[e3,e1]] = e3
    body = body_algebra(1)
    data = table_bracket(body, {(3, 1, 2): 1, (1, 1, 3): 1})
    rep = lie_algebroid_from_q(data)
    assert not rep.passed
    assert any(name.startswith("jacobi") and not v.is_zero() for name, v in rep.obstructions.items())
    assert any(not v.is_zero() for v in lie_algebroid_identities(data)["jacobi"].values())


def test_bracket_coefficients_must_be_antisymmetric():
    with pytest.raises(InvalidData):
        LieAlgebroidData.from_functions(body_algebra(0), 2, lambda i, a: 0, lambda c, a, b: 1)


# -- Courant ---------------------------------------------------------------------------

def test_standard_inner_product_d1():
    cs = CourantStructure(CourantData.standard(1))
    x = cs.data.body.var("x", 1)
    X, a, Y, b = x, x * x + cs.data.body.const(2), cs.data.body.const(3), x.scale(-1)
    got = cs.inner(cs.section([X, a]), cs.section([Y, b]))
    assert got == cs.lift(X * b + Y * a)


def test_standard_anchor_and_frame_roundtrip():
    cs = CourantStructure(CourantData.standard(1))
    e = cs.section([1, 0])
    assert cs.anchor(e, cs.algebra.var("x", 1)) == cs.algebra.one()
    assert cs.frame(cs.section([5, 7])) == (cs.algebra.const(5), cs.algebra.const(7))


def test_dorfman_self_bracket_and_anchor_derivation():
    body = body_algebra(3)
    cs = CourantStructure(CourantData.standard(3, {(1, 2, 3): body.var("x", 1)}))
    rng = random.Random(9)
    for _ in range(5):
        e = cs.random_section(rng)
        assert cs.dorfman(e, e) == cs.D(cs.inner(e, e)).scale(Fraction(1, 2))
        f, g = cs.random_function(rng), cs.random_function(rng)
        assert cs.anchor(e, f * g) == cs.anchor(e, f) * g + f * cs.anchor(e, g)


def test_courant_axioms_hold_for_closed_h():
    body = body_algebra(3)
    data = CourantData.standard(3, {(1, 2, 3): body.var("x", 2) * body.var("x", 2)})
    rep = courant_axiom_report(data, trials=8, seed=2)
    assert rep.details["master"] == "pass"
    assert rep.passed


def test_courant_axiom1_fails_when_master_fails():
    body = body_algebra(4)
    data = CourantData.standard(4, {(1, 2, 3): body.var("x", 4)})
    rep = courant_axiom_report(data, trials=4, seed=0, coeff_degree=1)
    assert rep.details["master"] == "fail"
    assert not rep.obstructions["axiom1"].is_zero()


def test_courant_axiom3_with_constant_function():
    body = body_algebra(4)
    cs = CourantStructure(CourantData.standard(4, {(1, 2, 3): body.var("x", 4)}))
    rng = random.Random(0)
    e1, e2 = cs.random_section(rng), cs.random_section(rng)
    f = cs.algebra.const(Fraction(3, 7))
    assert cs.dorfman(e1, f * e2) == f * cs.dorfman(e1, e2)


def test_courant_metric_must_be_symmetric():
    with pytest.raises(InvalidData):
        CourantData.from_functions(body_algebra(1), [[1, 2], [0, 1]], lambda i, a: 0)


# -- pre-Courant ---------------------------------------------------------------------------

def quadratic(C):
    """rho = 0 Courant data on R^1 with identity metric of rank 3."""
    body = body_algebra(1)
    k = [[int(a == b) for b in range(3)] for a in range(3)]
    return CourantData.from_functions(body, k, lambda i, a: 0, C)


def test_pre_courant_zero_h_standard_has_zero_jacobiator():
    data = PreCourantData(CourantData.standard(2), AltForm.zero(body_algebra(2), 2, 4))
    cs = CourantStructure(data.courant)
    rng = random.Random(3)
    for _ in range(5):
        es = [cs.random_section(rng, 1) for _ in range(3)]
        assert pre_courant_jacobiator(data, *es, cs).is_zero()
    rep = pre_courant_axiom_report(data, trials=3)
    assert rep.passed  # the split metric already gives rho k^-1 rho^T = 0


def test_pre_courant_h_must_be_closed():
    body = body_algebra(5)
    with pytest.raises(InvalidData):
        PreCourantData(CourantData.standard(5), AltForm(body, 5, 4, {(1, 2, 3, 4): body.var("x", 5)}))


def test_zero_anchor_jacobiator_is_the_c_jacobi_defect():
    body = body_algebra(1)
    lie = PreCourantData(quadratic({(1, 2, 3): 1}), AltForm.zero(body, 1, 4))
    cs = CourantStructure(lie.courant)
    frame = [cs.section([int(a == b) for b in range(3)]) for a in range(3)]
    for es in product(frame, repeat=3):
        assert pre_courant_jacobiator(lie, *es, cs).is_zero()
    assert pre_courant_axiom_report(lie, trials=3).passed


def test_jacobiator_master_constant_on_frames():
    # rank 5, identity metric: C_123 = C_345 = 1 fails Jacobi through the shared index 3
    body = body_algebra(1)
    k = [[int(a == b) for b in range(5)] for a in range(5)]
    data = CourantData.from_functions(body, k, lambda i, a: 0, {(1, 2, 3): 1, (3, 4, 5): 1})
    cs = CourantStructure(data)
    assert not master_obstruction(cs.theta, cs.chart).passed
    frame = [cs.section([int(a == b) for b in range(5)]) for a in range(5)]
    nonzero = 0
    for es in product(frame, repeat=4):
        lhs = jacobiator_pairing(cs, *es)
        assert lhs == master_defect_pairing(cs, *es)
        nonzero += not lhs.is_zero()
    assert nonzero
    assert any(not jacobiator(cs, *es).is_zero() for es in product(frame, repeat=3))
