from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpcalc.errors import (
    DegreeMismatch,
    IndexOutOfRange,
    InvalidData,
    ModelDegreeMismatch,
    ModelSyntaxError,
    UndeclaredIdentifier,
)
from qpcalc.model import BinOp, Div, Hbar, Neg, Num, Ref, Sum, format_expr, format_model, parse_model
from qpcalc.structures import PoissonData, poisson_equivalence_report

MODELS = sorted((Path(__file__).parent.parent / "models").glob("*.qp"))

MINIMAL_POISSON = """\
chart degree 1
coords x[1..3] : 0
coords xi[1..3] : 1
pair x[i] <-> xi[i] for i in 1..3
symbol pi[2] antisymmetric formal
theta = (1/2*pi[1,2]*xi[1]*xi[2] + 1/2*pi[2,1]*xi[2]*xi[1]
       + 1/2*pi[1,3]*xi[1]*xi[3] + 1/2*pi[3,1]*xi[3]*xi[1]
       + 1/2*pi[2,3]*xi[2]*xi[3] + 1/2*pi[3,2]*xi[3]*xi[2])
check master
"""


def test_minimal_poisson_model():
    model = parse_model(MINIMAL_POISSON)
    theta = model.compiled.theta
    assert theta == PoissonData.formal(3).theta(model.compiled.chart)
    assert [c.name for c in model.checks] == ["master"]


def test_sum_construct_matches_explicit_expansion():
    summed = MINIMAL_POISSON.replace(
        MINIMAL_POISSON[MINIMAL_POISSON.index("theta"):MINIMAL_POISSON.index("check")],
        "theta = sum(i in 1..3) sum(j in 1..3) pi[i,j]*xi[i]*xi[j]/2\n")
    assert parse_model(summed).compiled.theta == parse_model(MINIMAL_POISSON).compiled.theta


def test_pairing_degree_mismatch():
    text = "chart degree 1\ncoords x[1..2] : 0\npair x[1] <-> x[2]\n"
    with pytest.raises(ModelDegreeMismatch) as err:
        parse_model(text)
    assert isinstance(err.value, DegreeMismatch)
    assert (err.value.line, err.value.column) == (3, 1)


def test_undeclared_symbol():
    text = "coords x[1..3] : 0\ndata lie_algebroid rank=3 rho=rho C=C\n"
    with pytest.raises(UndeclaredIdentifier) as err:
        parse_model(text)
    assert "rho" in str(err.value)
    assert err.value.line == 2


def test_undeclared_identifier_in_theta():
    text = "chart degree 1\ncoords x[1..1] : 0\ncoords xi[1..1] : 1\npair x[1] <-> xi[1]\ntheta = y*xi[1]\n"
    with pytest.raises(UndeclaredIdentifier) as err:
        parse_model(text)
    assert (err.value.line, err.value.column) == (5, 9)


def test_index_out_of_range():
    text = "chart degree 1\ncoords x[1..2] : 0\ncoords xi[1..2] : 1\npair x[i] <-> xi[i] for i in 1..2\ntheta = xi[3]\n"
    with pytest.raises(IndexOutOfRange):
        parse_model(text)


@pytest.mark.parametrize("text,line,column", [
    ("coords x[1..2] 0\n", 1, 16),
    ("chart degree 1\ncoords x[1..2] : 0\ntheta = x[1] +\n", 3, 15),
    ("coords x[1..2] : 0 @\n", 1, 20),
    ("frobnicate\n", 1, 1),
])
def test_syntax_errors_carry_locations(text, line, column):
    with pytest.raises(ModelSyntaxError) as err:
        parse_model(text)
    assert (err.value.line, err.value.column) == (line, column)


def test_binding_conflicts_and_symmetry():
    text = "coords x[1..2] : 0\nsymbol pi[2] antisymmetric explicit\nbind pi[1,2] = x[1]\nbind pi[2,1] = x[2]\n"
    with pytest.raises(InvalidData):
        parse_model(text)
    ok = parse_model("coords x[1..2] : 0\nsymbol pi[2] antisymmetric explicit\nbind pi[2,1] = x[2]\n")
    info = ok.compiled.symbols["pi"]
    assert info.component(ok.compiled.body, 1, 2) == -ok.compiled.body.var("x", 2)


def test_formal_d3_model_fails_with_the_jacobiator():
    model = parse_model((Path(__file__).parent.parent / "models" / "poisson_formal_d3.qp").read_text())
    data = model.compiled.data["poisson"]
    assert not poisson_equivalence_report(data).passed


@pytest.mark.parametrize("path", MODELS, ids=lambda p: p.name)
def test_bundled_models_round_trip(path):
    model = parse_model(path.read_text())
    printed = format_model(model)
    again = parse_model(printed)
    assert again.statements == model.statements
    assert format_model(again) == printed
    if model.compiled.theta is not None:
        assert again.compiled.theta == model.compiled.theta


def test_digest_tracks_source_bytes():
    a = parse_model(MINIMAL_POISSON)
    b = parse_model(MINIMAL_POISSON + "# trailing comment\n")
    assert a.statements == b.statements
    assert a.digest != b.digest and a.digest.startswith("sha256:")


# -- printer round trip on generated expressions ---------------------------------------

atoms = st.one_of(
    st.integers(min_value=0, max_value=50).map(Num),
    st.just(Hbar()),
    st.builds(Ref, st.sampled_from(["x", "xi", "pi"]),
              st.lists(st.integers(1, 3), min_size=1, max_size=2).map(tuple),
              st.lists(st.integers(1, 3), max_size=2).map(tuple)),
)


def _extend(children):
    return st.one_of(
        st.builds(Neg, children),
        st.builds(BinOp, st.sampled_from("+-*"), children, children),
        st.builds(Div, children, st.integers(1, 9)),
        st.builds(Sum, st.just("k"), st.just(1), st.integers(1, 3), children),
    )


exprs = st.recursive(atoms, _extend, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(exprs)
def test_expression_round_trip(node):
    text = "theta = " + format_expr(node) + "\n"
    parsed = parse_model(text, compile=False)
    assert parsed.statements[0].expr == node
