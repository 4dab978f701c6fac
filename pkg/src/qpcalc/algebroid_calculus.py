"""Connections, torsion and curvatures on Lie algebroids and pre-Courant algebroids.

Sections of ``E`` are tuples of frame components ``(e^1, .., e^r)`` and vector
fields are tuples ``(v^1, .., v^d)``; every component is a polynomial over the
body algebra of the underlying data.  Tensor components use these orders:

* ``T[(c, a, b)]``       = ``T(e_a, e_b)^c``
* ``R[(i, j, a, b)]``    = ``(R(d_i, d_j) e_a)^b``
* ``ER[(a, b, c, d)]``   = ``(ER(e_a, e_b) e_c)^d``
* ``S[(i, a, b, c)]``    = ``(S(e_a, e_b)(d_i))^c``

All indices are 1-based.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Callable, Sequence

from .bracket_engine import CheckReport
from .errors import InvalidData
from .forms import AltForm
from .graded_core import GradedAlgebra, GradedPolynomial
from .sampling import random_body_polynomial
from .structures import (
    CourantData,
    CourantStructure,
    LieAlgebroidData,
    _as_body,
    _freeze,
    apply_vector,
    vector_bracket,
)

# Weight w in  S = nabla T + w * (X(e, e') - X(e', e)),  X(e, e')(v) = R(rho e, v) e'.
# "2 Alt" with Alt X(e, e') = 1/2 (X(e, e') - X(e', e)) gives w = 1.
ALT_WEIGHT = Fraction(1)


def _add(u, v):
    return tuple(a + b for a, b in zip(u, v))


def _sub(u, v):
    return tuple(a - b for a, b in zip(u, v))


def _scale(f, u):
    return tuple(f * a for a in u)


def _basis(body: GradedAlgebra, n: int, a: int) -> tuple:
    return tuple(body.const(int(a == b)) for b in range(n))


@dataclass(frozen=True)
class ConnectionData:
    """``omega[i][a][b] = omega_{ia}^b`` with ``nabla_{d_i} e_a = omega_{ia}^b e_b``;
    optional ``gamma[k][i][j] = Gamma^k_{ij}`` for ``nabla_{d_i} d_j`` on ``TM``."""

    body: GradedAlgebra
    rank: int
    omega: tuple
    gamma: tuple | None = None
    metric: tuple | None = None

    def __post_init__(self):
        d, r = len(self.body.body), self.rank
        if len(self.omega) != d or any(len(m) != r or any(len(row) != r for row in m) for m in self.omega):
            raise InvalidData(f"omega must be {d}x{r}x{r}")
        if self.gamma is not None and (len(self.gamma) != d or any(len(m) != d for m in self.gamma)):
            raise InvalidData(f"Gamma must be {d}x{d}x{d}")
        if self.metric is not None and not self.metric_defect(self.metric) == {}:
            raise InvalidData("connection is flagged metric-compatible but is not")

    @property
    def dim(self) -> int:
        return len(self.body.body)

    @classmethod
    def from_functions(cls, body: GradedAlgebra, rank: int, omega: Callable,
                       gamma: Callable | None = None, metric=None) -> "ConnectionData":
        d = len(body.body)
        om = [[[_as_body(body, omega(i, a, b)) for b in range(1, rank + 1)] for a in range(1, rank + 1)]
              for i in range(1, d + 1)]
        ga = None
        if gamma is not None:
            ga = _freeze([[[_as_body(body, gamma(k, i, j)) for j in range(1, d + 1)] for i in range(1, d + 1)]
                          for k in range(1, d + 1)])
        if metric is not None:
            metric = tuple(tuple(Fraction(v) for v in row) for row in metric)
        return cls(body, rank, _freeze(om), ga, metric)

    @classmethod
    def flat(cls, body: GradedAlgebra, rank: int, metric=None) -> "ConnectionData":
        return cls.from_functions(body, rank, lambda i, a, b: 0, lambda k, i, j: 0, metric)

    @classmethod
    def random(cls, body: GradedAlgebra, rank: int, rng: random.Random, degree: int = 1,
               density: float = 0.4, metric=None) -> "ConnectionData":
        """Random coefficients of polynomial degree <= ``degree``.

        With a constant ``metric`` the result is metric-compatible: the lowered
        coefficients ``omega_{ia}^c k_{cb}`` are antisymmetric in ``a, b``.
        """
        d = len(body.body)

        def entry():
            if rng.random() > density:
                return body.zero()
            return random_body_polynomial(body, rng, degree, 2)

        if metric is None:
            om = [[[entry() for _ in range(rank)] for _ in range(rank)] for _ in range(d)]
        else:
            from . import _linalg

            kinv = _linalg.inverse(metric)
            om = []
            for _ in range(d):
                W = [[body.zero()] * rank for _ in range(rank)]
                for a, b in combinations(range(rank), 2):
                    W[a][b] = entry()
                    W[b][a] = -W[a][b]
                om.append([[sum((W[a][b2].scale(kinv[b2][c]) for b2 in range(rank) if kinv[b2][c]), body.zero())
                            for c in range(rank)] for a in range(rank)])
        gam = [[[entry() for _ in range(d)] for _ in range(d)] for _ in range(d)]
        return cls.from_functions(
            body, rank, lambda i, a, b: om[i - 1][a - 1][b - 1],
            lambda k, i, j: gam[k - 1][i - 1][j - 1], metric)

    def metric_defect(self, k) -> dict:
        """Nonzero ``d_i k_{ab} - omega_{ia}^c k_{cb} - omega_{ib}^c k_{ac}`` (``k`` constant)."""
        out = {}
        for i in range(self.dim):
            for a in range(self.rank):
                for b in range(self.rank):
                    v = self.body.zero()
                    for c in range(self.rank):
                        if k[c][b]:
                            v = v - self.omega[i][a][c].scale(k[c][b])
                        if k[a][c]:
                            v = v - self.omega[i][b][c].scale(k[a][c])
                    if not v.is_zero():
                        out[(i + 1, a + 1, b + 1)] = v
        return out

    def covariant(self, v: Sequence, e: Sequence) -> tuple:
        """``(nabla_v e)^b = v(e^b) + v^i e^a omega_{ia}^b``."""
        out = []
        for b in range(self.rank):
            x = apply_vector(v, e[b])
            for i, vi in enumerate(v):
                if vi.is_zero():
                    continue
                for a in range(self.rank):
                    if not e[a].is_zero() and not self.omega[i][a][b].is_zero():
                        x = x + vi * e[a] * self.omega[i][a][b]
            out.append(x)
        return tuple(out)

    def covariant_tm(self, v: Sequence, w: Sequence) -> tuple:
        """``(nabla_v w)^k = v(w^k) + v^i w^j Gamma^k_{ij}``."""
        if self.gamma is None:
            raise InvalidData("no affine connection on TM was supplied")
        out = []
        for k in range(self.dim):
            x = apply_vector(v, w[k])
            for i, j in product(range(self.dim), repeat=2):
                if not self.gamma[k][i][j].is_zero():
                    x = x + v[i] * w[j] * self.gamma[k][i][j]
            out.append(x)
        return tuple(out)


def curvature_operator(conn: ConnectionData, v, w, e) -> tuple:
    """``R(v, w) e = nabla_v nabla_w e - nabla_w nabla_v e - nabla_[v, w] e``."""
    cov = conn.covariant
    return _sub(_sub(cov(v, cov(w, e)), cov(w, cov(v, e))), cov(vector_bracket(v, w), e))


def curvature(conn: ConnectionData) -> dict:
    d, r, body = conn.dim, conn.rank, conn.body
    out = {}
    for i, j in product(range(d), repeat=2):
        for a in range(r):
            val = curvature_operator(conn, _basis(body, d, i), _basis(body, d, j), _basis(body, r, a))
            for b in range(r):
                out[(i + 1, j + 1, a + 1, b + 1)] = val[b]
    return out


def curvature_from_coefficients(conn: ConnectionData) -> dict:
    """Coordinate formula ``d_i w_{ja}^b - d_j w_{ia}^b + w_{ja}^c w_{ic}^b - w_{ia}^c w_{jc}^b``."""
    from .structures import partial

    d, r = conn.dim, conn.rank
    om = conn.omega
    out = {}
    for i, j in product(range(d), repeat=2):
        for a, b in product(range(r), repeat=2):
            v = partial(om[j][a][b], i + 1) - partial(om[i][a][b], j + 1)
            for c in range(r):
                v = v + om[j][a][c] * om[i][c][b] - om[i][a][c] * om[j][c][b]
            out[(i + 1, j + 1, a + 1, b + 1)] = v
    return out


class AlgebroidGeometry:
    """Connection calculus on a Lie algebroid with a connection on ``E``."""

    def __init__(self, data: LieAlgebroidData, conn: ConnectionData):
        if conn.rank != data.rank or conn.body != data.body:
            raise InvalidData("connection and algebroid live on different bundles")
        self.data, self.conn = data, conn
        self.body = data.body

    # primitive operations
    def anchor(self, e) -> tuple:
        return self.data.anchor_of(e)

    def bracket(self, e, f) -> tuple:
        return self.data.section_bracket(e, f)

    def nabla(self, v, e) -> tuple:
        return self.conn.covariant(v, e)

    def basic_e(self, e, f) -> tuple:
        """Basic E-connection on ``E``: ``nabla_{rho f} e + [e, f]``."""
        return _add(self.nabla(self.anchor(f), e), self.bracket(e, f))

    def basic_tm(self, e, v) -> tuple:
        """Basic E-connection on ``TM``: ``[rho e, v] + rho(nabla_v e)``."""
        return _add(vector_bracket(self.anchor(e), v), self.anchor(self.nabla(v, e)))

    # tensors evaluated on sections
    def torsion(self, e, f) -> tuple:
        """``T(e, f) = nabla_{rho e} f - nabla_{rho f} e - [e, f]``."""
        return _sub(_sub(self.nabla(self.anchor(e), f), self.nabla(self.anchor(f), e)), self.bracket(e, f))

    def e_curvature(self, e, f, s) -> tuple:
        """``ER(e, f) s`` for the basic E-connection on ``E``."""
        b = self.basic_e
        return _sub(_sub(b(e, b(f, s)), b(f, b(e, s))), b(self.bracket(e, f), s))

    def e_curvature_tm(self, e, f, v) -> tuple:
        b = self.basic_tm
        return _sub(_sub(b(e, b(f, v)), b(f, b(e, v))), b(self.bracket(e, f), v))

    def basic_curvature(self, e, f, v) -> tuple:
        """``S(e, f)(v) = [e, nabla_v f] + [nabla_v e, f] - nabla_v [e, f]
        - nabla_{E nabla_e v} f + nabla_{E nabla_f v} e``."""
        nab, br = self.nabla, self.bracket
        out = _add(br(e, nab(v, f)), br(nab(v, e), f))
        out = _sub(out, nab(v, br(e, f)))
        out = _sub(out, nab(self.basic_tm(e, v), f))
        return _add(out, nab(self.basic_tm(f, v), e))

    def nabla_torsion(self, v, e, f) -> tuple:
        """``(nabla_v T)(e, f)``."""
        nab = self.nabla
        return _sub(_sub(nab(v, self.torsion(e, f)), self.torsion(nab(v, e), f)), self.torsion(e, nab(v, f)))

    def basic_curvature_decomposed(self, e, f, v, weight=ALT_WEIGHT) -> tuple:
        """``(nabla_v T)(e, f) + weight * (R(rho e, v) f - R(rho f, v) e)``."""
        x = _sub(curvature_operator(self.conn, self.anchor(e), v, f),
                 curvature_operator(self.conn, self.anchor(f), v, e))
        return _add(self.nabla_torsion(v, e, f), tuple(c.scale(weight) for c in x))

    # component tensors on the frame
    def _frame(self):
        r, d = self.data.rank, self.data.dim
        return [_basis(self.body, r, a) for a in range(r)], [_basis(self.body, d, i) for i in range(d)]

    def torsion_tensor(self) -> dict:
        es, _ = self._frame()
        out = {}
        for a, b in product(range(len(es)), repeat=2):
            for c, val in enumerate(self.torsion(es[a], es[b])):
                out[(c + 1, a + 1, b + 1)] = val
        return out

    def e_curvature_tensor(self) -> dict:
        es, _ = self._frame()
        out = {}
        for a, b, c in product(range(len(es)), repeat=3):
            for d, val in enumerate(self.e_curvature(es[a], es[b], es[c])):
                out[(a + 1, b + 1, c + 1, d + 1)] = val
        return out

    def basic_curvature_tensor(self, decomposed: bool = False) -> dict:
        es, vs = self._frame()
        fn = self.basic_curvature_decomposed if decomposed else self.basic_curvature
        out = {}
        for i, (a, b) in product(range(len(vs)), product(range(len(es)), repeat=2)):
            for c, val in enumerate(fn(es[a], es[b], vs[i])):
                out[(i + 1, a + 1, b + 1, c + 1)] = val
        return out

    def basic_curvature_covector(self, e, f, v) -> tuple:
        """``S(e, f)`` as a ``T*M``-valued map: returns the ``E``-components for ``v``."""
        return self.basic_curvature(e, f, v)

    def bianchi_residual(self, e1, e2, e3, v) -> tuple:
        """Exterior covariant derivative of ``S`` at ``(e1, e2, e3)``, evaluated on ``v``.

        ``S`` is an E-2-form with values in ``T*M (x) E``; the values are
        differentiated by ``(E nabla_e phi)(v) = E nabla_e (phi(v)) - phi(E nabla_e v)``
        (basic connections on ``E`` and ``TM``), the arguments through brackets.
        """
        S, be, bt, br = self.basic_curvature, self.basic_e, self.basic_tm, self.bracket

        def dval(e, f, g):
            return _sub(be(e, S(f, g, v)), S(f, g, bt(e, v)))

        out = dval(e1, e2, e3)
        out = _sub(out, dval(e2, e1, e3))
        out = _add(out, dval(e3, e1, e2))
        out = _sub(out, S(br(e1, e2), e3, v))
        out = _add(out, S(br(e1, e3), e2, v))
        return _sub(out, S(br(e2, e3), e1, v))


# -- E-forms -------------------------------------------------------------------------

def e_differential(alpha: AltForm, data: LieAlgebroidData) -> AltForm:
    """Lie algebroid differential of an E-form, computed on frame components."""
    if alpha.dim != data.rank:
        raise InvalidData("E-form rank does not match the algebroid")
    m = alpha.degree
    body = data.body
    rho_vec = [data.anchor_of(_basis(body, data.rank, a)) for a in range(data.rank)]

    def comp(idx):
        idx = [a - 1 for a in idx]
        out = body.zero()
        for i in range(m + 1):
            rest = tuple(a + 1 for a in idx[:i] + idx[i + 1:])
            term = apply_vector(rho_vec[idx[i]], alpha[rest])
            out = out + (term if i % 2 == 0 else -term)
        for i, j in combinations(range(m + 1), 2):
            rest = [a + 1 for k, a in enumerate(idx) if k not in (i, j)]
            term = body.zero()
            for c in range(data.rank):
                coeff = data.bracket[c][idx[i]][idx[j]]
                if not coeff.is_zero():
                    term = term + coeff * alpha[tuple([c + 1] + rest)]
            # paper indexing is 1-based: (-1)^{(i+1)+(j+1)} = (-1)^{i+j}
            out = out + (term if (i + j) % 2 == 0 else -term)
        return out

    return AltForm.from_function(body, data.rank, m + 1, comp)


def random_e_form(data: LieAlgebroidData, degree: int, rng: random.Random, coeff_degree: int = 2) -> AltForm:
    return AltForm.from_function(
        data.body, data.rank, degree, lambda idx: random_body_polynomial(data.body, rng, coeff_degree, 2))


def e_differential_squared(data: LieAlgebroidData, forms: Sequence[AltForm]) -> CheckReport:
    parts = {}
    for n, alpha in enumerate(forms):
        dd = e_differential(e_differential(alpha, data), data)
        parts[f"form{n}"] = _form_as_polynomial(dd)
    return CheckReport("e-differential-squared", parts, "algebroid_calculus.e_differential")


def _form_as_polynomial(form: AltForm) -> GradedPolynomial:
    out = form.algebra.zero()
    for _, v in form.items():
        if not v.is_zero():
            return v
    return out


# -- random valid Lie algebroids --------------------------------------------------------

_MATRIX_ALGEBRAS = {
    # name: (dim of representation, generators)
    "so3": (3, [[[0, 0, 0], [0, 0, -1], [0, 1, 0]],
                [[0, 0, 1], [0, 0, 0], [-1, 0, 0]],
                [[0, -1, 0], [1, 0, 0], [0, 0, 0]]]),
    "sl2": (2, [[[1, 0], [0, -1]], [[0, 1], [0, 0]], [[0, 0], [1, 0]]]),
    "heisenberg": (3, [[[0, 1, 0], [0, 0, 0], [0, 0, 0]],
                       [[0, 0, 0], [0, 0, 1], [0, 0, 0]],
                       [[0, 0, 1], [0, 0, 0], [0, 0, 0]]]),
    "aff1": (2, [[[1, 0], [0, 0]], [[0, 1], [0, 0]]]),
    "upper2": (2, [[[1, 0], [0, 0]], [[0, 1], [0, 0]], [[0, 0], [0, 1]]]),
}


def _mat_mul(X, Y):
    return [[sum(X[i][k] * Y[k][j] for k in range(len(Y))) for j in range(len(Y[0]))] for i in range(len(X))]


def _structure_constants(mats):
    """``[M_a, M_b] = C^c_{ab} M_c`` solved exactly (the ``M_a`` must be independent)."""
    from . import _linalg

    r = len(mats)
    n = len(mats[0])
    flat = [[Fraction(m[i][j]) for i in range(n) for j in range(n)] for m in mats]
    # least-squares free exact solve via normal equations on the independent span
    gram = [[sum(x * y for x, y in zip(flat[a], flat[b])) for b in range(r)] for a in range(r)]
    ginv = _linalg.inverse(gram)
    C = [[[Fraction(0)] * r for _ in range(r)] for _ in range(r)]
    for a, b in product(range(r), repeat=2):
        comm = _mat_mul(mats[a], mats[b])
        other = _mat_mul(mats[b], mats[a])
        v = [comm[i][j] - other[i][j] for i in range(n) for j in range(n)]
        rhs = [sum(x * y for x, y in zip(flat[c], v)) for c in range(r)]
        coeffs = [sum(ginv[c][k] * rhs[k] for k in range(r)) for c in range(r)]
        recon = [sum(coeffs[c] * flat[c][t] for c in range(r)) for t in range(n * n)]
        if recon != v:
            raise InvalidData("matrices do not span a Lie algebra")
        for c in range(r):
            C[c][a][b] = coeffs[c]
    return C


def action_algebroid(mats, body: GradedAlgebra | None = None) -> LieAlgebroidData:
    """Action algebroid of a matrix Lie algebra acting linearly on ``R^n``.

    ``rho(e_a) = -(M_a x)^i d_i`` is a Lie algebra morphism because linear
    vector fields satisfy ``[V_M, V_N] = -V_{[M, N]}``.
    """
    from .structures import body_algebra

    n = len(mats[0])
    body = body or body_algebra(n)
    x = [body.var(c.key) for c in body.body]
    C = _structure_constants(mats)
    r = len(mats)

    def rho(i, a):
        return sum((x[j].scale(-Fraction(mats[a - 1][i - 1][j])) for j in range(n) if mats[a - 1][i - 1][j]),
                   body.zero())

    return LieAlgebroidData.from_functions(body, r, rho, lambda c, a, b: C[c - 1][a - 1][b - 1])


def random_valid_algebroid(rng: random.Random) -> LieAlgebroidData:
    """A Lie algebroid of rank <= 3 on ``R^d`` (``d <= 3``) with linear anchor.

    Drawn from matrix Lie algebras under a random change of basis of the algebra
    and a random linear change of coordinates on the base.
    """
    from . import _linalg

    name = rng.choice(sorted(_MATRIX_ALGEBRAS))
    n, gens = _MATRIX_ALGEBRAS[name]
    r = len(gens)
    while True:
        Q = [[rng.choice([-1, 0, 1, 2]) for _ in range(r)] for _ in range(r)]
        P = [[rng.choice([-1, 0, 1, 2]) for _ in range(n)] for _ in range(n)]
        try:
            Pinv = _linalg.inverse(P)
            _linalg.inverse(Q)
            break
        except Exception:
            continue
    conj = [_mat_mul(_mat_mul(P, g), Pinv) for g in gens]
    mats = [[[sum(Fraction(Q[a][b]) * conj[b][i][j] for b in range(r)) for j in range(n)] for i in range(n)]
            for a in range(r)]
    return action_algebroid(mats)


def nonholonomic_tangent(dim: int = 3) -> LieAlgebroidData:
    """``TM`` in the frame ``e_1 = d_1, e_2 = d_2 + x^1 d_3, e_3 = d_3``: non-constant anchor, ``[e_1, e_2] = e_3``."""
    from .structures import body_algebra

    body = body_algebra(3)
    x1 = body.var("x", 1)
    anchor = {(1, 1): 1, (2, 2): 1, (3, 2): x1, (3, 3): 1}

    def C(c, a, b):
        if (c, a, b) == (3, 1, 2):
            return 1
        if (c, a, b) == (3, 2, 1):
            return -1
        return 0

    return LieAlgebroidData.from_functions(body, 3, lambda i, a: anchor.get((i, a), 0), C)


# -- reports ------------------------------------------------------------------------------

def _first_nonzero(values, zero):
    for v in values:
        if not v.is_zero():
            return v
    return zero


def decomposition_check(data: LieAlgebroidData, conn: ConnectionData) -> CheckReport:
    """Frame components of both sides of the basic-curvature decomposition."""
    geo = AlgebroidGeometry(data, conn)
    line1 = geo.basic_curvature_tensor()
    line2 = geo.basic_curvature_tensor(decomposed=True)
    zero = data.body.zero()
    diff = _first_nonzero((line1[k] - line2[k] for k in sorted(line1)), zero)
    return CheckReport("basic-curvature-decomposition", {"": diff}, "algebroid_calculus.decomposition_check",
                       details={"alt_weight": ALT_WEIGHT})


def bianchi_check(data: LieAlgebroidData, conn: ConnectionData) -> CheckReport:
    geo = AlgebroidGeometry(data, conn)
    es, vs = geo._frame()
    zero = data.body.zero()
    residual = zero
    for (a, b, c) in combinations(range(data.rank), 3):
        for v in vs:
            val = geo.bianchi_residual(es[a], es[b], es[c], v)
            residual = _first_nonzero(val, zero)
            if not residual.is_zero():
                break
        if not residual.is_zero():
            break
    return CheckReport("bianchi", {"": residual}, "algebroid_calculus.bianchi_check",
                       ("T*M slot: dual of the basic E-connection on TM",))


@dataclass
class GeometryReport:
    torsion: dict
    curvature: dict
    e_curvature: dict
    basic_curvature: dict
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())


def geometry_report(data: LieAlgebroidData, conn: ConnectionData) -> GeometryReport:
    geo = AlgebroidGeometry(data, conn)
    T = geo.torsion_tensor()
    R = curvature(conn)
    zero = data.body.zero()
    antisym = {
        "torsion": _first_nonzero((T[(c, a, b)] + T[(c, b, a)] for (c, a, b) in T), zero),
        "curvature": _first_nonzero((R[(i, j, a, b)] + R[(j, i, a, b)] for (i, j, a, b) in R), zero),
    }
    checks = {
        "antisymmetry": CheckReport("antisymmetry", antisym, "algebroid_calculus.geometry_report"),
        "decomposition": decomposition_check(data, conn),
        "bianchi": bianchi_check(data, conn),
    }
    return GeometryReport(T, R, geo.e_curvature_tensor(), geo.basic_curvature_tensor(), checks)


# -- pre-Courant torsion and basic curvature ------------------------------------------------

class CourantGeometry:
    """E-torsion and basic curvature of a (pre-)Courant algebroid with a metric connection.

    The E-connection on ``E`` inside the torsion is ``E nabla_e f = nabla_{rho e} f``;
    the one on ``TM`` inside the basic curvature is ``[rho e, v] + rho(nabla_v e)``.
    """

    def __init__(self, data: CourantData, conn: ConnectionData):
        if conn.rank != data.rank:
            raise InvalidData("connection rank does not match the fiber")
        if conn.metric_defect(data.k):
            raise InvalidData("the connection must preserve the fiber metric")
        self.data, self.conn = data, conn
        self.body = data.body
        self.cs = CourantStructure(data)

    def section(self, e) -> GradedPolynomial:
        return self.cs.section(e)

    def components(self, p: GradedPolynomial) -> tuple:
        return tuple(self.body.embed(c) for c in self.cs.frame(p))

    def anchor(self, e) -> tuple:
        d = self.data
        return tuple(sum((d.anchor[i][a] * e[a] for a in range(d.rank)), self.body.zero()) for i in range(d.dim))

    def inner(self, e, f) -> GradedPolynomial:
        k = self.data.k
        out = self.body.zero()
        for a, b in product(range(self.data.rank), repeat=2):
            if k[a][b]:
                out = out + (e[a] * f[b]).scale(k[a][b])
        return out

    def dorfman(self, e, f) -> tuple:
        return self.components(self.cs.dorfman(self.section(e), self.section(f)))

    def skew(self, e, f) -> tuple:
        return tuple(c.scale(Fraction(1, 2)) for c in _sub(self.dorfman(e, f), self.dorfman(f, e)))

    def nabla(self, v, e) -> tuple:
        return self.conn.covariant(v, e)

    def e_nabla(self, e, f) -> tuple:
        return self.nabla(self.anchor(e), f)

    def basic_tm(self, e, v) -> tuple:
        return _add(vector_bracket(self.anchor(e), v), self.anchor(self.nabla(v, e)))

    def torsion(self, e1, e2, e3) -> GradedPolynomial:
        en, ip = self.e_nabla, self.inner
        first = ip(_sub(_sub(en(e1, e2), en(e2, e1)), self.skew(e1, e2)), e3)
        return first + (ip(en(e3, e1), e2) - ip(en(e3, e2), e1)).scale(Fraction(1, 2))

    def basic_curvature(self, e1, e2, e3, v) -> GradedPolynomial:
        nab, sk, ip = self.nabla, self.skew, self.inner
        x = _sub(_sub(nab(v, sk(e1, e2)), sk(nab(v, e1), e2)), sk(e1, nab(v, e2)))
        x = _add(_sub(x, nab(self.basic_tm(e2, v), e1)), nab(self.basic_tm(e1, v), e2))
        w = self.basic_tm(e3, v)
        return ip(x, e3) + (ip(nab(w, e1), e2) - ip(nab(w, e2), e1)).scale(Fraction(1, 2))

    def random_section(self, rng: random.Random, coeff_degree: int = 1) -> tuple:
        return tuple(random_body_polynomial(self.body, rng, coeff_degree, 2) for _ in range(self.data.rank))

    def torsion_tensor(self) -> AltForm:
        r = self.data.rank
        es = [_basis(self.body, r, a) for a in range(r)]
        return AltForm.from_function(self.body, r, 3, lambda idx: self.torsion(*(es[a - 1] for a in idx)))


def twisted_courant_torsion(data, conn: ConnectionData) -> AltForm:
    """Frame components ``T(e_a, e_b, e_c)`` for increasing ``a < b < c``.

    Total antisymmetry is a separate check (:func:`twisted_torsion_report`);
    this only stores the increasing components.
    """
    courant = data.courant if hasattr(data, "courant") else data
    return CourantGeometry(courant, conn).torsion_tensor()


def twisted_courant_basic_curvature(data, conn: ConnectionData) -> dict:
    """``S[(i, a, b, c)] = S(e_a, e_b, e_c)(d_i)``."""
    courant = data.courant if hasattr(data, "courant") else data
    geo = CourantGeometry(courant, conn)
    r, d = courant.rank, courant.dim
    es = [_basis(geo.body, r, a) for a in range(r)]
    vs = [_basis(geo.body, d, i) for i in range(d)]
    return {(i + 1, a + 1, b + 1, c + 1): geo.basic_curvature(es[a], es[b], es[c], vs[i])
            for i in range(d) for a, b, c in product(range(r), repeat=3)}


def twisted_torsion_report(data, conn: ConnectionData, trials: int = 50, seed: int = 0,
                           coeff_degree: int = 1) -> CheckReport:
    """Total antisymmetry and function-linearity of the twisted E-torsion on random sections."""
    courant = data.courant if hasattr(data, "courant") else data
    geo = CourantGeometry(courant, conn)
    rng = random.Random(seed)
    zero = geo.body.zero()
    parts = {"swap12": zero, "swap23": zero, "linear1": zero, "linear2": zero, "linear3": zero}
    for _ in range(trials):
        e1, e2, e3 = (geo.random_section(rng, coeff_degree) for _ in range(3))
        f = random_body_polynomial(geo.body, rng, 1, 2)
        t = geo.torsion(e1, e2, e3)
        checks = {
            "swap12": t + geo.torsion(e2, e1, e3),
            "swap23": t + geo.torsion(e1, e3, e2),
            "linear1": geo.torsion(_scale(f, e1), e2, e3) - f * t,
            "linear2": geo.torsion(e1, _scale(f, e2), e3) - f * t,
            "linear3": geo.torsion(e1, e2, _scale(f, e3)) - f * t,
        }
        for k, v in checks.items():
            if parts[k].is_zero() and not v.is_zero():
                parts[k] = v
    return CheckReport("twisted-courant-torsion", parts, "algebroid_calculus.twisted_courant_torsion",
                       ("E-connection in the torsion: nabla_{rho e}",))
