"""Poisson, Lie-algebroid and Courant-algebroid structures extracted from QP data.

Structure functions (``pi^{ij}``, ``rho^i_a``, ``C^c_{ab}``, ``C_{abc}``, forms)
are polynomials over a *body* algebra holding only the degree-0 coordinates;
they are embedded into whichever graded chart a construction needs.

Tensor conventions (indices are 1-based in every public accessor):

* bivector ``pi = 1/2 pi^{ij} d_i ^ d_j`` with ``pi(dx^i, dx^j) = pi^{ij}`` and
  ``pi#(alpha) = pi(alpha, -)``, so ``pi#(dx^i) = pi^{ij} d_j``;
* a ``p``-vector ``T`` is encoded on ``T*[1]M`` as
  ``1/p! T^{i_1..i_p} xi_{i_1} .. xi_{i_p}``;
* forms are :class:`~qpcalc.forms.AltForm` with ``H(d_i, d_j, d_k) = H[i, j, k]``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import Callable, Sequence

from . import _linalg
from .bracket_engine import (
    Chart,
    CheckReport,
    cotangent_chart,
    courant_chart,
    master_obstruction,
    poisson_bracket,
    vector_bundle_chart,
)
from .errors import InvalidData
from .forms import AltForm
from .graded_core import (
    GradedAlgebra,
    GradedPolynomial,
    Symbol,
    coordinate_algebra,
    derive,
)
from .sampling import random_body_polynomial

# 1/2 {Theta, Theta} = JACOBI_NORMALIZATION * sum_{ijk} J^{ijk} xi_i xi_j xi_k for
# Theta = 1/2 pi^{ij} xi_i xi_j, J^{ijk} = d_m pi^{ij} pi^{mk} + (ijk cyclic).
JACOBI_NORMALIZATION = Fraction(1, 6)

# Sign s in  D f = s * {Theta, f}.  With {x, xi} = +1 and the Dorfman bracket
# -{{e1, Theta}, e2}, only s = -1 gives <D f, e> = rho(e) f and
# e o e = 1/2 D<e, e>; s = +1 breaks both by an overall sign.
D_SIGN = -1


def body_algebra(dim: int, name: str = "x") -> GradedAlgebra:
    return coordinate_algebra([(name, dim, 0)])


def _as_body(body: GradedAlgebra, value) -> GradedPolynomial:
    if isinstance(value, GradedPolynomial):
        return body.embed(value)
    return body.const(value)


def partial(f: GradedPolynomial, i: int) -> GradedPolynomial:
    """``d f / d x^i`` for the ``i``-th (1-based) degree-0 coordinate of ``f``'s algebra."""
    return derive(f, f.algebra.body[i - 1])


def apply_vector(v: Sequence[GradedPolynomial], f: GradedPolynomial) -> GradedPolynomial:
    out = f.algebra.zero()
    for i, vi in enumerate(v, start=1):
        if not vi.is_zero():
            out = out + f.algebra.embed(vi) * partial(f, i)
    return out


def vector_bracket(v, w) -> tuple:
    return tuple(apply_vector(v, wk) - apply_vector(w, vk) for vk, wk in zip(v, w))


def _check_square(matrix, n, what):
    if len(matrix) != n or any(len(row) != n for row in matrix):
        raise InvalidData(f"{what} must be {n}x{n}")


# -- Poisson -------------------------------------------------------------------

@dataclass(frozen=True)
class PoissonData:
    """Bivector ``pi^{ij}`` on ``R^d`` (entries may be formal jets)."""

    body: GradedAlgebra
    pi: tuple

    def __post_init__(self):
        d = len(self.body.body)
        _check_square(self.pi, d, "pi")
        for i in range(d):
            for j in range(d):
                if self.pi[i][j] != -self.pi[j][i]:
                    raise InvalidData(f"pi must be antisymmetric: pi[{i+1},{j+1}] != -pi[{j+1},{i+1}]")

    @property
    def dim(self) -> int:
        return len(self.body.body)

    def __call__(self, i: int, j: int) -> GradedPolynomial:
        return self.pi[i - 1][j - 1]

    @classmethod
    def from_function(cls, body: GradedAlgebra, fn: Callable[[int, int], object]) -> "PoissonData":
        d = len(body.body)
        rows = [[_as_body(body, fn(i, j)) for j in range(1, d + 1)] for i in range(1, d + 1)]
        return cls(body, tuple(tuple(r) for r in rows))

    @classmethod
    def from_components(cls, body: GradedAlgebra, components: dict) -> "PoissonData":
        """``components[(i, j)]`` for ``i < j``; the rest follows by antisymmetry."""
        def fn(i, j):
            if i < j:
                return components.get((i, j), 0)
            if i > j:
                return -_as_body(body, components.get((j, i), 0))
            return 0
        return cls.from_function(body, fn)

    @classmethod
    def formal(cls, dim: int, name: str = "pi") -> "PoissonData":
        body = body_algebra(dim)
        sym = Symbol(name, 2, "antisymmetric")
        return cls.from_function(body, lambda i, j: body.jet(sym, i, j))

    def chart(self) -> Chart:
        return cotangent_chart(self.body, 1)

    def theta(self, chart: Chart | None = None) -> GradedPolynomial:
        """``Theta = 1/2 pi^{ij} xi_i xi_j`` on ``T*[1]M``."""
        chart = chart or self.chart()
        alg = chart.algebra
        xi = _momenta(chart, self.dim)
        out = alg.zero()
        for i in range(self.dim):
            for j in range(self.dim):
                if not self.pi[i][j].is_zero():
                    out = out + alg.embed(self.pi[i][j]) * xi[i] * xi[j]
        return out.scale(Fraction(1, 2))


def _momenta(chart: Chart, dim: int) -> list[GradedPolynomial]:
    """The conjugates of the degree-0 coordinates, in body order."""
    partner = {a.key: b for a, b, _ in chart.pairs}
    return [chart.algebra.var(partner[c.key].key) for c in chart.algebra.body[:dim]]


def poisson_bracket_of_functions(f: GradedPolynomial, g: GradedPolynomial, data: PoissonData) -> GradedPolynomial:
    """``{f, g}_PB = 1/2 pi^{ij} d_i f d_j g`` (with the explicit 1/2)."""
    f, g = data.body.embed(f), data.body.embed(g)
    out = data.body.zero()
    for i in range(1, data.dim + 1):
        fi = partial(f, i)
        if fi.is_zero():
            continue
        for j in range(1, data.dim + 1):
            if not data(i, j).is_zero():
                out = out + data(i, j) * fi * partial(g, j)
    return out.scale(Fraction(1, 2))


def poisson_jacobiator(data: PoissonData) -> dict[tuple, GradedPolynomial]:
    """``J^{ijk} = d_m pi^{ij} pi^{mk} + (ijk cyclic)`` for every ``i < j < k``."""
    d = data.dim

    def term(i, j, k):
        out = data.body.zero()
        for m in range(1, d + 1):
            if not data(m, k).is_zero():
                out = out + partial(data(i, j), m) * data(m, k)
        return out

    return {
        (i, j, k): term(i, j, k) + term(j, k, i) + term(k, i, j)
        for i, j, k in combinations(range(1, d + 1), 3)
    }


def jacobiator_contraction(data: PoissonData, chart: Chart | None = None) -> GradedPolynomial:
    """``sum_{ijk} J^{ijk} xi_i xi_j xi_k`` over all (not only ordered) index triples."""
    chart = chart or data.chart()
    xi = _momenta(chart, data.dim)
    out = chart.algebra.zero()
    for (i, j, k), value in poisson_jacobiator(data).items():
        if value.is_zero():
            continue
        # J is totally antisymmetric and so is xi_i xi_j xi_k: 3! equal terms
        out = out + chart.algebra.embed(value) * xi[i - 1] * xi[j - 1] * xi[k - 1]
    return out.scale(6)


def schouten_bracket(P: GradedPolynomial, Q: GradedPolynomial, chart: Chart | int) -> GradedPolynomial:
    """Schouten bracket of multivector fields encoded on ``T*[1]M``.

    ``[P, Q]_S = sum_m (Q d_right/dx^m)(d_left/dxi_m P) - (Q d_right/dxi_m)(d_left/dx^m P)``,
    which equals ``{Q, P}`` for the degree-1 bracket and gives ``[X, f]_S = X(f)``
    and ``[X, Y]_S = [X, Y]`` on vector fields.
    """
    if isinstance(chart, int):
        chart = cotangent_chart(chart, 1)
    alg = chart.algebra
    P, Q = alg.embed(P), alg.embed(Q)
    out = alg.zero()
    for x, xi, w in chart.pairs:
        a = derive(Q, x, "right")
        if not a.is_zero():
            out = out + (a * derive(P, xi, "left")).scale(w)
        b = derive(Q, xi, "right")
        if not b.is_zero():
            out = out - (b * derive(P, x, "left")).scale(w)
    return out


def poisson_equivalence_report(data: PoissonData) -> CheckReport:
    """Compare the three routes to the Poisson condition.

    ``master`` is ``1/2{Theta,Theta}``; ``jacobi`` the componentwise Jacobiator
    contraction scaled by :data:`JACOBI_NORMALIZATION`; ``schouten`` is
    ``1/2 [pi, pi]_S``.  The ``agreement:*`` parts are differences that must vanish.
    """
    chart = data.chart()
    theta = data.theta(chart)
    master = master_obstruction(theta, chart).obstruction
    jacobi = jacobiator_contraction(data, chart).scale(JACOBI_NORMALIZATION)
    schouten = schouten_bracket(theta, theta, chart).scale(Fraction(1, 2))
    return CheckReport(
        "poisson-jacobi",
        {"jacobi": jacobi, "agreement:master-jacobi": master - jacobi,
         "agreement:master-schouten": master - schouten},
        "structures.poisson_equivalence_report",
        details={"master": master, "schouten": schouten},
    )


# -- twisted Poisson -------------------------------------------------------------

def exterior_derivative(form: AltForm) -> AltForm:
    """``(dH)_{i_0..i_p} = sum_s (-1)^s d_{i_s} H_{i_0..^i_s..i_p}``."""
    def comp(idx):
        out = form.algebra.zero()
        for s, i in enumerate(idx):
            rest = idx[:s] + idx[s + 1:]
            v = partial(form[rest], i)
            out = out + (v if s % 2 == 0 else -v)
        return out
    return AltForm.from_function(form.algebra, form.dim, form.degree + 1, comp)


@dataclass(frozen=True)
class TwistedPoissonData:
    poisson: PoissonData
    H: AltForm

    def __post_init__(self):
        if self.H.degree != 3 or self.H.dim != self.poisson.dim:
            raise InvalidData("H must be a 3-form on the base")
        if not exterior_derivative(self.H).is_zero():
            raise InvalidData("H must be closed")

    @property
    def body(self):
        return self.poisson.body

    @property
    def dim(self):
        return self.poisson.dim


def pi_sharp(data: PoissonData, alpha: Sequence[GradedPolynomial]) -> tuple:
    """``pi#(alpha)^j = alpha_i pi^{ij}``."""
    d = data.dim
    return tuple(
        sum((data.body.embed(alpha[i]) * data(i + 1, j) for i in range(d)), data.body.zero())
        for j in range(1, d + 1)
    )


def pi_pair(data: PoissonData, alpha, beta) -> GradedPolynomial:
    """``pi(alpha, beta) = pi^{ij} alpha_i beta_j``."""
    out = data.body.zero()
    for i in range(data.dim):
        for j in range(data.dim):
            out = out + data(i + 1, j + 1) * alpha[i] * beta[j]
    return out


def twisted_poisson_obstruction(data: TwistedPoissonData) -> CheckReport:
    """``1/2 [pi, pi]_S - <(x)^3 pi, H>`` as a trivector encoded in ``xi``."""
    p = data.poisson
    chart = p.chart()
    alg = chart.algebra
    theta = p.theta(chart)
    half_schouten = schouten_bracket(theta, theta, chart).scale(Fraction(1, 2))
    xi = _momenta(chart, p.dim)
    d = p.dim
    sharp = [pi_sharp(p, [p.body.const(int(a == i)) for a in range(d)]) for i in range(d)]

    def contracted(i, j, k):
        # H(pi# dx^i, pi# dx^j, pi# dx^k)
        out = p.body.zero()
        for a, b, c in product(range(1, d + 1), repeat=3):
            h = data.H[(a, b, c)]
            if not h.is_zero():
                out = out + sharp[i][a - 1] * sharp[j][b - 1] * sharp[k][c - 1] * h
        return out

    h_term = alg.zero()
    for i, j, k in product(range(d), repeat=3):
        if len({i, j, k}) < 3:
            continue
        v = contracted(i, j, k)
        if not v.is_zero():
            h_term = h_term + alg.embed(v) * xi[i] * xi[j] * xi[k]
    h_term = h_term.scale(Fraction(1, 6))
    return CheckReport(
        "twisted-poisson",
        {"": half_schouten - h_term},
        "structures.twisted_poisson_obstruction",
        details={"half_schouten": half_schouten, "h_term": h_term},
    )


def lie_derivative_form(v, beta) -> tuple:
    """``(L_v beta)_j = v^m d_m beta_j + beta_m d_j v^m``."""
    d = len(v)
    return tuple(
        apply_vector(v, beta[j]) + sum((beta[m] * partial(v[m], j + 1) for m in range(d)), beta[j].algebra.zero())
        for j in range(d)
    )


def differential(f: GradedPolynomial) -> tuple:
    return tuple(partial(f, i) for i in range(1, len(f.algebra.body) + 1))


def twisted_lie_algebroid_bracket(alpha, beta, data: TwistedPoissonData | PoissonData) -> tuple:
    """``[a, b]_{pi,H} = L_{pi# a} b - L_{pi# b} a - d(pi(a, b)) + i_{pi# a} i_{pi# b} H``.

    The double contraction is read in written order, ``i_X i_Y H = H(X, Y, -)``;
    with that reading the bracket is Lie exactly when
    :func:`twisted_poisson_obstruction` vanishes.
    """
    p = data.poisson if isinstance(data, TwistedPoissonData) else data
    H = data.H if isinstance(data, TwistedPoissonData) else None
    alpha = tuple(_as_body(p.body, a) for a in alpha)
    beta = tuple(_as_body(p.body, b) for b in beta)
    pa, pb = pi_sharp(p, alpha), pi_sharp(p, beta)
    la, lb = lie_derivative_form(pa, beta), lie_derivative_form(pb, alpha)
    dpi = differential(pi_pair(p, alpha, beta))
    out = [la[j] - lb[j] - dpi[j] for j in range(p.dim)]
    if H is not None:
        for j in range(p.dim):
            for a in range(p.dim):
                for b in range(p.dim):
                    h = H[(a + 1, b + 1, j + 1)]
                    if not h.is_zero():
                        out[j] = out[j] + h * pa[a] * pb[b]
    return tuple(out)


def twisted_anchor(data: TwistedPoissonData | PoissonData, alpha) -> tuple:
    """Anchor of ``(T*M, [-,-]_{pi,H})`` read off from the Leibniz rule: ``pi#``."""
    p = data.poisson if isinstance(data, TwistedPoissonData) else data
    return pi_sharp(p, alpha)


def twisted_lie_algebroid_data(data: TwistedPoissonData | PoissonData) -> "LieAlgebroidData":
    """Re-encode ``T*M`` with frame ``e_a = dx^a`` as :class:`LieAlgebroidData`."""
    p = data.poisson if isinstance(data, TwistedPoissonData) else data
    d, body = p.dim, p.body
    basis = [tuple(body.const(int(a == b)) for b in range(d)) for a in range(d)]
    rho = [[twisted_anchor(data, basis[a])[i] for a in range(d)] for i in range(d)]
    C = [[[None] * d for _ in range(d)] for _ in range(d)]
    for a in range(d):
        for b in range(d):
            br = twisted_lie_algebroid_bracket(basis[a], basis[b], data)
            for c in range(d):
                C[c][a][b] = br[c]
    return LieAlgebroidData(body, d, _freeze(rho), _freeze(C))


def _freeze(nested):
    if isinstance(nested, list):
        return tuple(_freeze(x) for x in nested)
    return nested


# -- Lie algebroids ----------------------------------------------------------------

@dataclass(frozen=True)
class LieAlgebroidData:
    """Anchor ``anchor[i][a] = rho^i_a`` and bracket ``bracket[c][a][b] = C^c_{ab}`` (0-based storage)."""

    body: GradedAlgebra
    rank: int
    anchor: tuple
    bracket: tuple

    def __post_init__(self):
        d, r = self.dim, self.rank
        if len(self.anchor) != d or any(len(row) != r for row in self.anchor):
            raise InvalidData(f"anchor must be {d}x{r}")
        if len(self.bracket) != r or any(len(m) != r or any(len(row) != r for row in m) for m in self.bracket):
            raise InvalidData(f"bracket coefficients must be {r}x{r}x{r}")
        for c in range(r):
            for a in range(r):
                for b in range(r):
                    if self.bracket[c][a][b] != -self.bracket[c][b][a]:
                        raise InvalidData(f"C^{c+1}_{{ab}} must be antisymmetric in a, b")

    @property
    def dim(self) -> int:
        return len(self.body.body)

    def rho(self, i: int, a: int) -> GradedPolynomial:
        return self.anchor[i - 1][a - 1]

    def C(self, c: int, a: int, b: int) -> GradedPolynomial:
        return self.bracket[c - 1][a - 1][b - 1]

    @classmethod
    def from_functions(cls, body: GradedAlgebra, rank: int, rho: Callable, C: Callable) -> "LieAlgebroidData":
        d = len(body.body)
        anchor = [[_as_body(body, rho(i, a)) for a in range(1, rank + 1)] for i in range(1, d + 1)]
        bracket = [[[_as_body(body, C(c, a, b)) for b in range(1, rank + 1)]
                    for a in range(1, rank + 1)] for c in range(1, rank + 1)]
        return cls(body, rank, _freeze(anchor), _freeze(bracket))

    @classmethod
    def tangent(cls, dim: int) -> "LieAlgebroidData":
        body = body_algebra(dim)
        return cls.from_functions(body, dim, lambda i, a: int(i == a), lambda c, a, b: 0)

    @classmethod
    def lie_algebra(cls, structure_constants: Callable, rank: int, dim: int = 0) -> "LieAlgebroidData":
        """A Lie algebra as an algebroid with zero anchor (over ``R^dim``, default a point)."""
        body = body_algebra(dim)
        return cls.from_functions(body, rank, lambda i, a: 0, structure_constants)

    @classmethod
    def so3_action(cls) -> "LieAlgebroidData":
        """Rotation action algebroid on ``R^3``.

        ``rho^i_a = -eps_{iab} x^b`` and ``C^c_{ab} = eps_{abc}``; this sign makes
        ``[rho(e_a), rho(e_b)] = eps_{abc} rho(e_c)``.
        """
        body = body_algebra(3)
        x = [body.var("x", i) for i in (1, 2, 3)]

        def rho(i, a):
            return sum((x[b - 1].scale(-levi_civita(i, a, b)) for b in (1, 2, 3)), body.zero())

        return cls.from_functions(body, 3, rho, levi_civita)

    def anchor_of(self, e: Sequence[GradedPolynomial]) -> tuple:
        """``rho(e)^i = rho^i_a e^a``."""
        return tuple(
            sum((self.anchor[i][a] * e[a] for a in range(self.rank)), self.body.zero())
            for i in range(self.dim)
        )

    def section_bracket(self, e, f) -> tuple:
        """``[e, f]^c = e^a f^b C^c_{ab} + rho(e) f^c - rho(f) e^c``."""
        re, rf = self.anchor_of(e), self.anchor_of(f)
        out = []
        for c in range(self.rank):
            v = apply_vector(re, f[c]) - apply_vector(rf, e[c])
            for a in range(self.rank):
                if e[a].is_zero():
                    continue
                for b in range(self.rank):
                    if not self.bracket[c][a][b].is_zero():
                        v = v + e[a] * f[b] * self.bracket[c][a][b]
            out.append(v)
        return tuple(out)


def levi_civita(*idx) -> int:
    """Sign of ``idx`` as a permutation of ``1..len(idx)``; zero otherwise."""
    if sorted(idx) != list(range(1, len(idx) + 1)):
        return 0
    return _linalg.permutation_sign([i - 1 for i in idx])


def homological_vector_field(data: LieAlgebroidData) -> tuple[Chart, dict]:
    """``Q = rho^i_a q^a d/dx^i - 1/2 C^a_{bc} q^b q^c d/dq^a`` on ``E[1]``."""
    chart = vector_bundle_chart(data.body, data.rank)
    alg = chart.algebra
    q = [alg.var("q", a) for a in range(1, data.rank + 1)]
    comps = {}
    for i, c in enumerate(alg.body):
        comps[c.key] = sum((alg.embed(data.anchor[i][a]) * q[a] for a in range(data.rank)), alg.zero())
    for a in range(data.rank):
        v = alg.zero()
        for b in range(data.rank):
            for c in range(data.rank):
                if not data.bracket[a][b][c].is_zero():
                    v = v + alg.embed(data.bracket[a][b][c]) * q[b] * q[c]
        comps[("q", (a + 1,))] = v.scale(Fraction(-1, 2))
    return chart, comps


def apply_derivation(components: dict, f: GradedPolynomial) -> GradedPolynomial:
    """``Q f = sum_A Q^A d_left/dz^A f``."""
    out = f.algebra.zero()
    for key, coeff in components.items():
        if coeff.is_zero():
            continue
        df = derive(f, key, "left")
        if not df.is_zero():
            out = out + coeff * df
    return out


def lie_algebroid_from_q(data: LieAlgebroidData) -> CheckReport:
    """Check ``Q^2 = 0`` on generators.

    ``anchor[x]`` parts are ``1/2 Q^2 x^i`` (anchor compatibility),
    ``jacobi[q]`` parts are ``1/2 Q^2 q^a`` (anchored Jacobi identity).
    """
    chart, comps = homological_vector_field(data)
    alg = chart.algebra
    parts = {}
    for c in alg.coordinates:
        q2 = apply_derivation(comps, apply_derivation(comps, alg.var(c.key))).scale(Fraction(1, 2))
        family = "anchor" if c.degree == 0 else "jacobi"
        parts[f"{family}[{c}]"] = q2
    return CheckReport("lie-algebroid", parts, "structures.lie_algebroid_from_q")


def lie_algebroid_identities(data: LieAlgebroidData) -> dict[str, dict]:
    """Direct component formulas for the two identity families.

    ``anchor[(i, b, c)] = rho^i_a C^a_{bc} - [rho_b, rho_c]^i``;
    ``jacobi[(d, a, b, c)] = sum_cyc (C^e_{ab} C^d_{ec} - rho_c(C^d_{ab}))``.
    """
    r, dim = data.rank, data.dim
    basis = [tuple(data.body.const(int(a == b)) for b in range(r)) for a in range(r)]
    rho_vec = [data.anchor_of(basis[a]) for a in range(r)]
    anchor = {}
    for b, c in combinations(range(r), 2):
        br = vector_bracket(rho_vec[b], rho_vec[c])
        for i in range(dim):
            v = sum((data.anchor[i][a] * data.bracket[a][b][c] for a in range(r)), data.body.zero()) - br[i]
            anchor[(i + 1, b + 1, c + 1)] = v
    jacobi = {}

    def piece(d, a, b, c):
        v = apply_vector(rho_vec[c], data.bracket[d][a][b]).scale(-1)
        for e in range(r):
            v = v + data.bracket[e][a][b] * data.bracket[d][e][c]
        return v

    for a, b, c in combinations(range(r), 3):
        for d in range(r):
            jacobi[(d + 1, a + 1, b + 1, c + 1)] = piece(d, a, b, c) + piece(d, b, c, a) + piece(d, c, a, b)
    return {"anchor": anchor, "jacobi": jacobi}


# -- Courant algebroids ----------------------------------------------------------------

@dataclass(frozen=True)
class CourantData:
    """Fiber metric ``k``, anchor ``anchor[i][a] = rho^i_a`` and 3-form ``C_{abc}`` on the fiber."""

    body: GradedAlgebra
    k: tuple
    anchor: tuple
    C: AltForm

    def __post_init__(self):
        r = len(self.k)
        _check_square(self.k, r, "k")
        if any(self.k[a][b] != self.k[b][a] for a in range(r) for b in range(r)):
            raise InvalidData("fiber metric must be symmetric")
        _linalg.inverse(self.k)
        if len(self.anchor) != self.dim or any(len(row) != r for row in self.anchor):
            raise InvalidData(f"anchor must be {self.dim}x{r}")
        if self.C.degree != 3 or self.C.dim != r:
            raise InvalidData("C must be a totally antisymmetric 3-index object on the fiber")

    @property
    def dim(self) -> int:
        return len(self.body.body)

    @property
    def rank(self) -> int:
        return len(self.k)

    @property
    def k_inverse(self):
        return _linalg.inverse(self.k)

    def rho(self, i: int, a: int) -> GradedPolynomial:
        return self.anchor[i - 1][a - 1]

    @classmethod
    def from_functions(cls, body: GradedAlgebra, k, rho: Callable, C: dict | AltForm | None = None) -> "CourantData":
        r = len(k)
        d = len(body.body)
        anchor = [[_as_body(body, rho(i, a)) for a in range(1, r + 1)] for i in range(1, d + 1)]
        if not isinstance(C, AltForm):
            C = AltForm(body, r, 3, C or {})
        k = tuple(tuple(Fraction(v) for v in row) for row in k)
        return cls(body, k, _freeze(anchor), C)

    @classmethod
    def standard(cls, dim: int, H: dict | AltForm | None = None) -> "CourantData":
        """``E = TM + T*M`` with frame ``(d_1..d_n, dx^1..dx^n)``; ``C_{ijk} = H_{ijk}`` on the TM block."""
        body = body_algebra(dim)
        r = 2 * dim
        k = [[int(abs(a - b) == dim) for b in range(r)] for a in range(r)]
        if not isinstance(H, AltForm):
            H = AltForm(body, dim, 3, H or {})
        C = AltForm(body, r, 3, {idx: v for idx, v in H.items()})
        return cls.from_functions(body, k, lambda i, a: int(i == a), C)


class CourantStructure:
    """Operations of a Courant algebroid realized by derived brackets on ``T*[2]E[1]``.

    Sections are degree-1 polynomials ``alpha_a(x) eta^a``; the frame components
    of the corresponding section of ``E`` are ``v^b = k^{ba} alpha_a``.
    """

    def __init__(self, data: CourantData):
        self.data = data
        self.chart = courant_chart(data.body, data.k)
        alg = self.algebra = self.chart.algebra
        self.eta = [alg.var("eta", a) for a in range(1, data.rank + 1)]
        self.xi = _momenta(self.chart, data.dim)
        theta = alg.zero()
        for i in range(data.dim):
            for a in range(data.rank):
                if not data.anchor[i][a].is_zero():
                    theta = theta + alg.embed(data.anchor[i][a]) * self.xi[i] * self.eta[a]
        cubic = alg.zero()
        for (a, b, c), v in data.C.items():
            # 1/3! sum over all orderings = sum over increasing triples
            cubic = cubic + alg.embed(v) * self.eta[a - 1] * self.eta[b - 1] * self.eta[c - 1]
        self.theta = theta + cubic
        self._e_theta: dict = {}

    def lift(self, f) -> GradedPolynomial:
        return self.algebra.embed(f) if isinstance(f, GradedPolynomial) else self.algebra.const(f)

    def section(self, frame_components: Sequence) -> GradedPolynomial:
        """Polynomial encoding of ``v^b e_b``: ``alpha_a = k_{ab} v^b``."""
        k = self.data.k
        out = self.algebra.zero()
        for a in range(self.data.rank):
            for b in range(self.data.rank):
                if k[a][b]:
                    out = out + (self.lift(frame_components[b]) * self.eta[a]).scale(k[a][b])
        return out

    def frame(self, e: GradedPolynomial) -> tuple:
        kinv = self.data.k_inverse
        alpha = [derive(e, ("eta", (a + 1,)), "left") for a in range(self.data.rank)]
        return tuple(
            sum((alpha[a].scale(kinv[b][a]) for a in range(self.data.rank) if kinv[b][a]), self.algebra.zero())
            for b in range(self.data.rank)
        )

    def bracket(self, f, g) -> GradedPolynomial:
        return poisson_bracket(f, g, self.chart)

    def e_theta(self, e: GradedPolynomial) -> GradedPolynomial:
        key = frozenset(e.terms.items())
        value = self._e_theta.get(key)
        if value is None:
            if len(self._e_theta) > 4096:
                self._e_theta.clear()
            value = self._e_theta[key] = self.bracket(e, self.theta)
        return value

    def inner(self, e1, e2) -> GradedPolynomial:
        return self.bracket(e1, e2)

    def anchor(self, e, f) -> GradedPolynomial:
        """``rho(e) f = -{{e, Theta}, f}``."""
        return -self.bracket(self.e_theta(e), self.lift(f))

    def anchor_vector(self, e) -> tuple:
        return tuple(self.anchor(e, self.algebra.var(c.key)) for c in self.algebra.body)

    def dorfman(self, e1, e2) -> GradedPolynomial:
        """``e1 o e2 = -{{e1, Theta}, e2}``."""
        return -self.bracket(self.e_theta(e1), e2)

    def skew(self, e1, e2) -> GradedPolynomial:
        """``[e1, e2]_E = 1/2 ([e1, e2]_D - [e2, e1]_D)``."""
        return (self.dorfman(e1, e2) - self.dorfman(e2, e1)).scale(Fraction(1, 2))

    def D(self, f) -> GradedPolynomial:
        return self.bracket(self.theta, self.lift(f)).scale(D_SIGN)

    def vector_as_polynomial(self, v: Sequence[GradedPolynomial]) -> GradedPolynomial:
        """Encode a vector field as ``v^i xi_i`` so residuals stay polynomials."""
        return sum((self.lift(vi) * self.xi[i] for i, vi in enumerate(v)), self.algebra.zero())

    def random_section(self, rng: random.Random, coeff_degree: int = 2, max_terms: int = 2) -> GradedPolynomial:
        body = self.data.body
        return self.section([random_body_polynomial(body, rng, coeff_degree, max_terms)
                             for _ in range(self.data.rank)])

    def random_function(self, rng: random.Random, coeff_degree: int = 2, max_terms: int = 3) -> GradedPolynomial:
        return self.lift(random_body_polynomial(self.data.body, rng, coeff_degree, max_terms))


def courant_from_theta(data: CourantData) -> CourantStructure:
    return CourantStructure(data)


COURANT_AXIOMS = ("axiom1", "axiom2", "axiom3", "axiom4", "axiom5", "D-definition")


def courant_samples(cs: CourantStructure, trials: int, seed: int, coeff_degree: int = 2):
    rng = random.Random(seed)
    return [
        (cs.random_section(rng, coeff_degree), cs.random_section(rng, coeff_degree),
         cs.random_section(rng, coeff_degree), cs.random_function(rng, coeff_degree))
        for _ in range(trials)
    ]


def courant_axiom_residuals(cs: CourantStructure, e1, e2, e3, f) -> dict[str, GradedPolynomial]:
    """Residuals of the five Courant axioms (and the definition of ``D``) on one sample."""
    o = cs.dorfman
    res = {}
    res["axiom1"] = o(e1, o(e2, e3)) - o(o(e1, e2), e3) - o(e2, o(e1, e3))
    r12 = cs.anchor_vector(o(e1, e2))
    r1, r2 = cs.anchor_vector(e1), cs.anchor_vector(e2)
    res["axiom2"] = cs.vector_as_polynomial([a - b for a, b in zip(r12, vector_bracket(r1, r2))])
    res["axiom3"] = o(e1, f * e2) - f * o(e1, e2) - cs.anchor(e1, f) * e2
    res["axiom4"] = o(e1, e1) - cs.D(cs.inner(e1, e1)).scale(Fraction(1, 2))
    res["axiom5"] = cs.anchor(e1, cs.inner(e2, e3)) - cs.inner(o(e1, e2), e3) - cs.inner(e2, o(e1, e3))
    res["D-definition"] = cs.inner(cs.D(f), e1) - cs.anchor(e1, f)
    return res


def courant_axiom_report(data: CourantData, samples=None, trials: int = 100, seed: int = 0,
                         coeff_degree: int = 2) -> CheckReport:
    """Evaluate every Courant axiom exactly on sampled sections and functions.

    Each part holds the first nonzero residual met (or zero); ``details``
    records the master-equation verdict and per-axiom failure counts.
    """
    cs = CourantStructure(data)
    master = master_obstruction(cs.theta, cs.chart)
    if samples is None:
        samples = courant_samples(cs, trials, seed, coeff_degree)
    parts = {name: cs.algebra.zero() for name in COURANT_AXIOMS}
    failures = {name: 0 for name in COURANT_AXIOMS}
    for e1, e2, e3, f in samples:
        for name, r in courant_axiom_residuals(cs, e1, e2, e3, cs.lift(f)).items():
            if not r.is_zero():
                failures[name] += 1
                if parts[name].is_zero():
                    parts[name] = r
    notes = (f"D f = {D_SIGN:+d}*{{Theta,f}} (sign flip relative to D f = {{Theta,f}})",)
    return CheckReport(
        "courant-axioms", parts, "structures.courant_axiom_report", notes,
        details={"master": master.verdict, "master_obstruction": master.obstruction,
                 "samples": len(samples), "failures": failures},
    )


# -- pre-Courant -------------------------------------------------------------------------

@dataclass(frozen=True)
class PreCourantData:
    courant: CourantData
    H: AltForm

    def __post_init__(self):
        if self.H.degree != 4 or self.H.dim != self.courant.dim:
            raise InvalidData("H must be a 4-form on the base")
        if not exterior_derivative(self.H).is_zero():
            raise InvalidData("H must be closed")


PRE_COURANT_AXIOMS = ("rho-rho*", "anchor-morphism", "self-pairing", "metric-invariance")


def pre_courant_axiom_residuals(cs: CourantStructure, e, e1, e2) -> dict[str, GradedPolynomial]:
    o = cs.dorfman
    res = {}
    r12 = cs.anchor_vector(o(e, e1))
    res["anchor-morphism"] = cs.vector_as_polynomial(
        [a - b for a, b in zip(r12, vector_bracket(cs.anchor_vector(e), cs.anchor_vector(e1)))])
    res["self-pairing"] = cs.inner(o(e, e), e1) - cs.anchor(e1, cs.inner(e, e)).scale(Fraction(1, 2))
    res["metric-invariance"] = cs.anchor(e, cs.inner(e1, e2)) - cs.inner(o(e, e1), e2) - cs.inner(e1, o(e, e2))
    return res


def rho_rho_star(data: CourantData) -> GradedPolynomial:
    """``rho . rho^*`` as the symmetric polynomial ``rho^i_a k^{ab} rho^j_b xi_i xi_j``."""
    cs = CourantStructure(data)
    kinv = data.k_inverse
    out = cs.algebra.zero()
    for i in range(data.dim):
        for j in range(data.dim):
            v = data.body.zero()
            for a in range(data.rank):
                for b in range(data.rank):
                    if kinv[a][b]:
                        v = v + (data.anchor[i][a] * data.anchor[j][b]).scale(kinv[a][b])
            if not v.is_zero():
                out = out + cs.lift(v) * cs.xi[i] * cs.xi[j]
    return out


def pre_courant_axiom_report(data: PreCourantData, samples=None, trials: int = 20, seed: int = 0,
                             coeff_degree: int = 1) -> CheckReport:
    cs = CourantStructure(data.courant)
    if samples is None:
        rng = random.Random(seed)
        samples = [tuple(cs.random_section(rng, coeff_degree) for _ in range(3)) for _ in range(trials)]
    parts = {name: cs.algebra.zero() for name in PRE_COURANT_AXIOMS}
    parts["rho-rho*"] = rho_rho_star(data.courant)
    for e, e1, e2 in samples:
        for name, r in pre_courant_axiom_residuals(cs, e, e1, e2).items():
            if parts[name].is_zero() and not r.is_zero():
                parts[name] = r
    return CheckReport("pre-courant-axioms", parts, "structures.pre_courant_axiom_report")


def rho_star(cs: CourantStructure, beta: Sequence[GradedPolynomial]) -> GradedPolynomial:
    """Section ``rho^*(beta)`` encoded as ``rho^l_a beta_l eta^a``."""
    data = cs.data
    out = cs.algebra.zero()
    for a in range(data.rank):
        v = data.body.zero()
        for l in range(data.dim):
            if not data.anchor[l][a].is_zero():
                v = v + data.anchor[l][a] * data.body.embed(beta[l])
        if not v.is_zero():
            out = out + cs.lift(v) * cs.eta[a]
    return out


def four_form_target(cs: CourantStructure, H: AltForm, e1, e2, e3) -> GradedPolynomial:
    """``rho^* H(rho e1, rho e2, rho e3, -)``."""
    vs = [tuple(cs.data.body.embed(v) for v in cs.anchor_vector(e)) for e in (e1, e2, e3)]
    d = cs.data.dim
    beta = []
    for l in range(1, d + 1):
        v = cs.data.body.zero()
        for i, j, k in product(range(1, d + 1), repeat=3):
            h = H[(i, j, k, l)]
            if not h.is_zero():
                v = v + h * vs[0][i - 1] * vs[1][j - 1] * vs[2][k - 1]
        beta.append(v)
    return rho_star(cs, beta)


def jacobiator(cs: CourantStructure, e1, e2, e3) -> GradedPolynomial:
    o = cs.dorfman
    return o(e1, o(e2, e3)) - o(o(e1, e2), e3) - o(e2, o(e1, e3))


def pre_courant_jacobiator(data: PreCourantData, e1, e2, e3, structure: CourantStructure | None = None) -> GradedPolynomial:
    """Jacobiator of the Dorfman bracket minus ``rho^* H(rho e1, rho e2, rho e3)``."""
    cs = structure or CourantStructure(data.courant)
    return jacobiator(cs, e1, e2, e3) - four_form_target(cs, data.H, e1, e2, e3)


def pre_courant_jacobiator_report(data: PreCourantData, samples=None, trials: int = 20, seed: int = 0,
                                  coeff_degree: int = 1) -> CheckReport:
    cs = CourantStructure(data.courant)
    axioms = pre_courant_axiom_report(data, trials=min(trials, 5), seed=seed, coeff_degree=coeff_degree)
    if samples is None:
        rng = random.Random(seed)
        samples = [tuple(cs.random_section(rng, coeff_degree) for _ in range(3)) for _ in range(trials)]
    residual = cs.algebra.zero()
    for e1, e2, e3 in samples:
        r = pre_courant_jacobiator(data, e1, e2, e3, cs)
        if not r.is_zero():
            residual = r
            break
    parts = {"jacobiator": residual}
    parts.update({f"axiom:{k}": v for k, v in axioms.obstructions.items()})
    return CheckReport("pre-courant-jacobiator", parts, "structures.pre_courant_jacobiator")


# <J(e1, e2, e3), e4> = JACOBIATOR_MASTER_CONSTANT * {{{{1/2{Theta,Theta}, e1}, e2}, e3}, e4}
# on constant sections with zero anchor (found by exhaustive frame evaluation).
JACOBIATOR_MASTER_CONSTANT = -1


def master_defect_pairing(cs: CourantStructure, e1, e2, e3, e4) -> GradedPolynomial:
    half = master_obstruction(cs.theta, cs.chart).obstruction
    out = half
    for e in (e1, e2, e3, e4):
        out = cs.bracket(out, e)
    return out.scale(JACOBIATOR_MASTER_CONSTANT)


def jacobiator_pairing(cs: CourantStructure, e1, e2, e3, e4) -> GradedPolynomial:
    return cs.inner(jacobiator(cs, e1, e2, e3), e4)
