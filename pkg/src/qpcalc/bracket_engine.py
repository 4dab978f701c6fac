"""Graded symplectic charts, the induced Poisson bracket, and master equations.

Sign convention: a Darboux pair ``(a, b, w)`` means ``{a, b} = w``; the
reverse bracket follows from graded antisymmetry,
``{b, a} = -(-1)^{|a||b|} w``.  A metric block on coordinates ``eta`` of
degree ``n/2`` gives ``{eta^a, eta^b} = k^{ab}``.  The bracket of arbitrary
elements is

    {f, g} = sum_{A,B} (f d_right/dz^A) {z^A, z^B} (d_left/dz^B g).

With pairs ``(x^i, xi_i, 1)`` this gives ``{x^i, xi_j} = delta^i_j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from . import _linalg
from .errors import ChartMismatch, DegreeMismatch, InvalidData, WrongChartDegree
from .graded_core import (
    GradedAlgebra,
    GradedCoordinate,
    GradedPolynomial,
    HBAR,
    derive,
    substitute,
)

CONVENTIONS = {
    "bracket": "{f,g} = sum f*d_right(z^A) {z^A,z^B} d_left(z^B)*g; {x^i,xi_j} = +delta",
    "master_obstruction": "1/2*{Theta,Theta}",
    "bv_laplacian": "Delta = sum_pairs (-1)^|Phi| w * d_left(Phi) d_left(Phi*)",
    "quantum_master": "-2*I*hbar*Delta(S) + {S,S}",
}


class Chart:
    """A coordinate chart, optionally with a Darboux symplectic form of degree ``n``.

    ``pairs`` is a sequence of ``(a, b)`` or ``(a, b, weight)`` with coordinates
    (or coordinate keys); ``metric`` is ``(coords, k)`` with ``k`` a symmetric
    invertible rational matrix.  A chart without ``degree`` carries no bracket
    (it is just the function algebra of a graded manifold, e.g. ``E[1]``).
    """

    def __init__(self, coordinates, degree: int | None = None, pairs=(), metric=None):
        self.algebra = coordinates if isinstance(coordinates, GradedAlgebra) else GradedAlgebra(coordinates)
        self.degree = degree
        alg = self.algebra
        self.pairs: list[tuple[GradedCoordinate, GradedCoordinate, Fraction]] = []
        self.metric_coords: tuple[GradedCoordinate, ...] = ()
        self.metric = None
        self.metric_inverse = None
        if degree is None:
            if pairs or metric:
                raise InvalidData("a pairing needs a chart degree")
            self._entries = ()
            return

        used: dict = {}

        def claim(c):
            pos = alg.position(c)
            coord = alg.coordinates[pos]
            if coord.key in used:
                raise InvalidData(f"{coord} appears in more than one pair")
            used[coord.key] = True
            return coord

        for item in pairs:
            a, b = claim(item[0]), claim(item[1])
            w = Fraction(item[2]) if len(item) > 2 else Fraction(1)
            if a.degree + b.degree != degree:
                raise DegreeMismatch(f"pair {a} <-> {b}: degrees {a.degree}+{b.degree} != {degree}")
            if not w:
                raise InvalidData("pair weight must be nonzero")
            self.pairs.append((a, b, w))

        if metric is not None:
            coords, k = metric
            coords = tuple(claim(c) for c in coords)
            k = [[Fraction(v) for v in row] for row in k]
            for c in coords:
                if 2 * c.degree != degree:
                    raise DegreeMismatch(f"metric coordinate {c} must have degree {degree}/2")
            if len(k) != len(coords) or any(len(row) != len(coords) for row in k):
                raise InvalidData("metric matrix has the wrong shape")
            if any(k[a][b] != k[b][a] for a in range(len(k)) for b in range(len(k))):
                raise InvalidData("fiber metric must be symmetric")
            self.metric_coords = coords
            self.metric = k
            self.metric_inverse = _linalg.inverse(k)

        missing = [c for c in alg.coordinates if c.key not in used]
        if missing:
            raise InvalidData(f"unpaired coordinates: {', '.join(map(str, missing))}")

        entries = []
        for a, b, w in self.pairs:
            pa, pb = alg.position(a), alg.position(b)
            entries.append((pa, pb, w))
            back = -w if (a.degree * b.degree) % 2 == 0 else w
            entries.append((pb, pa, back))
        for i, a in enumerate(self.metric_coords):
            for j, b in enumerate(self.metric_coords):
                kij = self.metric_inverse[i][j]
                if kij:
                    entries.append((alg.position(a), alg.position(b), kij))
        self._entries = tuple(entries)

    @property
    def symplectic(self) -> bool:
        return self.degree is not None

    def __repr__(self):
        return f"Chart(degree={self.degree}, {self.algebra!r})"

    def var(self, name, *index) -> GradedPolynomial:
        return self.algebra.var(name, *index)

    def entries(self):
        """``(position A, position B, {z^A, z^B})`` for every nonzero generator bracket."""
        return self._entries

    def _own(self, p: GradedPolynomial) -> GradedPolynomial:
        if p.algebra != self.algebra:
            raise ChartMismatch("polynomial does not belong to this chart")
        return p


# -- chart factories -----------------------------------------------------------

def _body_coords(body) -> list[GradedCoordinate]:
    if isinstance(body, int):
        return [GradedCoordinate("x", (i,), 0) for i in range(1, body + 1)]
    coords = body.body if isinstance(body, GradedAlgebra) else list(body)
    return list(coords)


def cotangent_chart(body, n: int, momentum: str = "xi") -> Chart:
    """``T*[n]M`` with coordinates ``x`` (degree 0) and ``xi`` (degree ``n``)."""
    xs = _body_coords(body)
    coords = list(xs)
    pairs = []
    for c in xs:
        p = GradedCoordinate(momentum, c.index, n)
        coords.append(p)
        pairs.append((c, p, 1))
    return Chart(coords, n, pairs)


def lie_algebra_chart(rank: int) -> Chart:
    """``T*[2]g[1]`` with odd ``c^a`` and ``b_a`` and ``{c^a, b_b} = delta``."""
    coords, pairs = [], []
    for a in range(1, rank + 1):
        c = GradedCoordinate("c", (a,), 1)
        b = GradedCoordinate("b", (a,), 1)
        coords += [c, b]
        pairs.append((c, b, 1))
    return Chart(coords, 2, pairs)


def courant_chart(body, k, fiber: str = "eta", momentum: str = "xi") -> Chart:
    """``T*[2]E[1]``: ``x`` (0), ``eta`` (1) with fiber metric ``k``, ``xi`` (2)."""
    xs = _body_coords(body)
    etas = [GradedCoordinate(fiber, (a,), 1) for a in range(1, len(k) + 1)]
    coords, pairs = list(xs) + etas, []
    for c in xs:
        p = GradedCoordinate(momentum, c.index, 2)
        coords.append(p)
        pairs.append((c, p, 1))
    return Chart(coords, 2, pairs, metric=(etas, k))


def bv_chart(field_degrees: Sequence[int], field: str = "phi", antifield: str = "phistar") -> Chart:
    """Degree -1 chart with pairs ``(phi^i, phistar_i)``, ``|phi|+|phistar| = -1``."""
    coords, pairs = [], []
    for i, g in enumerate(field_degrees, start=1):
        f = GradedCoordinate(field, (i,), g)
        s = GradedCoordinate(antifield, (i,), -1 - g)
        coords += [f, s]
        pairs.append((f, s, 1))
    return Chart(coords, -1, pairs)


def vector_bundle_chart(body, rank: int, fiber: str = "q") -> Chart:
    """``E[1]`` with ``x`` (degree 0) and odd fiber coordinates ``q``; no bracket."""
    xs = _body_coords(body)
    return Chart(list(xs) + [GradedCoordinate(fiber, (a,), 1) for a in range(1, rank + 1)])


# -- reports -------------------------------------------------------------------

@dataclass(frozen=True)
class CheckReport:
    """Verdict of one identity check.

    ``obstructions`` maps a label to the residual polynomial; the verdict is
    ``pass`` exactly when every residual is the zero polynomial.
    """

    name: str
    obstructions: Mapping[str, GradedPolynomial]
    provenance: str = ""
    notes: tuple = ()
    details: Mapping[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(p.is_zero() for p in self.obstructions.values())

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    @property
    def obstruction(self) -> GradedPolynomial:
        values = list(self.obstructions.values())
        if len(values) == 1:
            return values[0]
        for v in values:
            if not v.is_zero():
                return v
        return values[0]

    def failing(self) -> list[str]:
        return [k for k, v in self.obstructions.items() if not v.is_zero()]


def single(name: str, obstruction: GradedPolynomial, provenance: str = "", notes=()) -> CheckReport:
    return CheckReport(name, {"": obstruction}, provenance, tuple(notes))


# -- operations ----------------------------------------------------------------

def poisson_bracket(f: GradedPolynomial, g: GradedPolynomial, chart: Chart) -> GradedPolynomial:
    """Graded Poisson bracket of degree ``-n`` induced by the chart's symplectic form."""
    if not chart.symplectic:
        raise WrongChartDegree("chart has no symplectic form")
    f, g = chart._own(f), chart._own(g)
    alg = chart.algebra
    result = alg.zero()
    if f.is_zero() or g.is_zero():
        return result
    right: dict[int, GradedPolynomial] = {}
    left: dict[int, GradedPolynomial] = {}
    for a, b, w in chart.entries():
        fa = right.get(a)
        if fa is None:
            fa = right[a] = derive(f, alg.coordinates[a], "right")
        if fa.is_zero():
            continue
        gb = left.get(b)
        if gb is None:
            gb = left[b] = derive(g, alg.coordinates[b], "left")
        if gb.is_zero():
            continue
        result = result + (fa * gb).scale(w)
    return result


def _require_theta(theta: GradedPolynomial, chart: Chart) -> None:
    if not chart.symplectic:
        raise WrongChartDegree("chart has no symplectic form")
    if theta.is_zero():
        return
    deg = theta.degree()
    if deg != chart.degree + 1:
        raise DegreeMismatch(
            f"homological function must have degree {chart.degree + 1}, got "
            + ("an inhomogeneous polynomial" if deg is None else str(deg))
        )


def q_apply(theta: GradedPolynomial, f: GradedPolynomial, chart: Chart) -> GradedPolynomial:
    """Homological vector field ``Q f = {Theta, f}``."""
    _require_theta(theta, chart)
    return poisson_bracket(theta, f, chart)


def master_obstruction(theta: GradedPolynomial, chart: Chart, provenance: str = "") -> CheckReport:
    """``1/2 {Theta, Theta}``; passes iff it vanishes identically."""
    _require_theta(theta, chart)
    obstruction = poisson_bracket(theta, theta, chart).scale(Fraction(1, 2))
    return single("master", obstruction, provenance or "bracket_engine.master_obstruction")


def derived_bracket(a: GradedPolynomial, b: GradedPolynomial, theta: GradedPolynomial, chart: Chart) -> GradedPolynomial:
    """``{{a, Theta}, b}`` without any extractor sign."""
    return poisson_bracket(poisson_bracket(a, theta, chart), b, chart)


def _require_bv(chart: Chart) -> None:
    if chart.degree != -1:
        raise WrongChartDegree(f"BV operations need a degree -1 chart, got {chart.degree}")


def bv_laplacian(F: GradedPolynomial, chart: Chart) -> GradedPolynomial:
    """``Delta F = sum_pairs (-1)^|Phi| w * d_left(Phi) d_left(Phi*) F``."""
    _require_bv(chart)
    F = chart._own(F)
    result = chart.algebra.zero()
    for a, b, w in chart.pairs:
        inner = derive(F, b, "left")
        if inner.is_zero():
            continue
        result = result + derive(inner, a, "left").scale(-w if a.parity else w)
    return result


def quantum_master_obstruction(S: GradedPolynomial, chart: Chart) -> CheckReport:
    """``-2 i hbar Delta S + {S, S}``; passes iff zero as a polynomial in hbar."""
    _require_bv(chart)
    alg = chart.algebra
    ihbar = alg.imag_unit() * alg.hbar()
    obstruction = (ihbar * bv_laplacian(S, chart)).scale(-2) + poisson_bracket(S, S, chart)
    return single("quantum-master", obstruction, "bracket_engine.quantum_master_obstruction")


def at_hbar_zero(p: GradedPolynomial) -> GradedPolynomial:
    return substitute(p, {HBAR: 0})
