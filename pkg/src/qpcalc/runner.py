"""Run the checks declared in a model file and serialize the results."""

from __future__ import annotations

import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from . import __version__
from . import algebroid_calculus as ac
from . import berezin as bz
from . import bracket_engine as be
from . import structures as st
from .errors import ModelError, QPError
from .forms import AltForm
from .graded_core import GradedAlgebra, format_monomial
from .model import CheckDecl, CompiledModel, ModelFile, parse_model


def _q(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


CONVENTIONS = {
    **be.CONVENTIONS,
    "jacobi_normalization": _q(st.JACOBI_NORMALIZATION),
    "courant_d_sign": str(st.D_SIGN),
    "jacobiator_master_constant": str(st.JACOBIATOR_MASTER_CONSTANT),
    "berezin_measure_order": bz.MEASURE_ORDER,
    "alt_weight": _q(ac.ALT_WEIGHT),
    "schouten": "[P,Q]_S = {Q,P} on T*[1]M",
    "twisted_anchor": "+pi#, pi#(alpha) = pi(alpha, -)",
}


@dataclass(frozen=True)
class CheckSpec:
    name: str
    anchor: str
    run: Callable
    params: tuple = ()
    default_trials: int | None = None


class CheckInputError(QPError):
    pass


def _need(cm: CompiledModel, *kinds):
    for k in kinds:
        if k in cm.data:
            return k, cm.data[k]
    raise CheckInputError(f"needs 'data {' or '.join(kinds)}'")


def _params(p, default_trials):
    return p.get("trials", default_trials), p.get("seed", 0), p.get("degree")


# -- check implementations -------------------------------------------------------------

def _master(cm: CompiledModel, p):
    if cm.theta is not None:
        if cm.chart is None:
            raise CheckInputError("theta needs a chart with a degree")
        return be.master_obstruction(cm.theta, cm.chart)
    kind, data = _need(cm, "poisson", "courant", "pre_courant")
    if kind == "poisson":
        chart = data.chart()
        return be.master_obstruction(data.theta(chart), chart)
    cd = data[0] if kind == "courant" else data[0].courant
    cs = st.CourantStructure(cd)
    return be.master_obstruction(cs.theta, cs.chart)


def _quantum(cm: CompiledModel, p):
    if cm.theta is None or cm.chart is None:
        raise CheckInputError("needs theta on a degree -1 chart")
    return be.quantum_master_obstruction(cm.theta, cm.chart)


def _poisson_jacobi(cm, p):
    return st.poisson_equivalence_report(_need(cm, "poisson")[1])


def _schouten(cm, p):
    data = _need(cm, "poisson", "twisted_poisson")[1]
    if isinstance(data, st.TwistedPoissonData):
        data = data.poisson
    chart = data.chart()
    theta = data.theta(chart)
    half = st.schouten_bracket(theta, theta, chart).scale(Fraction(1, 2))
    master = be.poisson_bracket(theta, theta, chart).scale(Fraction(1, 2))
    return be.CheckReport("schouten", {"half-schouten": half, "agreement:master": half - master},
                          "structures.schouten_bracket")


def _twisted_poisson(cm, p):
    return st.twisted_poisson_obstruction(_need(cm, "twisted_poisson")[1])


def _algebroid(cm) -> st.LieAlgebroidData:
    kind, data = _need(cm, "lie_algebroid", "twisted_poisson", "poisson")
    return data[0] if kind == "lie_algebroid" else st.twisted_lie_algebroid_data(data)


def _lie_algebroid(cm, p):
    return st.lie_algebroid_from_q(_algebroid(cm))


def _courant(cm: CompiledModel) -> tuple:
    kind, data = _need(cm, "courant", "pre_courant")
    if kind == "courant":
        return data
    return data[0].courant, data[1]


def _courant_axioms(cm, p):
    cd = _courant(cm)[0]
    trials, seed, degree = _params(p, 100)
    rep = st.courant_axiom_report(cd, trials=trials, seed=seed, coeff_degree=2 if degree is None else degree)
    cs = st.CourantStructure(cd)
    parts = {"master": be.master_obstruction(cs.theta, cs.chart).obstruction, **rep.obstructions}
    return be.CheckReport(rep.name, parts, rep.provenance, rep.notes, rep.details)


def _pre_courant(cm, p):
    kind, data = _need(cm, "pre_courant", "courant")
    if kind == "courant":
        cd = data[0]
        pre = st.PreCourantData(cd, AltForm.zero(cd.body, cd.dim, 4))
    else:
        pre = data[0]
    trials, seed, degree = _params(p, 20)
    return st.pre_courant_jacobiator_report(pre, trials=trials, seed=seed, coeff_degree=1 if degree is None else degree)


def _e_differential(cm, p):
    data = _algebroid(cm)
    trials, seed, degree = _params(p, 50)
    rng = random.Random(seed)
    degrees = list(range(max(data.rank - 1, 1)))
    forms = [ac.random_e_form(data, degrees[t % len(degrees)], rng, 2 if degree is None else degree)
             for t in range(trials)]
    return ac.e_differential_squared(data, forms)


def _connection(cm, p, data, conn, metric=None):
    if conn is not None:
        return conn, None
    seed = p.get("seed", 0)
    conn = ac.ConnectionData.random(data.body, data.rank, random.Random(seed), metric=metric)
    return conn, f"no connection declared: random connection from seed {seed}"


def _with_note(rep: be.CheckReport, note):
    if note is None:
        return rep
    return be.CheckReport(rep.name, rep.obstructions, rep.provenance, rep.notes + (note,), rep.details)


def _lie_with_connection(cm):
    return _need(cm, "lie_algebroid")[1]


def _decomposition(cm, p):
    data, conn = _lie_with_connection(cm)
    conn, note = _connection(cm, p, data, conn)
    return _with_note(ac.decomposition_check(data, conn), note)


def _bianchi(cm, p):
    data, conn = _lie_with_connection(cm)
    conn, note = _connection(cm, p, data, conn)
    return _with_note(ac.bianchi_check(data, conn), note)


def _twisted_torsion(cm, p):
    kind, (data, conn) = _need(cm, "pre_courant", "courant")
    cd = data.courant if kind == "pre_courant" else data
    if conn is not None and conn.metric is None:
        raise CheckInputError("the declared connection is not compatible with the fiber metric")
    conn, note = _connection(cm, p, cd, conn, metric=cd.k)
    trials, seed, degree = _params(p, 50)
    rep = ac.twisted_torsion_report(data, conn, trials=trials, seed=seed, coeff_degree=1 if degree is None else degree)
    return _with_note(rep, note)


def _berezinian(cm: CompiledModel, p):
    odd = [c for c in cm.algebra.coordinates if c.parity]
    if len(odd) < 2:
        raise CheckInputError("needs at least two odd coordinates")
    alg = GradedAlgebra(odd)
    trials, seed, _ = _params(p, 100)
    rng = random.Random(seed)
    zero = alg.zero()
    parts = {}
    # single odd variable: int dth 1 = 0, int dth th = 1
    th = alg.var(odd[0].key)
    parts["single-variable"] = bz.berezin_integral(alg.one(), [th]) + (bz.berezin_integral(th, [th]) - alg.one())
    mult = zero
    for shape in ((1, 1), (2, 1)):
        for _ in range(trials):
            M, N = (bz.random_supermatrix(alg, *shape, rng) for _ in range(2))
            r = bz.berezinian(M @ N) - bz.berezinian(M) * bz.berezinian(N)
            if mult.is_zero() and not r.is_zero():
                mult = r
    parts["multiplicativity"] = mult
    a, d = rng.randint(1, 9), rng.randint(1, 9)
    block = bz.SuperMatrix.build(alg, [[a]], None, None, [[d]])
    parts["block-diagonal"] = bz.berezinian(block) - alg.const(Fraction(a, d))
    return be.CheckReport("berezinian", parts, "berezin.berezinian")


CHECKS: dict[str, CheckSpec] = {c.name: c for c in (
    CheckSpec("master", "classical master equation {Theta,Theta} = 0", _master),
    CheckSpec("quantum-master", "quantum master equation -2i hbar Delta S + {S,S} = 0", _quantum),
    CheckSpec("poisson-jacobi", "degree-1 QP manifold: Jacobi identity of the induced Poisson bivector",
              _poisson_jacobi),
    CheckSpec("schouten", "Poisson condition [pi,pi]_S = 0 through the Schouten bracket", _schouten),
    CheckSpec("twisted-poisson", "twisted Poisson condition 1/2[pi,pi]_S = <(x)^3 pi, H>", _twisted_poisson),
    CheckSpec("lie-algebroid", "degree-1 Q-manifold defines a Lie algebroid", _lie_algebroid),
    CheckSpec("courant-axioms", "degree-2 QP manifold defines a Courant algebroid (five axioms)",
              _courant_axioms, ("trials", "seed", "degree"), 100),
    CheckSpec("pre-courant-jacobiator", "pre-Courant algebroid: Jacobiator equals rho* H(rho.,rho.,rho.)",
              _pre_courant, ("trials", "seed", "degree"), 20),
    CheckSpec("e-differential-squared", "Lie algebroid differential squares to zero",
              _e_differential, ("trials", "seed", "degree"), 50),
    CheckSpec("basic-curvature-decomposition", "basic curvature = nabla T + 2 Alt i_rho R",
              _decomposition, ("seed",)),
    CheckSpec("bianchi", "Bianchi identity for the basic curvature", _bianchi, ("seed",)),
    CheckSpec("twisted-courant-torsion", "E-torsion of a pre-Courant algebroid is a 3-form",
              _twisted_torsion, ("trials", "seed", "degree"), 50),
    CheckSpec("berezinian", "Berezinian Ber = det(A - B D^-1 C) / det D and Berezin integration",
              _berezinian, ("trials", "seed"), 100),
)}


# -- results and reports -----------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    verdict: str
    obstruction: tuple  # ((coeff "p/q", monomial, part), ...)
    paper_anchor: str
    failing: tuple = ()
    notes: tuple = ()

    def as_json(self) -> dict:
        terms = [{"coeff": c, "monomial": m, "part": part} for c, m, part in self.obstruction]
        return {"name": self.name, "verdict": self.verdict, "obstruction": terms, "paper_anchor": self.paper_anchor}


@dataclass(frozen=True)
class Report:
    model: str
    engine: str
    seed: int
    conventions: dict
    checks: tuple = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.verdict == "pass" for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def as_json(self) -> dict:
        return {"model": self.model, "engine": self.engine, "seed": self.seed,
                "conventions": dict(self.conventions), "checks": [c.as_json() for c in self.checks]}


def _terms(report: be.CheckReport) -> tuple:
    out = []
    for part, poly in report.obstructions.items():
        for m, c in poly.sorted_terms():
            coeff = Fraction(c)
            out.append((f"{coeff.numerator}/{coeff.denominator}", format_monomial(poly.algebra, m), part))
    return tuple(out)


def run_check(model: ModelFile, decl: CheckDecl, seed: int = 0, trials: int | None = None) -> CheckResult:
    spec = CHECKS.get(decl.name)
    span = decl.span
    where = (span.line, span.column) if span else (None, None)
    if spec is None:
        raise ModelError(f"unknown check {decl.name!r}", *where)
    params = {"seed": seed}
    if trials is not None:
        params["trials"] = trials
    for key, value in decl.params:
        if key not in spec.params:
            raise ModelError(f"check {decl.name} does not take {key}=", *where)
        if not isinstance(value, Fraction) or value.denominator != 1 or value < 0:
            raise ModelError(f"{key} must be a nonnegative integer", *where)
        params[key] = int(value)
    try:
        rep = spec.run(model.compiled, params)
    except ModelError:
        raise
    except QPError as exc:
        raise ModelError(f"check {decl.name}: {exc}", *where) from exc
    return CheckResult(decl.name, rep.verdict, _terms(rep), spec.anchor, tuple(rep.failing()), tuple(rep.notes))


def _worker(args) -> CheckResult:
    text, index, seed, trials = args
    model = parse_model(text)
    return run_check(model, model.checks[index], seed, trials)


def run_checks(model: ModelFile, seed: int = 0, trials: int | None = None, parallel: bool = False) -> Report:
    """Run every declared check in order; deterministic for fixed ``(model, seed)``."""
    decls = model.checks
    if parallel and len(decls) > 1:
        with ProcessPoolExecutor() as pool:
            results = list(pool.map(_worker, [(model.source, i, seed, trials) for i in range(len(decls))]))
    else:
        results = [run_check(model, d, seed, trials) for d in decls]
    return Report(model.digest, f"qpcalc {__version__}", seed, dict(CONVENTIONS), tuple(results))


def render_json(report: Report) -> str:
    return json.dumps(report.as_json(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def render_text(report: Report) -> str:
    lines = [f"model   {report.model}", f"engine  {report.engine}", f"seed    {report.seed}", ""]
    for c in report.checks:
        lines.append(f"[{c.verdict}] {c.name}")
        for note in c.notes:
            lines.append(f"    note: {note}")
        parts = {}
        for coeff, mono, part in c.obstruction:
            parts.setdefault(part, []).append((coeff, mono))
        for part, terms in parts.items():
            lines.append(f"    obstruction{' [' + part + ']' if part else ''}:")
            lines.extend(f"      {coeff.removesuffix('/1'):>8}  {mono}" for coeff, mono in terms)
    passed = sum(c.verdict == "pass" for c in report.checks)
    lines += ["", f"{passed} passed, {len(report.checks) - passed} failed"]
    return "\n".join(lines) + "\n"


def emit_report(report: Report, format: str = "text", path=None) -> str:
    """Render ``report``; write it to ``path`` when given."""
    if format not in ("text", "json"):
        raise ValueError(f"unknown report format {format!r}")
    text = render_json(report) if format == "json" else render_text(report)
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text
