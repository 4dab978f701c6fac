"""Free graded-commutative polynomial algebra over a finite coordinate chart.

Elements are stored in a canonical normal form: a dict from :class:`Monomial`
to an exact rational coefficient.  Coordinates are ordered by
``(degree, name, index)``; odd factors are kept as a bitmask over those
positions so that Koszul signs reduce to popcounts.

Structure functions such as ``pi^{ij}(x)`` are carried as :class:`JetSymbol`
factors: formal degree-0 functions of the degree-0 coordinates, together with
the sorted multiset of partial derivatives applied to them.

The scalar ring is the rationals, optionally extended by a formal ``hbar`` and
a formal square root of -1 (``I``); both are tracked on the monomial.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Union

from .errors import ChartMismatch, DegreeMismatch, UnknownCoordinate

Scalar = Union[int, Fraction]

SYMMETRIES = ("none", "antisymmetric", "symmetric", "totally-antisymmetric")


@dataclass(frozen=True)
class GradedCoordinate:
    name: str
    index: tuple = ()
    degree: int = 0

    def __post_init__(self):
        object.__setattr__(self, "index", tuple(int(i) for i in self.index))

    @property
    def parity(self) -> int:
        return self.degree % 2

    @property
    def key(self) -> tuple:
        return (self.name, self.index)

    @property
    def sort_key(self) -> tuple:
        return (self.degree, self.name, self.index)

    def __str__(self):
        return _format_key(self.key)


def _generator_key(p) -> "GradedCoordinate":
    """The coordinate of a polynomial that is exactly one generator (coefficient 1)."""
    if len(p.terms) == 1:
        (m, coeff), = p.terms.items()
        if coeff == 1 and not m.jets and not m.hbar and not m.imag:
            if m.odd and not m.even and m.odd & (m.odd - 1) == 0:
                return p.algebra.coordinates[m.odd.bit_length() - 1]
            if not m.odd and len(m.even) == 1 and m.even[0][1] == 1:
                return p.algebra.coordinates[m.even[0][0]]
    raise UnknownCoordinate(f"{p} is not a single coordinate")


def _format_key(key) -> str:
    name, index = key
    if not index:
        return name
    return f"{name}[{','.join(str(i) for i in index)}]"


class JetSymbol(NamedTuple):
    """A formal structure function with applied partial derivatives.

    ``deriv`` holds coordinate keys ``(name, index)`` of degree-0 coordinates,
    sorted, since mixed partials commute.
    """

    base: str
    indices: tuple
    deriv: tuple = ()

    def differentiate(self, key) -> "JetSymbol":
        return JetSymbol(self.base, self.indices, tuple(sorted(self.deriv + (key,))))

    @property
    def underived(self) -> "JetSymbol":
        return JetSymbol(self.base, self.indices, ())


class Symbol:
    """Declaration of a family of structure functions with an index symmetry.

    ``antisymmetric`` acts on the last two slots (``C^c_{ab}``, ``pi^{ij}``);
    ``symmetric`` and ``totally-antisymmetric`` act on every slot.
    """

    def __init__(self, name: str, arity: int, symmetry: str = "none"):
        if symmetry not in SYMMETRIES:
            raise ValueError(f"unknown symmetry {symmetry!r}")
        self.name = name
        self.arity = arity
        self.symmetry = symmetry

    def __repr__(self):
        return f"Symbol({self.name!r}, {self.arity}, {self.symmetry!r})"

    def canonical(self, indices) -> tuple[int, JetSymbol | None]:
        """Return ``(sign, jet)`` with indices in canonical order.

        ``(0, None)`` is returned for index patterns forced to vanish.
        """
        idx = tuple(int(i) for i in indices)
        if len(idx) != self.arity:
            raise ValueError(f"{self.name} takes {self.arity} indices, got {len(idx)}")
        sign = 1
        if self.symmetry == "symmetric":
            idx = tuple(sorted(idx))
        elif self.symmetry == "totally-antisymmetric":
            idx, sign = _sort_with_sign(idx)
        elif self.symmetry == "antisymmetric" and self.arity >= 2:
            head, tail = idx[:-2], idx[-2:]
            tail, sign = _sort_with_sign(tail)
            idx = head + tail
        if sign == 0:
            return 0, None
        return sign, JetSymbol(self.name, idx)


def _sort_with_sign(idx: tuple) -> tuple[tuple, int]:
    if len(set(idx)) != len(idx):
        return idx, 0
    items = list(idx)
    sign = 1
    # insertion sort, counting transpositions
    for i in range(1, len(items)):
        j = i
        while j > 0 and items[j - 1] > items[j]:
            items[j - 1], items[j] = items[j], items[j - 1]
            sign = -sign
            j -= 1
    return tuple(items), sign


class Monomial(NamedTuple):
    """Canonical monomial.

    odd   -- bitmask over algebra positions of the (distinct) odd factors
    even  -- sorted tuple of ``(position, exponent)`` for even factors
    jets  -- sorted tuple of :class:`JetSymbol`, repeated for powers
    hbar  -- power of the formal Planck constant
    imag  -- 0 or 1, power of the formal square root of -1
    """

    odd: int = 0
    even: tuple = ()
    jets: tuple = ()
    hbar: int = 0
    imag: int = 0


ONE = Monomial()


def _odd_sign(left: int, right: int) -> int:
    """Koszul sign of moving the odd factors of ``right`` past those of ``left``."""
    parity = 0
    r = right
    while r:
        low = r & -r
        parity += (left & ~((low << 1) - 1)).bit_count()
        r ^= low
    return -1 if parity & 1 else 1


def _merge_even(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    out = dict(a)
    for pos, e in b:
        out[pos] = out.get(pos, 0) + e
    return tuple(sorted(out.items()))


def mono_mul(m1: Monomial, m2: Monomial):
    """Product of two monomials as ``(sign, monomial)``, or ``None`` if it vanishes."""
    if m1.odd & m2.odd:
        return None
    sign = _odd_sign(m1.odd, m2.odd) if (m1.odd and m2.odd) else 1
    imag = m1.imag + m2.imag
    if imag == 2:
        sign = -sign
        imag = 0
    if not m1.jets:
        jets = m2.jets
    elif not m2.jets:
        jets = m1.jets
    else:
        jets = tuple(sorted(m1.jets + m2.jets))
    return sign, Monomial(
        m1.odd | m2.odd, _merge_even(m1.even, m2.even), jets, m1.hbar + m2.hbar, imag
    )


def _as_fraction(c) -> Fraction:
    return c if isinstance(c, Fraction) else Fraction(c)


class GradedAlgebra:
    """The free graded-commutative algebra generated by a finite set of coordinates."""

    def __init__(self, coordinates: Iterable[GradedCoordinate]):
        coords = sorted(coordinates, key=lambda c: c.sort_key)
        self.coordinates = tuple(coords)
        self._pos = {}
        for i, c in enumerate(coords):
            if c.key in self._pos:
                raise ValueError(f"duplicate coordinate {c}")
            self._pos[c.key] = i
        self.degrees = tuple(c.degree for c in coords)
        self.parities = tuple(c.parity for c in coords)
        self.body = tuple(c for c in coords if c.degree == 0)
        self._body_ordinal = {c.key: i + 1 for i, c in enumerate(self.body)}
        self._hash = hash(self.coordinates)

    def __eq__(self, other):
        return isinstance(other, GradedAlgebra) and self.coordinates == other.coordinates

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"GradedAlgebra({', '.join(f'{c}:{c.degree}' for c in self.coordinates)})"

    def __contains__(self, c):
        key = c.key if isinstance(c, GradedCoordinate) else c
        return key in self._pos

    def position(self, c) -> int:
        """Index of a coordinate given as a :class:`GradedCoordinate`, a key, or a generator polynomial."""
        if isinstance(c, GradedPolynomial):
            c = _generator_key(c)
        if isinstance(c, GradedCoordinate):
            pos = self._pos.get(c.key)
            if pos is None or self.degrees[pos] != c.degree:
                raise UnknownCoordinate(f"{c} (degree {c.degree}) is not in this chart")
            return pos
        pos = self._pos.get(c)
        if pos is None:
            raise UnknownCoordinate(f"{_format_key(c)} is not in this chart")
        return pos

    def coord(self, name: str, *index) -> GradedCoordinate:
        return self.coordinates[self.position((name, tuple(index)))]

    def family(self, name: str) -> list[GradedCoordinate]:
        return [c for c in self.coordinates if c.name == name]

    def body_ordinal(self, key) -> int | None:
        return self._body_ordinal.get(key)

    # -- element constructors ------------------------------------------------
    def zero(self) -> "GradedPolynomial":
        return GradedPolynomial(self, {})

    def one(self) -> "GradedPolynomial":
        return GradedPolynomial(self, {ONE: Fraction(1)})

    def const(self, value) -> "GradedPolynomial":
        value = _as_fraction(value)
        return GradedPolynomial(self, {ONE: value} if value else {})

    def var(self, c, *index) -> "GradedPolynomial":
        if isinstance(c, str):
            c = (c, tuple(index))
        pos = self.position(c)
        if self.parities[pos]:
            mono = Monomial(odd=1 << pos)
        else:
            mono = Monomial(even=((pos, 1),))
        return GradedPolynomial(self, {mono: Fraction(1)})

    def jet(self, symbol: Symbol, *indices, deriv=()) -> "GradedPolynomial":
        sign, j = symbol.canonical(indices)
        if j is None:
            return self.zero()
        if deriv:
            keys = []
            for d in deriv:
                key = d.key if isinstance(d, GradedCoordinate) else d
                if self.degrees[self.position(key)] != 0:
                    raise DegreeMismatch("jets can only be differentiated along degree-0 coordinates")
                keys.append(key)
            j = JetSymbol(j.base, j.indices, tuple(sorted(keys)))
        return GradedPolynomial(self, {Monomial(jets=(j,)): Fraction(sign)})

    def jet_symbol(self, j: JetSymbol) -> "GradedPolynomial":
        return GradedPolynomial(self, {Monomial(jets=(j,)): Fraction(1)})

    def hbar(self) -> "GradedPolynomial":
        return GradedPolynomial(self, {Monomial(hbar=1): Fraction(1)})

    def imag_unit(self) -> "GradedPolynomial":
        return GradedPolynomial(self, {Monomial(imag=1): Fraction(1)})

    # -- monomial helpers ----------------------------------------------------
    def mono_degree(self, m: Monomial) -> int:
        deg = 0
        odd = m.odd
        while odd:
            low = odd & -odd
            deg += self.degrees[low.bit_length() - 1]
            odd ^= low
        for pos, e in m.even:
            deg += self.degrees[pos] * e
        return deg

    def mono_parity(self, m: Monomial) -> int:
        par = m.odd.bit_count()
        for pos, e in m.even:
            par += self.degrees[pos] * e
        return par & 1

    def mono_factors(self, m: Monomial) -> list[tuple[GradedCoordinate, int]]:
        out = [(pos, e) for pos, e in m.even]
        odd = m.odd
        while odd:
            low = odd & -odd
            out.append((low.bit_length() - 1, 1))
            odd ^= low
        out.sort()
        return [(self.coordinates[pos], e) for pos, e in out]

    def embed(self, p: "GradedPolynomial") -> "GradedPolynomial":
        """Re-express ``p`` in this algebra, matching coordinates by name and index."""
        if p.algebra == self:
            return p if p.algebra is self else GradedPolynomial(self, p.terms)
        src = p.algebra
        posmap = {}
        for pos, c in enumerate(src.coordinates):
            target = self._pos.get(c.key)
            if target is None or self.degrees[target] != c.degree:
                posmap[pos] = None
            else:
                posmap[pos] = target
        out: dict[Monomial, Fraction] = {}
        for m, c in p.terms.items():
            sign = 1
            new = Monomial(jets=m.jets, hbar=m.hbar, imag=m.imag)
            for coord, e in src.mono_factors(m):
                tpos = posmap[src.position(coord)]
                if tpos is None:
                    raise UnknownCoordinate(f"{coord} has no counterpart in the target chart")
                factor = Monomial(odd=1 << tpos) if coord.parity else Monomial(even=((tpos, e),))
                s, new = mono_mul(new, factor)
                sign *= s
            for j in m.jets:
                for key in j.deriv:
                    self.position(key)
            _accumulate(out, new, c * sign)
        return GradedPolynomial(self, out)


def _accumulate(out: dict, mono: Monomial, coeff: Fraction) -> None:
    total = out.get(mono, 0) + coeff
    if total:
        out[mono] = total
    else:
        out.pop(mono, None)


class GradedPolynomial:
    """Immutable element of a :class:`GradedAlgebra` in canonical form."""

    __slots__ = ("algebra", "terms")

    def __init__(self, algebra: GradedAlgebra, terms: Mapping[Monomial, Fraction]):
        self.algebra = algebra
        self.terms = terms

    # -- structure -----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def __len__(self):
        return len(self.terms)

    def degrees(self) -> set[int]:
        return {self.algebra.mono_degree(m) for m in self.terms}

    def degree(self) -> int | None:
        """Total degree if homogeneous, else ``None`` (also ``None`` for zero)."""
        degs = self.degrees()
        return degs.pop() if len(degs) == 1 else None

    def is_homogeneous(self) -> bool:
        return len(self.degrees()) <= 1

    def parity(self) -> int | None:
        pars = {self.algebra.mono_parity(m) for m in self.terms}
        return pars.pop() if len(pars) == 1 else None

    def constant_term(self) -> Fraction:
        return self.terms.get(ONE, Fraction(0))

    def body(self) -> "GradedPolynomial":
        """Part free of odd coordinates."""
        return GradedPolynomial(self.algebra, {m: c for m, c in self.terms.items() if not m.odd})

    def hbar_coefficients(self) -> dict[int, "GradedPolynomial"]:
        out: dict[int, dict] = {}
        for m, c in self.terms.items():
            out.setdefault(m.hbar, {})[m._replace(hbar=0)] = c
        return {k: GradedPolynomial(self.algebra, v) for k, v in sorted(out.items())}

    # -- arithmetic ----------------------------------------------------------
    def _check(self, other: "GradedPolynomial") -> None:
        if other.algebra is not self.algebra and other.algebra != self.algebra:
            raise ChartMismatch("polynomials live on different charts")

    def _coerce(self, other) -> "GradedPolynomial":
        if isinstance(other, GradedPolynomial):
            self._check(other)
            return other
        if isinstance(other, (int, Fraction)):
            return self.algebra.const(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if not other.terms:
            return self
        if not self.terms:
            return GradedPolynomial(self.algebra, other.terms)
        out = dict(self.terms)
        for m, c in other.terms.items():
            _accumulate(out, m, c)
        return GradedPolynomial(self.algebra, out)

    __radd__ = __add__

    def __neg__(self):
        return GradedPolynomial(self.algebra, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, s) -> "GradedPolynomial":
        s = _as_fraction(s)
        if not s:
            return self.algebra.zero()
        return GradedPolynomial(self.algebra, {m: c * s for m, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        if not isinstance(other, GradedPolynomial):
            return NotImplemented
        return multiply(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(Fraction(1) / other)
        return NotImplemented

    def __pow__(self, n: int):
        out = self.algebra.one()
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.algebra.const(other)
        if not isinstance(other, GradedPolynomial):
            return NotImplemented
        return self.algebra == other.algebra and self.terms == other.terms

    def __hash__(self):
        return hash((self.algebra, frozenset(self.terms.items())))

    # -- printing ------------------------------------------------------------
    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        return sorted(self.terms.items(), key=lambda mc: monomial_sort_key(self.algebra, mc[0]))

    def term_strings(self) -> list[tuple[str, str]]:
        """Canonical ``(coefficient, monomial)`` string pairs."""
        return [(format_scalar(c), format_monomial(self.algebra, m)) for m, c in self.sorted_terms()]

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for coeff, mono in self.term_strings():
            if mono == "1":
                body = coeff
            elif coeff == "1":
                body = mono
            elif coeff == "-1":
                body = "-" + mono
            else:
                body = f"{coeff}*{mono}"
            parts.append(body)
        text = parts[0]
        for p in parts[1:]:
            text += " - " + p[1:] if p.startswith("-") else " + " + p
        return text

    def __repr__(self):
        return f"GradedPolynomial({self})"


def monomial_sort_key(algebra: GradedAlgebra, m: Monomial) -> tuple:
    factors = []
    for c, e in algebra.mono_factors(m):
        factors.append((algebra.position(c), e))
    return (algebra.mono_degree(m), tuple(factors), m.jets, m.hbar, m.imag)


def format_scalar(c) -> str:
    c = _as_fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_jet(algebra: GradedAlgebra | None, j: JetSymbol) -> str:
    text = j.base
    if j.indices:
        text += "[" + ",".join(str(i) for i in j.indices) + "]"
    for key in j.deriv:
        ordinal = algebra.body_ordinal(key) if algebra is not None else None
        text += f",{ordinal}" if ordinal is not None else f",{_format_key(key)}"
    return text


def format_monomial(algebra: GradedAlgebra, m: Monomial) -> str:
    parts = []
    if m.imag:
        parts.append("I")
    if m.hbar:
        parts.append("hbar" if m.hbar == 1 else f"hbar^{m.hbar}")
    for j in m.jets:
        parts.append(format_jet(algebra, j))
    for c, e in algebra.mono_factors(m):
        parts.append(str(c) if e == 1 else f"{c}^{e}")
    return "*".join(parts) if parts else "1"


# -- operations ----------------------------------------------------------------

def normalize(raw_terms, algebra: GradedAlgebra) -> GradedPolynomial:
    """Bring a list of raw terms into canonical form.

    Each raw term is ``(coefficient, factors)`` where every factor is a
    :class:`GradedCoordinate`, a coordinate key ``(name, index)``, a
    :class:`JetSymbol`, or a :class:`GradedPolynomial`.  Factors are multiplied
    left to right, so the Koszul sign of the reordering is applied.  A
    :class:`GradedPolynomial` may also be passed directly.
    """
    if isinstance(raw_terms, GradedPolynomial):
        if raw_terms.algebra != algebra:
            raise ChartMismatch("polynomial belongs to a different chart")
        return raw_terms
    out: dict[Monomial, Fraction] = {}
    for coeff, factors in raw_terms:
        sign = 1
        mono = ONE
        poly = None
        for f in factors:
            if isinstance(f, GradedPolynomial):
                if poly is None:
                    poly = GradedPolynomial(algebra, {mono: Fraction(sign)})
                poly = poly * f
                continue
            if isinstance(f, JetSymbol):
                factor = Monomial(jets=(f,))
            else:
                pos = algebra.position(f)
                factor = Monomial(odd=1 << pos) if algebra.parities[pos] else Monomial(even=((pos, 1),))
            if poly is not None:
                poly = poly * GradedPolynomial(algebra, {factor: Fraction(1)})
                continue
            prod = mono_mul(mono, factor)
            if prod is None:
                sign = 0
                break
            s, mono = prod
            sign *= s
        if poly is not None:
            for m, c in poly.terms.items():
                _accumulate(out, m, c * _as_fraction(coeff))
        elif sign:
            _accumulate(out, mono, _as_fraction(coeff) * sign)
    return GradedPolynomial(algebra, out)


def multiply(p: GradedPolynomial, q: GradedPolynomial) -> GradedPolynomial:
    p._check(q)
    if not p.terms or not q.terms:
        return p.algebra.zero()
    out: dict[Monomial, Fraction] = {}
    for m1, c1 in p.terms.items():
        for m2, c2 in q.terms.items():
            prod = mono_mul(m1, m2)
            if prod is None:
                continue
            sign, m = prod
            c = c1 * c2
            total = out.get(m, 0) + (c if sign > 0 else -c)
            if total:
                out[m] = total
            else:
                del out[m]
    return GradedPolynomial(p.algebra, out)


def derive(p: GradedPolynomial, c, side: str = "left") -> GradedPolynomial:
    """Graded partial derivative of ``p`` along coordinate ``c``.

    ``side='left'`` pulls the coordinate to the front before stripping it,
    ``side='right'`` pulls it to the back.  Along a degree-0 direction the
    derivative also acts on jet symbols by extending their derivative multiset.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    alg = p.algebra
    pos = alg.position(c)
    out: dict[Monomial, Fraction] = {}
    if alg.parities[pos]:
        bit = 1 << pos
        for m, coeff in p.terms.items():
            if not m.odd & bit:
                continue
            if side == "left":
                flips = (m.odd & (bit - 1)).bit_count()
            else:
                flips = (m.odd >> (pos + 1)).bit_count()
            _accumulate(out, m._replace(odd=m.odd ^ bit), -coeff if flips & 1 else coeff)
        return GradedPolynomial(alg, out)

    key = alg.coordinates[pos].key
    on_jets = alg.degrees[pos] == 0
    for m, coeff in p.terms.items():
        for i, (q, e) in enumerate(m.even):
            if q == pos:
                if e == 1:
                    even = m.even[:i] + m.even[i + 1:]
                else:
                    even = m.even[:i] + ((q, e - 1),) + m.even[i + 1:]
                _accumulate(out, m._replace(even=even), coeff * e)
                break
        if on_jets and m.jets:
            jets = m.jets
            seen = set()
            for i, j in enumerate(jets):
                if j in seen:
                    continue
                seen.add(j)
                mult = jets.count(j)
                rest = jets[:i] + jets[i + 1:]
                new = tuple(sorted(rest + (j.differentiate(key),)))
                _accumulate(out, m._replace(jets=new), coeff * mult)
    return GradedPolynomial(alg, out)


HBAR = "hbar"


def substitute(p: GradedPolynomial, assignments: Mapping, algebra: GradedAlgebra | None = None) -> GradedPolynomial:
    """Parity-respecting algebra morphism.

    Keys of ``assignments`` may be coordinates (or coordinate keys), underived
    :class:`JetSymbol` values, the :data:`HBAR` marker mapped to a scalar, or a
    :class:`Symbol` mapped to a callable ``indices -> GradedPolynomial``.
    Jet derivatives are replaced by actual derivatives of the assigned value.
    Unassigned coordinates are carried over into ``algebra`` (default: the
    algebra of ``p``).
    """
    src = p.algebra
    target = algebra or src
    coord_map: dict[int, GradedPolynomial] = {}
    jet_map: dict[JetSymbol, GradedPolynomial] = {}
    family_map: dict[str, object] = {}
    hbar_value = None
    for key, value in assignments.items():
        if key == HBAR:
            hbar_value = _as_fraction(value)
        elif isinstance(key, Symbol):
            family_map[key.name] = value
        elif isinstance(key, JetSymbol):
            if key.deriv:
                raise ValueError("assign underived jet symbols; derivatives follow")
            value = _lift(value, target)
            deg = value.degree()
            if deg not in (None, 0) or not value.is_homogeneous():
                raise DegreeMismatch(f"jet {key.base}{list(key.indices)} needs a degree-0 value")
            jet_map[key] = value
        else:
            pos = src.position(key)
            value = _lift(value, target)
            deg = value.degree()
            if not value.is_zero() and deg != src.degrees[pos]:
                raise DegreeMismatch(
                    f"{src.coordinates[pos]} has degree {src.degrees[pos]}, value has degree {deg}"
                )
            coord_map[pos] = value

    cache: dict[JetSymbol, GradedPolynomial | None] = {}

    def jet_value(j: JetSymbol):
        if j in cache:
            return cache[j]
        base = j.underived
        value = jet_map.get(base)
        if value is None and j.base in family_map:
            value = _lift(family_map[j.base](j.indices), target)
        if value is not None:
            for key in j.deriv:
                value = derive(value, key)
        cache[j] = value
        return value

    coord_cache: dict[int, GradedPolynomial] = {}

    def coord_value(pos: int) -> GradedPolynomial:
        if pos in coord_map:
            return coord_map[pos]
        if pos not in coord_cache:
            coord_cache[pos] = target.var(src.coordinates[pos].key)
        return coord_cache[pos]

    result = target.zero()
    for m, coeff in p.terms.items():
        scalar_mono = Monomial(hbar=0 if hbar_value is not None else m.hbar, imag=m.imag)
        scalar = coeff * (hbar_value ** m.hbar if hbar_value is not None else 1)
        if not scalar:
            continue
        term = GradedPolynomial(target, {scalar_mono: scalar})
        for j in m.jets:
            v = jet_value(j)
            term = term * (v if v is not None else target.jet_symbol(j))
        if term.is_zero():
            continue
        for c, e in src.mono_factors(m):
            v = coord_value(src.position(c))
            for _ in range(e):
                term = term * v
        result = result + term
    return result


def _lift(value, algebra: GradedAlgebra) -> GradedPolynomial:
    if isinstance(value, GradedPolynomial):
        return algebra.embed(value)
    return algebra.const(value)


def coordinate_algebra(spec: Iterable[tuple[str, int | range | Iterable[int] | None, int]]) -> GradedAlgebra:
    """Build an algebra from ``(name, indices, degree)`` triples.

    ``indices`` is ``None`` for an unindexed coordinate, an int ``n`` for
    ``1..n``, or an iterable of ints.
    """
    coords = []
    for name, indices, degree in spec:
        if indices is None:
            coords.append(GradedCoordinate(name, (), degree))
            continue
        if isinstance(indices, int):
            indices = range(1, indices + 1)
        for i in indices:
            idx = i if isinstance(i, tuple) else (i,)
            coords.append(GradedCoordinate(name, idx, degree))
    return GradedAlgebra(coords)
