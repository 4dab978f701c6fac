"""Totally antisymmetric component tensors (differential forms, E-forms, multivectors)."""

from __future__ import annotations

from itertools import combinations
from typing import Callable, Mapping

from .graded_core import GradedAlgebra, GradedPolynomial, _sort_with_sign


class AltForm:
    """Totally antisymmetric ``m``-index object over indices ``1..dim``.

    Only strictly increasing index tuples are stored; ``form[idx]`` returns the
    component for any index order, with the permutation sign.
    """

    def __init__(self, algebra: GradedAlgebra, dim: int, degree: int,
                 components: Mapping[tuple, GradedPolynomial] | None = None):
        self.algebra = algebra
        self.dim = dim
        self.degree = degree
        self._c: dict[tuple, GradedPolynomial] = {}
        for idx, value in (components or {}).items():
            idx = tuple(idx)
            if len(idx) != degree or any(not 1 <= i <= dim for i in idx):
                raise IndexError(f"bad component index {idx}")
            srt, sign = _sort_with_sign(idx)
            if sign == 0:
                if not _as_poly(algebra, value).is_zero():
                    raise ValueError(f"component {idx} with a repeated index must vanish")
                continue
            value = _as_poly(algebra, value)
            if srt in self._c and self._c[srt] != value.scale(sign):
                raise ValueError(f"inconsistent components for {srt}")
            if not value.is_zero():
                self._c[srt] = value.scale(sign)

    @classmethod
    def from_function(cls, algebra, dim, degree, fn: Callable[[tuple], GradedPolynomial]) -> "AltForm":
        comps = {idx: fn(idx) for idx in combinations(range(1, dim + 1), degree)}
        return cls(algebra, dim, degree, comps)

    @classmethod
    def zero(cls, algebra, dim, degree) -> "AltForm":
        return cls(algebra, dim, degree, {})

    def __getitem__(self, idx) -> GradedPolynomial:
        if isinstance(idx, int):
            idx = (idx,)
        srt, sign = _sort_with_sign(tuple(idx))
        if sign == 0:
            return self.algebra.zero()
        value = self._c.get(srt)
        if value is None:
            return self.algebra.zero()
        return value if sign > 0 else -value

    def items(self):
        return sorted(self._c.items())

    def is_zero(self) -> bool:
        return not self._c

    def __eq__(self, other):
        if not isinstance(other, AltForm):
            return NotImplemented
        return (self.dim, self.degree, self._c) == (other.dim, other.degree, other._c)

    def __add__(self, other: "AltForm") -> "AltForm":
        keys = set(self._c) | set(other._c)
        return AltForm(self.algebra, self.dim, self.degree, {k: self[k] + other[k] for k in keys})

    def __sub__(self, other: "AltForm") -> "AltForm":
        keys = set(self._c) | set(other._c)
        return AltForm(self.algebra, self.dim, self.degree, {k: self[k] - other[k] for k in keys})

    def scale(self, s) -> "AltForm":
        return AltForm(self.algebra, self.dim, self.degree, {k: v.scale(s) for k, v in self._c.items()})

    def map(self, fn) -> "AltForm":
        return AltForm(self.algebra, self.dim, self.degree, {k: fn(v) for k, v in self._c.items()})

    def __repr__(self):
        body = ", ".join(f"{k}: {v}" for k, v in self.items())
        return f"AltForm(deg={self.degree}, {{{body}}})"


def _as_poly(algebra: GradedAlgebra, value) -> GradedPolynomial:
    if isinstance(value, GradedPolynomial):
        return algebra.embed(value)
    return algebra.const(value)
