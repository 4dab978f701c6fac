"""Small exact linear algebra over the rationals and over commuting ring elements."""

from __future__ import annotations

from fractions import Fraction
from itertools import permutations

from .errors import NotInvertible


def inverse(matrix):
    """Gauss-Jordan inverse of a square rational matrix."""
    n = len(matrix)
    aug = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col]), None)
        if pivot is None:
            raise NotInvertible("matrix is singular")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def permutation_sign(perm) -> int:
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def det(matrix, one=1):
    """Leibniz determinant; entries need only commute and support + and *."""
    n = len(matrix)
    if n == 0:
        return one
    total = None
    for perm in permutations(range(n)):
        term = one
        for i, j in enumerate(perm):
            term = term * matrix[i][j]
        term = term if permutation_sign(perm) > 0 else -term
        total = term if total is None else total + term
    return total


def adjugate(matrix, one=1):
    n = len(matrix)
    if n == 1:
        return [[one]]
    adj = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(matrix) if k != i]
            cof = det(minor, one)
            adj[j][i] = cof if (i + j) % 2 == 0 else -cof
    return adj
