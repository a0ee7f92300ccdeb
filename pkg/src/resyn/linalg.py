"""Exact linear solving via fraction-free (Bareiss) Gaussian elimination."""

from __future__ import annotations

from fractions import Fraction
from math import lcm


class SingularMatrix(ValueError):
    pass


def solve_exact(a: list[list[Fraction]], b: list[list[Fraction]]) -> list[list[Fraction]]:
    """Solve A X = B exactly; A is square and nonsingular, B holds one column per system.

    Rows are scaled to integers, eliminated fraction-free (every division is
    exact), and back-substituted in rationals.
    """
    n = len(a)
    m = len(b[0]) if b else 0
    if any(len(row) != n for row in a) or len(b) != n:
        raise ValueError("dimension mismatch")

    tab: list[list[int]] = []
    for i in range(n):
        row = [Fraction(x) for x in a[i]] + [Fraction(x) for x in b[i]]
        scale = lcm(*[f.denominator for f in row]) if row else 1
        tab.append([int(f * scale) for f in row])

    prev = 1
    for k in range(n):
        pivot_row = next((i for i in range(k, n) if tab[i][k] != 0), None)
        if pivot_row is None:
            raise SingularMatrix("matrix is singular")
        if pivot_row != k:
            tab[k], tab[pivot_row] = tab[pivot_row], tab[k]
        pivot = tab[k][k]
        for i in range(k + 1, n):
            head = tab[i][k]
            for j in range(k, n + m):
                tab[i][j] = (tab[i][j] * pivot - head * tab[k][j]) // prev
        prev = pivot

    x = [[Fraction(0)] * m for _ in range(n)]
    for i in range(n - 1, -1, -1):
        for col in range(m):
            acc = Fraction(tab[i][n + col])
            for j in range(i + 1, n):
                acc -= tab[i][j] * x[j][col]
            x[i][col] = acc / tab[i][i]
    return x
