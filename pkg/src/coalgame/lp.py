"""Exact linear-program feasibility over rationals.

Small two-phase simplex with Bland's rule, all arithmetic in
fractions.Fraction, so feasibility verdicts used by golden tests carry
no floating-point doubt. Sized for the package's needs (tens of
variables, a few thousand rows at the very top of the size caps).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


def solve_lp_max(
    c: Sequence[Fraction],
    a_ub: Sequence[Sequence[Fraction]],
    b_ub: Sequence[Fraction],
    a_eq: Sequence[Sequence[Fraction]] = (),
    b_eq: Sequence[Fraction] = (),
):
    """Maximize c.x subject to a_ub x <= b_ub, a_eq x = b_eq, x >= 0.

    Returns (status, x, value) with x a list of Fractions when optimal.
    """
    n = len(c)
    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    needs_artificial: list[bool] = []

    for a, b in zip(a_ub, b_ub):
        row = [Fraction(v) for v in a]
        b = Fraction(b)
        if b < 0:  # flip so rhs >= 0; slack becomes surplus, needs artificial
            row = [-v for v in row]
            b = -b
            rows.append(row + [Fraction(-1)])
            needs_artificial.append(True)
        else:
            rows.append(row + [Fraction(1)])
            needs_artificial.append(False)
        rhs.append(b)

    for a, b in zip(a_eq, b_eq):
        row = [Fraction(v) for v in a]
        b = Fraction(b)
        if b < 0:
            row = [-v for v in row]
            b = -b
        rows.append(row + [Fraction(0)])
        rhs.append(b)
        needs_artificial.append(True)

    m = len(rows)
    n_slack = len(b_ub)
    # column layout: x (n) | slacks (n_slack) | artificials (added below)
    width = n + n_slack
    tableau: list[list[Fraction]] = []
    slack_idx = 0
    for i, row in enumerate(rows):
        full = [Fraction(0)] * width
        full[:n] = row[:n]
        if i < n_slack:
            full[n + slack_idx] = row[n]
            slack_idx += 1
        tableau.append(full)

    basis: list[int] = [-1] * m
    art_cols: list[int] = []
    for i in range(m):
        if i < n_slack and not needs_artificial[i]:
            basis[i] = n + i
    for i in range(m):
        if basis[i] < 0:
            for r in range(m):
                tableau[r].append(Fraction(1) if r == i else Fraction(0))
            art_cols.append(width)
            basis[i] = width
            width += 1

    def pivot(row: int, col: int) -> None:
        piv = tableau[row][col]
        tableau[row] = [v / piv for v in tableau[row]]
        rhs[row] /= piv
        for r in range(m):
            if r != row and tableau[r][col] != 0:
                f = tableau[r][col]
                tableau[r] = [v - f * w for v, w in zip(tableau[r], tableau[row])]
                rhs[r] -= f * rhs[row]
        basis[row] = col

    def run_simplex(obj: list[Fraction], allow: set[int]) -> str:
        while True:
            # reduced costs for a max problem
            z = [Fraction(0)] * len(obj)
            for r, b in enumerate(basis):
                coef = obj[b]
                if coef != 0:
                    for j in range(len(obj)):
                        z[j] += coef * tableau[r][j]
            entering = -1
            for j in range(len(obj)):  # Bland: first improving column
                if j in allow and obj[j] - z[j] > 0:
                    entering = j
                    break
            if entering < 0:
                return OPTIMAL
            leaving = -1
            best = None
            for r in range(m):
                if tableau[r][entering] > 0:
                    ratio = rhs[r] / tableau[r][entering]
                    if best is None or ratio < best or (ratio == best and basis[r] < basis[leaving]):
                        best = ratio
                        leaving = r
            if leaving < 0:
                return UNBOUNDED
            pivot(leaving, entering)

    if art_cols:
        phase1 = [Fraction(0)] * width
        for j in art_cols:
            phase1[j] = Fraction(-1)
        run_simplex(phase1, set(range(width)))
        infeas = sum(rhs[r] for r in range(m) if basis[r] in art_cols)
        if infeas != 0:
            return INFEASIBLE, None, None
        # drive leftover artificials out of the basis where possible
        for r in range(m):
            if basis[r] in art_cols:
                for j in range(width):
                    if j not in art_cols and tableau[r][j] != 0:
                        pivot(r, j)
                        break

    phase2 = [Fraction(0)] * width
    for j in range(n):
        phase2[j] = Fraction(c[j])
    allow = set(range(width)) - set(art_cols)
    status = run_simplex(phase2, allow)
    if status == UNBOUNDED:
        return UNBOUNDED, None, None
    x = [Fraction(0)] * n
    for r, b in enumerate(basis):
        if b < n:
            x[b] = rhs[r]
    value = sum(Fraction(c[j]) * x[j] for j in range(n))
    return OPTIMAL, x, value
