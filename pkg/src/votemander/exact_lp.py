"""Dense two-phase simplex over exact rationals.

Small and slow on purpose: it is the reference the floating-point solvers
are checked against. Bland's rule guarantees termination.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


@dataclass
class ExactLPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: list[Fraction] | None
    value: Fraction | None


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


def _pivot(T: list[list[Fraction]], basis: list[int], r: int, c: int) -> None:
    row = T[r]
    p = row[c]
    if p != 1:
        T[r] = row = [v / p for v in row]
    for i, other in enumerate(T):
        if i != r:
            f = other[c]
            if f != 0:
                T[i] = [a - f * b for a, b in zip(other, row)]
    basis[r] = c


def _run(T, basis, n_rows: int, allowed: int) -> bool:
    """Maximize the objective stored in row ``n_rows``; False if unbounded.

    Objective row holds reduced costs as ``-c_j``; columns >= ``allowed``
    never enter.
    """
    obj = T[n_rows]
    while True:
        obj = T[n_rows]
        enter = next((j for j in range(allowed) if obj[j] < 0), None)
        if enter is None:
            return True
        best, leave = None, None
        for i in range(n_rows):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            return False
        _pivot(T, basis, leave, enter)


def linprog_exact(c: Sequence, A_ub: Sequence[Sequence] = (), b_ub: Sequence = (),
                  A_eq: Sequence[Sequence] = (), b_eq: Sequence = (),
                  upper: Sequence | None = None) -> ExactLPResult:
    """Maximize c·x subject to A_ub x <= b_ub, A_eq x = b_eq, 0 <= x <= upper.

    ``upper`` entries may be None for unbounded variables. All inputs are
    converted to ``Fraction`` (floats exactly).
    """
    n = len(c)
    rows: list[tuple[list[Fraction], Fraction, str]] = []
    for a, b in zip(A_ub, b_ub):
        rows.append(([_frac(v) for v in a], _frac(b), "<="))
    for a, b in zip(A_eq, b_eq):
        rows.append(([_frac(v) for v in a], _frac(b), "=="))
    if upper is not None:
        for j, u in enumerate(upper):
            if u is not None:
                e = [Fraction(0)] * n
                e[j] = Fraction(1)
                rows.append((e, _frac(u), "<="))
    m = len(rows)
    n_slack = sum(1 for _, _, s in rows if s == "<=")
    width = n + n_slack + m  # structural, slack, artificial
    T: list[list[Fraction]] = []
    basis: list[int] = []
    k = 0
    for i, (a, b, sense) in enumerate(rows):
        row = a + [Fraction(0)] * (n_slack + m) + [b]
        if sense == "<=":
            row[n + k] = Fraction(1)
            k += 1
        if b < 0:
            row = [-v for v in row]
        row[n + n_slack + i] = Fraction(1)
        T.append(row)
        basis.append(n + n_slack + i)

    # phase I: maximize -sum(artificials)
    obj = [Fraction(0)] * (width + 1)
    for j in range(n + n_slack + m, width):
        obj[j] = Fraction(1)
    for i in range(m):
        obj = [o - t for o, t in zip(obj, T[i])]
    T.append(obj)
    _run(T, basis, m, n + n_slack)
    if T[m][-1] != 0:
        return ExactLPResult("infeasible", None, None)
    # drive zero-level artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= n + n_slack:
            col = next((j for j in range(n + n_slack) if T[i][j] != 0), None)
            if col is not None:
                _pivot(T, basis, i, col)

    # phase II
    obj = [Fraction(0)] * (width + 1)
    cf = [_frac(v) for v in c]
    for j in range(n):
        obj[j] = -cf[j]
    for i in range(m):
        bj = basis[i]
        if bj < n and cf[bj] != 0:
            obj = [o + cf[bj] * t for o, t in zip(obj, T[i])]
    T[m] = obj
    if not _run(T, basis, m, n + n_slack):
        return ExactLPResult("unbounded", None, None)
    x = [Fraction(0)] * n
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i][-1]
    return ExactLPResult("optimal", x, sum((a * b for a, b in zip(cf, x)), Fraction(0)))


def feasible_exact(A_ub, b_ub, A_eq=(), b_eq=(), upper=None, n: int | None = None):
    """Exact feasibility test; returns a feasible point or None."""
    if n is None:
        n = len(A_ub[0]) if len(A_ub) else len(A_eq[0])
    res = linprog_exact([0] * n, A_ub, b_ub, A_eq, b_eq, upper)
    return res.x if res.status == "optimal" else None
