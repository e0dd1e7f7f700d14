"""Dense two-phase simplex for desk-scale linear programs.

Programs are stated as *maximize* ``c @ x`` subject to rows
``a @ x (<=|==|>=) b`` and bounds ``lower <= x <= upper``.  Pivoting uses
Bland's least-index rule, so the solver cannot cycle and is deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7

SENSES = ("<=", "==", ">=")


class LpError(ValueError):
    """Malformed program."""


@dataclass
class LinearProgram:
    c: np.ndarray
    a: np.ndarray
    senses: list[str]
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    names: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.shape[0]
        self.a = np.asarray(self.a, dtype=float)
        if self.a.size == 0:
            self.a = self.a.reshape(0, n)
        if self.a.ndim != 2 or self.a.shape[1] != n:
            raise LpError("constraint matrix width differs from the objective")
        self.b = np.asarray(self.b, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.a.shape[0] != len(self.senses) or self.b.shape != (self.a.shape[0],):
            raise LpError("row dimension mismatch")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise LpError("bound dimension mismatch")
        if np.any(self.lower > self.upper):
            raise LpError("lower bound above upper bound")
        if any(s not in SENSES for s in self.senses):
            raise LpError(f"unknown relation in {self.senses}")
        if not self.names:
            self.names = [f"x{i}" for i in range(n)]

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    objective: float
    x: np.ndarray

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class LpBuilder:
    """Incremental construction of a :class:`LinearProgram` with sparse rows."""

    def __init__(self) -> None:
        self._c: list[float] = []
        self._lo: list[float] = []
        self._hi: list[float] = []
        self._names: list[str] = []
        self._rows: list[tuple[dict[int, float], str, float]] = []

    def var(self, name: str, obj: float = 0.0, lower: float = 0.0, upper: float = np.inf) -> int:
        self._c.append(obj)
        self._lo.append(lower)
        self._hi.append(upper)
        self._names.append(name)
        return len(self._c) - 1

    def row(self, coeffs: Mapping[int, float], sense: str, rhs: float) -> None:
        self._rows.append((dict(coeffs), sense, float(rhs)))

    def build(self) -> LinearProgram:
        n = len(self._c)
        a = np.zeros((len(self._rows), n))
        for i, (coeffs, _, _) in enumerate(self._rows):
            for j, v in coeffs.items():
                a[i, j] += v
        return LinearProgram(np.array(self._c), a, [r[1] for r in self._rows],
                             np.array([r[2] for r in self._rows]), np.array(self._lo),
                             np.array(self._hi), list(self._names))


def _pivot(t: np.ndarray, row: int, col: int) -> None:
    t[row] /= t[row, col]
    factor = t[:, col].copy()
    factor[row] = 0.0
    t -= np.outer(factor, t[row])


def _run_simplex(t: np.ndarray, basis: list[int], ncols: int) -> bool:
    """Minimise the last row of tableau ``t`` over the first ``ncols`` columns.

    Returns False when the objective is unbounded below.
    """
    m = t.shape[0] - 1
    while True:
        reduced = t[-1, :ncols]
        candidates = np.flatnonzero(reduced < -PIVOT_TOL)
        if candidates.size == 0:
            return True
        col = int(candidates[0])
        column = t[:m, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            return False
        ratios = t[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        row = int(min(tied, key=lambda r: basis[r]))
        _pivot(t, row, col)
        basis[row] = col


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve ``lp`` to optimality, or classify it as infeasible / unbounded."""
    n = lp.n_vars
    # substitute x = offset + sign * y (y >= 0); free variables are split
    offset = np.zeros(n)
    columns: list[tuple[int, float]] = []  # (original var, sign) per y column
    extra_rows: list[tuple[int, float]] = []  # (y column, upper) for finite ranges
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            offset[j] = lo
            columns.append((j, 1.0))
            if np.isfinite(hi):
                extra_rows.append((len(columns) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            columns.append((j, -1.0))
        else:
            columns.append((j, 1.0))
            columns.append((j, -1.0))
    ny = len(columns)
    conv = np.zeros((n, ny))
    for k, (j, sign) in enumerate(columns):
        conv[j, k] = sign

    a = lp.a @ conv if lp.n_rows else np.zeros((0, ny))
    b = lp.b - lp.a @ offset if lp.n_rows else np.zeros(0)
    senses = list(lp.senses)
    if extra_rows:
        ea = np.zeros((len(extra_rows), ny))
        for i, (k, ub) in enumerate(extra_rows):
            ea[i, k] = 1.0
        a = np.vstack([a, ea])
        b = np.concatenate([b, [ub for _, ub in extra_rows]])
        senses += ["<="] * len(extra_rows)
    cy = lp.c @ conv
    const = float(lp.c @ offset)

    m = a.shape[0]
    if m == 0:
        if np.any(cy > PIVOT_TOL):
            return LpSolution("unbounded", np.inf, np.full(n, np.nan))
        return LpSolution("optimal", const, offset.copy())

    # b >= 0 row normalisation
    flip = b < 0
    a[flip] *= -1
    b = np.where(flip, -b, b)
    senses = [{"<=": ">=", ">=": "<=", "==": "=="}[s] if f else s for s, f in zip(senses, flip)]

    n_slack = sum(s != "==" for s in senses)
    n_art = sum(s != "<=" for s in senses)
    width = ny + n_slack + n_art
    t = np.zeros((m + 1, width + 1))
    t[:m, :ny] = a
    t[:m, -1] = b
    basis = [0] * m
    s_col, a_col = ny, ny + n_slack
    artificials = []
    for i, s in enumerate(senses):
        if s == "<=":
            t[i, s_col] = 1.0
            basis[i] = s_col
            s_col += 1
        else:
            if s == ">=":
                t[i, s_col] = -1.0
                s_col += 1
            t[i, a_col] = 1.0
            basis[i] = a_col
            artificials.append(a_col)
            a_col += 1

    # phase 1: minimise the sum of artificials
    if artificials:
        t[-1, :] = 0.0
        for i, col in enumerate(basis):
            if col >= ny + n_slack:
                t[-1, :] -= t[i, :]
        for col in artificials:
            t[-1, col] = 0.0
        _run_simplex(t, basis, width)
        scale = max(1.0, float(np.abs(b).max()))
        if -t[-1, -1] > FEAS_TOL * scale:
            return LpSolution("infeasible", np.nan, np.full(n, np.nan))
        # drive zero-valued artificials out of the basis; drop redundant rows
        keep = []
        for i in range(m):
            if basis[i] >= ny + n_slack:
                mags = np.abs(t[i, :ny + n_slack])
                col = int(np.argmax(mags))
                if mags[col] <= PIVOT_TOL:
                    continue
                _pivot(t, i, col)
                basis[i] = col
            keep.append(i)
        t = np.vstack([t[keep], t[-1:]])
        basis = [basis[i] for i in keep]
        t = np.delete(t, np.arange(ny + n_slack, width), axis=1)
        width = ny + n_slack
        m = len(basis)

    # phase 2: minimise -c.y
    t[-1, :] = 0.0
    t[-1, :ny] = -cy
    for i, col in enumerate(basis):
        if t[-1, col] != 0.0:
            t[-1, :] -= t[-1, col] * t[i, :]
    if not _run_simplex(t, basis, width):
        return LpSolution("unbounded", np.inf, np.full(n, np.nan))
    y = np.zeros(width)
    for i, col in enumerate(basis):
        y[col] = t[i, -1]
    x = offset + conv @ y[:ny]
    x = np.clip(x, lp.lower, lp.upper)
    return LpSolution("optimal", float(lp.c @ x), x)


def check_feasible(lp: LinearProgram, x: np.ndarray, tol: float = FEAS_TOL) -> float:
    """Largest constraint or bound violation of ``x`` (0 when feasible)."""
    worst = float(max(0.0, np.max(lp.lower - x, initial=0.0), np.max(x - lp.upper, initial=0.0)))
    if lp.n_rows:
        lhs = lp.a @ x
        for val, sense, rhs in zip(lhs, lp.senses, lp.b):
            if sense == "<=":
                worst = max(worst, val - rhs)
            elif sense == ">=":
                worst = max(worst, rhs - val)
            else:
                worst = max(worst, abs(val - rhs))
    return worst


def dump_lp(lp: LinearProgram) -> str:
    """CPLEX-style LP text, for cross-checking with external solvers."""

    def expr(coeffs: Sequence[float]) -> str:
        terms = [f"{'+' if v >= 0 else '-'} {abs(v):.12g} {lp.names[j]}"
                 for j, v in enumerate(coeffs) if v != 0]
        return " ".join(terms) if terms else "0"

    lines = ["Maximize", f" obj: {expr(lp.c)}", "Subject To"]
    for i in range(lp.n_rows):
        rel = {"<=": "<=", ">=": ">=", "==": "="}[lp.senses[i]]
        lines.append(f" c{i}: {expr(lp.a[i])} {rel} {lp.b[i]:.12g}")
    lines.append("Bounds")
    for j, name in enumerate(lp.names):
        lo = "-inf" if np.isneginf(lp.lower[j]) else f"{lp.lower[j]:.12g}"
        hi = "+inf" if np.isposinf(lp.upper[j]) else f"{lp.upper[j]:.12g}"
        lines.append(f" {lo} <= {name} <= {hi}")
    lines.append("End")
    return "\n".join(lines) + "\n"
