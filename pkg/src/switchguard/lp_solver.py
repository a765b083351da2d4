"""Deterministic dense linear-program solver (two-phase primal simplex).

Standard form with equalities, inequalities, free and bounded variables.
Pivoting uses the most-negative-cost rule while progress is made and
switches to Bland's rule on degenerate stretches, which precludes cycling;
both rules are fixed, so identical inputs produce bit-identical outputs.
Problem sizes here are small (hundreds of variables), so robustness and
determinism win over speed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LinearProgram",
    "LpSolution",
    "LpNumericalError",
    "solve",
    "format_lp",
]

PIVOT_TOL = 1e-9

LE = "<="
EQ = "="


class LpNumericalError(RuntimeError):
    """Pivot breakdown or iteration blow-up, distinct from infeasibility."""


@dataclass
class LinearProgram:
    """minimize objective . v  subject to rows (coeffs, relation, rhs) and bounds.

    bounds[j] = (lo, hi) with None for unbounded sides; defaults to free.
    """

    variable_count: int
    objective: np.ndarray
    constraints: list = field(default_factory=list)
    bounds: list = field(default_factory=list)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (self.variable_count,):
            raise ValueError("objective length must equal variable_count")
        if not self.bounds:
            self.bounds = [(None, None)] * self.variable_count
        if len(self.bounds) != self.variable_count:
            raise ValueError("bounds length must equal variable_count")
        clean = []
        for coeffs, rel, rhs in self.constraints:
            coeffs = np.asarray(coeffs, dtype=float)
            if coeffs.shape != (self.variable_count,):
                raise ValueError("constraint coefficient length mismatch")
            if rel not in (LE, EQ):
                raise ValueError(f"relation must be '{LE}' or '{EQ}'")
            rhs = float(rhs)
            if not np.isfinite(rhs):
                raise ValueError("constraint rhs must be finite")
            clean.append((coeffs, rel, rhs))
        self.constraints = clean

    def add(self, coeffs, rel, rhs) -> None:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.variable_count,):
            raise ValueError("constraint coefficient length mismatch")
        if rel not in (LE, EQ):
            raise ValueError(f"relation must be '{LE}' or '{EQ}'")
        self.constraints.append((coeffs, rel, float(rhs)))


@dataclass(frozen=True)
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    objective: float
    values: np.ndarray


def _standardize(lp: LinearProgram):
    """Rewrite as min c.u s.t. A u = b, u >= 0 plus the original-variable map.

    Returns (A, b, c, recover) where recover(u) yields the original vector.
    Free variables split into differences of nonnegatives; finite lower
    bounds shift; finite upper bounds become extra rows.
    """
    n = lp.variable_count
    col_map = []   # per original var: list of (col, sign)
    shift = np.zeros(n)
    ncols = 0
    extra_rows = []  # (orig var index, ub-lo) handled after mapping
    for j, (lo, hi) in enumerate(lp.bounds):
        if lo is None and hi is None:
            col_map.append([(ncols, 1.0), (ncols + 1, -1.0)])
            ncols += 2
        elif lo is not None and hi is None:
            col_map.append([(ncols, 1.0)])
            shift[j] = lo
            ncols += 1
        elif lo is None and hi is not None:
            col_map.append([(ncols, -1.0)])
            shift[j] = hi
            ncols += 1
        else:
            if hi < lo:
                # empty box: encode as an infeasible row 0 <= -1
                col_map.append([(ncols, 1.0)])
                shift[j] = lo
                ncols += 1
                extra_rows.append((j, -1.0))
                continue
            col_map.append([(ncols, 1.0)])
            shift[j] = lo
            ncols += 1
            extra_rows.append((j, hi - lo))

    rows = []
    for coeffs, rel, rhs in lp.constraints:
        rows.append((coeffs, rel, rhs - float(coeffs @ shift)))
    for j, span in extra_rows:
        coeffs = np.zeros(n)
        coeffs[j] = 1.0
        # u_j <= span in shifted coordinates (already shifted by lo)
        rows.append((coeffs, LE, span))

    m = len(rows)
    nslack = sum(1 for _, rel, _ in rows if rel == LE)
    A = np.zeros((m, ncols + nslack))
    b = np.zeros(m)
    slack_col = ncols
    for i, (coeffs, rel, rhs) in enumerate(rows):
        for j in range(n):
            a = coeffs[j]
            if a != 0.0:
                for col, sgn in col_map[j]:
                    A[i, col] += a * sgn
        b[i] = rhs
        if rel == LE:
            A[i, slack_col] = 1.0
            slack_col += 1

    c = np.zeros(ncols + nslack)
    for j in range(n):
        a = lp.objective[j]
        if a != 0.0:
            for col, sgn in col_map[j]:
                c[col] += a * sgn

    def recover(u: np.ndarray) -> np.ndarray:
        x = shift.copy()
        for j in range(n):
            for col, sgn in col_map[j]:
                x[j] += sgn * u[col]
        return x

    return A, b, c, recover


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    piv = T[row, col]
    if abs(piv) < PIVOT_TOL:
        raise LpNumericalError(f"pivot breakdown: |{piv:.3e}| below tolerance")
    T[row] /= piv
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])
    basis[row] = col


def _ratio_row(T: np.ndarray, basis: np.ndarray, enter: int) -> int:
    """Min-ratio row; ties broken by smallest basic variable index (Bland)."""
    m = T.shape[0] - 1
    col = T[:m, enter]
    eligible = col > PIVOT_TOL
    if not np.any(eligible):
        return -1
    ratios = np.full(m, np.inf)
    ratios[eligible] = T[:m, -1][eligible] / col[eligible]
    best = float(np.min(ratios))
    ties = np.flatnonzero(ratios <= best + PIVOT_TOL)
    return int(ties[np.argmin(basis[ties])])


STALL_LIMIT = 64


def _simplex(T: np.ndarray, basis: np.ndarray, ncols: int, max_iter: int) -> str:
    """Simplex iterations on tableau T (objective in the last row).

    Returns 'optimal' or 'unbounded'.  Entering column: most negative
    reduced cost (Dantzig) while the objective makes progress; after
    STALL_LIMIT degenerate iterations Bland's rule (lowest eligible index,
    lowest-index leaving tie-break) takes over until the objective next
    improves, which precludes cycling: Bland cannot cycle, so every
    degenerate stretch ends in finitely many steps, and strict
    improvements cannot revisit a basis.  Both rules are deterministic.
    """
    bland = False
    stall = 0
    last_obj = T[-1, -1]
    for it in range(max_iter):
        reduced = T[-1, :ncols]
        if bland:
            candidates = np.flatnonzero(reduced < -PIVOT_TOL)
            if candidates.size == 0:
                return "optimal"
            enter = int(candidates[0])
        else:
            enter = int(np.argmin(reduced))
            if reduced[enter] >= -PIVOT_TOL:
                return "optimal"
        leave = _ratio_row(T, basis, enter)
        if leave < 0:
            return "unbounded"
        _pivot(T, basis, leave, enter)
        obj = T[-1, -1]
        if obj > last_obj + PIVOT_TOL:
            stall = 0
            bland = False
            last_obj = obj
        elif not bland:
            stall += 1
            if stall >= STALL_LIMIT:
                bland = True
        if it % 512 == 511 and not np.all(np.isfinite(T)):
            raise LpNumericalError("tableau lost finiteness during pivoting")
    raise LpNumericalError("iteration limit exceeded")


def solve(lp: LinearProgram) -> LpSolution:
    """Two-phase primal simplex; returns a vertex solution when optimal."""
    A, b, c, recover = _standardize(lp)
    m, ncols = A.shape
    if m == 0:
        # unconstrained: optimal iff no improving direction exists
        if np.any(c < -PIVOT_TOL):
            return LpSolution("unbounded", -np.inf, np.full(lp.variable_count, np.nan))
        u = np.zeros(ncols)
        x = recover(u)
        return LpSolution("optimal", float(lp.objective @ x), x)

    neg = b < 0
    A = A.copy()
    A[neg] *= -1.0
    b = b.copy()
    b[neg] *= -1.0

    # identity columns usable as an initial basis (unit column with b-compatible sign)
    basis = np.full(m, -1, dtype=int)
    used = set()
    for i in range(m):
        for j in range(ncols):
            col = A[:, j]
            if j not in used and col[i] == 1.0 and np.count_nonzero(col) == 1:
                basis[i] = j
                used.add(j)
                break

    art_cols = []
    n_art = int(np.sum(basis < 0))
    T = np.zeros((m + 1, ncols + n_art + 1))
    T[:m, :ncols] = A
    T[:m, -1] = b
    k = ncols
    for i in range(m):
        if basis[i] < 0:
            T[i, k] = 1.0
            basis[i] = k
            art_cols.append(k)
            k += 1

    total_cols = ncols + n_art
    max_iter = 2000 + 200 * (m + total_cols)

    if art_cols:
        # phase 1: minimize the artificial sum
        T[-1, :] = 0.0
        for j in art_cols:
            T[-1, j] = 1.0
        for i in range(m):
            if basis[i] in art_cols:
                T[-1] -= T[i]
        status = _simplex(T, basis, total_cols, max_iter)
        if status != "optimal":
            raise LpNumericalError("phase-1 reported unbounded: inconsistent tableau")
        if T[-1, -1] < -1e-7:
            return LpSolution("infeasible", np.nan, np.full(lp.variable_count, np.nan))
        # drive remaining artificials out of the basis
        art_set = set(art_cols)
        for i in range(m):
            if basis[i] in art_set:
                piv_col = -1
                for j in range(ncols):
                    if j not in art_set and abs(T[i, j]) > PIVOT_TOL:
                        piv_col = j
                        break
                if piv_col >= 0:
                    _pivot(T, basis, i, piv_col)
        keep_rows = [i for i in range(m) if basis[i] not in art_set]
        if len(keep_rows) < m:
            # redundant rows: zero in every structural column
            T = np.vstack([T[keep_rows], T[-1:]])
            basis = basis[keep_rows]
            m = len(keep_rows)

    # phase 2
    T2 = np.zeros((m + 1, ncols + 1))
    T2[:m, :ncols] = T[:m, :ncols]
    T2[:m, -1] = T[:m, -1]
    T2[-1, :ncols] = c
    for i in range(m):
        cb = c[basis[i]]
        if cb != 0.0:
            T2[-1] -= cb * T2[i]
    status = _simplex(T2, basis, ncols, max_iter)
    if status == "unbounded":
        return LpSolution("unbounded", -np.inf, np.full(lp.variable_count, np.nan))

    u = np.zeros(ncols)
    for i in range(m):
        u[basis[i]] = T2[i, -1]
    x = recover(u)
    return LpSolution("optimal", float(lp.objective @ x), x)


def format_lp(lp: LinearProgram, name: str = "problem") -> str:
    """Render in the conventional text LP interchange format (CPLEX-style)."""
    def term(a: float, j: int, first: bool) -> str:
        sign = "-" if a < 0 else ("" if first else "+")
        mag = abs(a)
        return f"{sign} {mag:.12g} v{j} "

    lines = [f"\\ {name}", "Minimize", " obj:"]
    body = ""
    first = True
    for j, a in enumerate(lp.objective):
        if a != 0.0:
            body += term(a, j, first)
            first = False
    lines[-1] += " " + (body.strip() or "0 v0")
    lines.append("Subject To")
    for i, (coeffs, rel, rhs) in enumerate(lp.constraints):
        body = ""
        first = True
        for j, a in enumerate(coeffs):
            if a != 0.0:
                body += term(a, j, first)
                first = False
        op = "<=" if rel == LE else "="
        lines.append(f" c{i}: {body.strip() or '0 v0'} {op} {rhs:.12g}")
    lines.append("Bounds")
    for j, (lo, hi) in enumerate(lp.bounds):
        lo_s = "-inf" if lo is None else f"{lo:.12g}"
        hi_s = "+inf" if hi is None else f"{hi:.12g}"
        lines.append(f" {lo_s} <= v{j} <= {hi_s}")
    lines.append("End")
    return "\n".join(lines) + "\n"
