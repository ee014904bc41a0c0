"""Sparse linear programs with bounded variables, and their solutions.

The problem form is

    minimize    objective . x
    subject to  row relations (<=, =, >=) on sparse constraint rows,
                lower <= x <= upper   (infinities allowed)

``solve_lp`` runs the embedded bounded-variable revised simplex
(:mod:`besslife.simplex`).  The function signature is the seam for plugging
in an external solver; everything in this package relies only on the
embedded one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

# relation codes
LE, EQ, GE = -1, 0, 1
_REL_CODES = {"<=": LE, "<": LE, "=": EQ, "==": EQ, ">=": GE, ">": GE}
_REL_TEXT = {LE: "<=", EQ: "=", GE: ">="}

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


class LpNumericalError(RuntimeError):
    """The simplex could not make reliable progress (ill-conditioned basis)."""


@dataclass
class SolverOptions:
    feas_tol: float = 1e-7        # relative primal feasibility tolerance
    opt_tol: float = 1e-9         # reduced-cost tolerance, relative per column
    pivot_tol: float = 1e-9       # smallest acceptable pivot magnitude
    max_iters: int | None = None  # None: scale with problem size
    refactor_every: int = 100     # basis refactorization cadence
    bland_after: int = 50         # degenerate pivots before Bland's rule kicks in


class SparseLp:
    """A minimization LP over bounded variables with sparse constraint rows."""

    def __init__(self, n_vars: int, lower=None, upper=None, objective=None):
        self.n_vars = int(n_vars)
        self.lower = np.full(self.n_vars, -np.inf) if lower is None else np.asarray(lower, dtype=float).copy()
        self.upper = np.full(self.n_vars, np.inf) if upper is None else np.asarray(upper, dtype=float).copy()
        self.objective = np.zeros(self.n_vars) if objective is None else np.asarray(objective, dtype=float).copy()
        self._row_col = []   # list of int arrays
        self._row_val = []   # list of float arrays
        self._rel = []       # relation codes
        self._rhs = []

    @property
    def n_rows(self) -> int:
        return len(self._rhs)

    def add_row(self, entries, rel: str, rhs: float) -> int:
        """Append one constraint row.

        ``entries`` is an iterable of (column, coefficient) pairs; ``rel`` is
        one of <=, =, >=.  Returns the new row index.
        """
        if rel not in _REL_CODES:
            raise ValueError(f"unknown relation {rel!r}")
        cols = np.array([c for c, _ in entries], dtype=np.int64)
        vals = np.array([v for _, v in entries], dtype=float)
        self._row_col.append(cols)
        self._row_val.append(vals)
        self._rel.append(_REL_CODES[rel])
        self._rhs.append(float(rhs))
        return len(self._rhs) - 1

    def add_rows_coo(self, row, col, val, rels, rhs) -> None:
        """Bulk-append rows from COO triplets (row indices local, 0-based)."""
        row = np.asarray(row, dtype=np.int64)
        col = np.asarray(col, dtype=np.int64)
        val = np.asarray(val, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        order = np.argsort(row, kind="stable")
        row, col, val = row[order], col[order], val[order]
        starts = np.searchsorted(row, np.arange(len(rhs)))
        ends = np.searchsorted(row, np.arange(len(rhs)) + 1)
        for i in range(len(rhs)):
            self._row_col.append(col[starts[i]:ends[i]])
            self._row_val.append(val[starts[i]:ends[i]])
            code = rels[i] if isinstance(rels[i], (int, np.integer)) else _REL_CODES[rels[i]]
            self._rel.append(int(code))
            self._rhs.append(float(rhs[i]))

    def relations(self) -> np.ndarray:
        return np.array(self._rel, dtype=np.int8)

    def rhs(self) -> np.ndarray:
        return np.array(self._rhs, dtype=float)

    def matrix(self) -> sp.csr_matrix:
        """Constraint matrix as CSR (n_rows x n_vars)."""
        m = self.n_rows
        if m == 0:
            return sp.csr_matrix((0, self.n_vars))
        indptr = np.zeros(m + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(c) for c in self._row_col])
        indices = np.concatenate(self._row_col) if m else np.empty(0, dtype=np.int64)
        data = np.concatenate(self._row_val) if m else np.empty(0)
        return sp.csr_matrix((data, indices, indptr), shape=(m, self.n_vars))

    def validate(self) -> None:
        """Raise ValueError on any malformed piece of the problem."""
        if self.lower.shape != (self.n_vars,) or self.upper.shape != (self.n_vars,):
            raise ValueError("bound arrays must have length n_vars")
        if self.objective.shape != (self.n_vars,):
            raise ValueError("objective must have length n_vars")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("bounds must not be NaN")
        if not np.all(self.lower <= self.upper):
            bad = int(np.argmax(~(self.lower <= self.upper)))
            raise ValueError(f"lower > upper at column {bad}")
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective coefficients must be finite")
        for i, (cols, vals) in enumerate(zip(self._row_col, self._row_val)):
            if len(cols) and (cols.min() < 0 or cols.max() >= self.n_vars):
                raise ValueError(f"row {i} references a column out of range")
            if not np.all(np.isfinite(vals)):
                raise ValueError(f"row {i} has a non-finite coefficient")
            if not np.isfinite(self._rhs[i]):
                raise ValueError(f"row {i} has a non-finite right-hand side")


@dataclass
class LpSolution:
    status: str
    x: np.ndarray
    objective_value: float
    iterations: int = 0
    basis: np.ndarray | None = None   # basic column indices (structural + slack)
    # final placement code per column (structural + slack), using the simplex
    # module's BASIC/AT_LOWER/AT_UPPER/FREE codes; None for row-free problems
    statuses: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class Violation:
    kind: str       # "lower", "upper" or "row"
    index: int
    residual: float

    def __str__(self):
        return f"{self.kind}[{self.index}] violated by {self.residual:.3e}"


@dataclass
class FeasibilityReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        if self.ok:
            return "feasible"
        return "\n".join(str(v) for v in self.violations)


def check_solution(lp: SparseLp, x, tol: float = 1e-7) -> FeasibilityReport:
    """List every bound and row violated by ``x`` beyond ``tol`` (relative)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (lp.n_vars,):
        raise ValueError(f"x has shape {x.shape}, expected ({lp.n_vars},)")
    report = FeasibilityReport()
    lo_tol = tol * np.maximum(1.0, np.abs(np.where(np.isfinite(lp.lower), lp.lower, 0.0)))
    up_tol = tol * np.maximum(1.0, np.abs(np.where(np.isfinite(lp.upper), lp.upper, 0.0)))
    for j in np.nonzero(x < lp.lower - lo_tol)[0]:
        report.violations.append(Violation("lower", int(j), float(lp.lower[j] - x[j])))
    for j in np.nonzero(x > lp.upper + up_tol)[0]:
        report.violations.append(Violation("upper", int(j), float(x[j] - lp.upper[j])))
    if lp.n_rows:
        ax = lp.matrix() @ x
        rhs = lp.rhs()
        rel = lp.relations()
        row_tol = tol * np.maximum(1.0, np.abs(rhs))
        resid = np.zeros_like(ax)
        le = rel == LE
        ge = rel == GE
        eq = rel == EQ
        resid[le] = ax[le] - rhs[le]
        resid[ge] = rhs[ge] - ax[ge]
        resid[eq] = np.abs(ax[eq] - rhs[eq])
        for i in np.nonzero(resid > row_tol)[0]:
            report.violations.append(Violation("row", int(i), float(resid[i])))
    return report


def solve_lp(lp: SparseLp, opts: SolverOptions | None = None,
             warm_basis=None, warm_statuses=None) -> LpSolution:
    """Solve the LP with the embedded simplex.

    Reports infeasible/unbounded/iteration-limit through the solution status
    rather than raising.  Deterministic: identical inputs produce identical
    iterate paths.  ``warm_basis`` is a candidate starting basis (column
    indices as returned in ``LpSolution.basis``); a singular candidate is
    repaired by dropping dependent columns for slacks, a malformed one is
    silently discarded.  ``warm_statuses`` (as returned in
    ``LpSolution.statuses``) additionally re-seats nonbasic variables on the
    bounds they previously rested at; it is silently ignored on a shape
    mismatch and is useful with or without the matching basis.
    """
    from . import simplex
    lp.validate()
    if opts is None:
        opts = SolverOptions()
    return simplex.solve(lp, opts, warm_basis, warm_statuses)


def write_lp_format(lp: SparseLp, fh, name: str = "problem") -> None:
    """Dump the problem in CPLEX LP text format for external cross-checking."""
    w = fh.write
    w(f"\\ {name}\n")
    w("Minimize\n obj:")
    for j in range(lp.n_vars):
        cj = lp.objective[j]
        if cj != 0.0:
            w(f" {'+' if cj >= 0 else '-'} {abs(cj):.17g} x{j}")
    w("\nSubject To\n")
    for i in range(lp.n_rows):
        w(f" c{i}:")
        for c, v in zip(lp._row_col[i], lp._row_val[i]):
            w(f" {'+' if v >= 0 else '-'} {abs(v):.17g} x{c}")
        w(f" {_REL_TEXT[lp._rel[i]]} {lp._rhs[i]:.17g}\n")
    w("Bounds\n")
    for j in range(lp.n_vars):
        lo, up = lp.lower[j], lp.upper[j]
        if lo == -np.inf and up == np.inf:
            w(f" x{j} free\n")
        elif lo == -np.inf:
            w(f" -inf <= x{j} <= {up:.17g}\n")
        elif up == np.inf:
            w(f" x{j} >= {lo:.17g}\n")
        else:
            w(f" {lo:.17g} <= x{j} <= {up:.17g}\n")
    w("End\n")
