"""Bounded-variable revised simplex with an artificial-free composite phase 1.

Implementation notes, in rough order of importance:

* Computational form.  Every row gets a slack column (coefficient 1):
  ``<=`` rows get slack bounds [0, inf), ``>=`` rows (-inf, 0], ``=`` rows
  [0, 0].  The cold-start basis is the full slack set, so the first basis
  inverse is the identity.

* Phase 1 runs without artificial variables.  Whenever any basic variable
  sits outside its bounds, pricing uses the composite cost vector (-1 on
  basics below their lower bound, +1 on basics above their upper bound) and
  the ratio test lets an infeasible basic block exactly where it regains
  feasibility.  The same machinery accepts warm bases whose implied point is
  infeasible, which is the normal case when a rolling horizon shifts by a
  day.  Feasibility is re-classified every iteration, so late numerical
  drift simply drops the solve back into phase 1.

* The basis inverse is kept dense and updated with rank-1 product-form
  updates, refactorized from scratch every ``refactor_every`` pivots.  Dense
  m x m storage targets horizons up to a few thousand rows.

* Entering choice is Dantzig pricing (largest reduced-cost violation) until
  ``bland_after`` consecutive degenerate pivots, then Bland's least-index
  rule permanently; step-length ties break toward the largest pivot
  magnitude (Dantzig mode) or the smallest leaving variable index (Bland
  mode).  All ties resolve by lowest index, so solves are deterministic.

* Scaling.  Rows and columns are equilibrated with powers of two (exact in
  binary floating point) before solving; bounds, costs and tolerances are
  translated so that a point is feasible in scaled units exactly when it is
  feasible in original units.  The objective coefficients of this package's
  dispatch LPs span ten orders of magnitude, so dual feasibility uses a
  per-column tolerance ``opt_tol * max(1, |c_j|)``.

* Termination is certified: optimal/infeasible/unbounded is only reported
  from a freshly refactorized basis.  If the refactorization moves the
  iterate, the main loop just continues.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .lp import (EQ, GE, INFEASIBLE, ITERATION_LIMIT, LE, OPTIMAL, UNBOUNDED,
                 LpNumericalError, LpSolution, SolverOptions, SparseLp)

BASIC, AT_LOWER, AT_UPPER, FREE = 0, 1, 2, 3

DEGEN_TOL = 1e-10      # step lengths at or below this count as degenerate
CERTIFY_LIMIT = 10     # refactorizations allowed while confirming termination


def _pow2_scale(maxabs: np.ndarray) -> np.ndarray:
    """Powers of two that bring each max-magnitude into [sqrt(2)/2, sqrt(2))."""
    scale = np.ones_like(maxabs)
    nz = maxabs > 0
    scale[nz] = np.exp2(-np.round(np.log2(maxabs[nz])))
    return scale


def _abs_axis_max(a: sp.csc_matrix, axis: int) -> np.ndarray:
    absa = a.copy()
    absa.data = np.abs(absa.data)
    return np.asarray(absa.max(axis=axis).todense()).ravel()


def _solve_unconstrained(lp: SparseLp) -> LpSolution:
    # no rows: each variable independently runs to its cheaper bound
    x = np.zeros(lp.n_vars)
    for j in range(lp.n_vars):
        lo, up, cj = lp.lower[j], lp.upper[j], lp.objective[j]
        if cj > 0:
            if lo == -np.inf:
                return LpSolution(UNBOUNDED, x, -np.inf, 0, np.empty(0, dtype=np.int64))
            x[j] = lo
        elif cj < 0:
            if up == np.inf:
                return LpSolution(UNBOUNDED, x, -np.inf, 0, np.empty(0, dtype=np.int64))
            x[j] = up
        else:
            if lo != -np.inf and (up == np.inf or abs(lo) <= abs(up)):
                x[j] = lo
            elif up != np.inf:
                x[j] = up
    return LpSolution(OPTIMAL, x, float(lp.objective @ x), 0, np.empty(0, dtype=np.int64))


class _Core:
    """Scaled extended problem plus all mutable simplex state."""

    def __init__(self, lp: SparseLp, opts: SolverOptions, warm_basis,
                 warm_statuses=None):
        m, n = lp.n_rows, lp.n_vars
        self.m, self.n = m, n
        self.n_tot = n + m
        self.opts = opts

        a = lp.matrix().tocsc()
        b = lp.rhs()
        rel = lp.relations()

        self.row_scale = _pow2_scale(_abs_axis_max(a, axis=1))
        a = a.copy()
        a.data = a.data * self.row_scale[a.indices]
        self.col_scale = _pow2_scale(_abs_axis_max(a, axis=0))
        col_of = np.repeat(np.arange(n), np.diff(a.indptr))
        a.data = a.data * self.col_scale[col_of]

        self.a_ext = sp.hstack([a, sp.identity(m, format="csc")], format="csc")
        self.at_ext = self.a_ext.T.tocsr()
        self.b = self.row_scale * b

        slack_lo = np.where(rel == GE, -np.inf, 0.0)
        slack_up = np.where(rel == LE, np.inf, 0.0)
        self.lower = np.concatenate([lp.lower / self.col_scale, slack_lo])
        self.upper = np.concatenate([lp.upper / self.col_scale, slack_up])
        self.cost = np.concatenate([lp.objective * self.col_scale, np.zeros(m)])
        self.fixed = self.lower == self.upper

        # feasibility tolerances, translated from original units per variable
        def bound_tol(orig):
            return opts.feas_tol * np.maximum(1.0, np.abs(np.where(np.isfinite(orig), orig, 0.0)))

        row_tol = opts.feas_tol * np.maximum(1.0, np.abs(b)) * self.row_scale
        self.tol_lo = np.concatenate([bound_tol(lp.lower) / self.col_scale, row_tol])
        self.tol_up = np.concatenate([bound_tol(lp.upper) / self.col_scale, row_tol])
        self.dual_tol = opts.opt_tol * np.maximum(1.0, np.abs(self.cost))

        # nonbasic placement: finite bound nearest zero, free variables at zero
        self.status = np.full(self.n_tot, FREE, dtype=np.int8)
        self.x = np.zeros(self.n_tot)
        lo, up = self.lower, self.upper
        at_lo = (lo != -np.inf) & ((up == np.inf) | (np.abs(lo) <= np.abs(up)))
        at_up = ~at_lo & (up != np.inf)
        self.status[at_lo] = AT_LOWER
        self.x[at_lo] = lo[at_lo]
        self.status[at_up] = AT_UPPER
        self.x[at_up] = up[at_up]

        self.basic, self.binv = self._initial_basis(warm_basis)
        self.status[self.basic] = BASIC
        if warm_statuses is not None:
            self._apply_warm_statuses(np.asarray(warm_statuses))
        self.xb = np.zeros(m)
        self._recompute_xb()

        self.iterations = 0
        self.pivots_since_refactor = 0
        self.degen_streak = 0
        self.bland = False

    def _apply_warm_statuses(self, ws):
        """Re-seat nonbasic variables on the bounds a previous solve left them at.

        Without this a warm basis alone restarts with every nonbasic at its
        bound nearest zero, which perturbs the previous optimum even when the
        basis itself is reused.  Entries other than AT_LOWER/AT_UPPER, bounds
        that do not exist, and basic columns keep the default placement.
        """
        if ws.shape != (self.n_tot,):
            return
        nonbasic = self.status != BASIC
        to_lo = nonbasic & (ws == AT_LOWER) & (self.lower != -np.inf)
        to_up = nonbasic & (ws == AT_UPPER) & (self.upper != np.inf)
        self.status[to_lo] = AT_LOWER
        self.x[to_lo] = self.lower[to_lo]
        self.status[to_up] = AT_UPPER
        self.x[to_up] = self.upper[to_up]

    def _initial_basis(self, warm):
        m, n = self.m, self.n
        if warm is not None:
            warm = np.asarray(warm, dtype=np.int64).ravel()
            usable = (warm.shape == (m,) and m > 0
                      and warm.min() >= 0 and warm.max() < self.n_tot
                      and np.unique(warm).size == m)
            if usable:
                try:
                    binv = np.linalg.inv(self.a_ext[:, warm].toarray())
                except np.linalg.LinAlgError:
                    binv = None
                if binv is not None and np.isfinite(binv).all() and np.abs(binv).max() < 1e14:
                    return warm.copy(), binv
                return self._repair_basis(warm)
        return np.arange(n, n + m, dtype=np.int64), np.eye(m)

    def _repair_basis(self, warm):
        """Salvage a singular warm basis by keeping a maximal independent subset.

        Starting from the all-slack identity, pivot each warm column onto the
        still-slack row where it has the largest weight; columns that are
        (near-)dependent on those already placed stay nonbasic.  A basis that
        went singular under a rolling-horizon shift typically loses only a
        few columns this way instead of being thrown out whole.
        """
        m, n = self.m, self.n
        basic = np.arange(n, n + m, dtype=np.int64)
        binv = np.eye(m)
        replaceable = np.ones(m, dtype=bool)
        for j in warm:
            if j >= n:
                replaceable[j - n] = False  # row keeps its own slack
                continue
            sl = slice(self.a_ext.indptr[j], self.a_ext.indptr[j + 1])
            w = binv[:, self.a_ext.indices[sl]] @ self.a_ext.data[sl]
            cand = np.where(replaceable, np.abs(w), -1.0)
            r = int(np.argmax(cand))
            if cand[r] < 1e-7:
                continue
            pivrow = binv[r] / w[r]
            binv -= np.outer(w, pivrow)
            binv[r] = pivrow
            basic[r] = j
            replaceable[r] = False
        if not np.isfinite(binv).all() or np.abs(binv).max() >= 1e14:
            return np.arange(n, n + m, dtype=np.int64), np.eye(m)
        return basic, binv

    def _refactor(self):
        try:
            binv = np.linalg.inv(self.a_ext[:, self.basic].toarray())
        except np.linalg.LinAlgError as exc:
            raise LpNumericalError("basis matrix became singular") from exc
        if not np.isfinite(binv).all():
            raise LpNumericalError("basis inverse overflowed")
        self.binv = binv
        self.pivots_since_refactor = 0
        self._recompute_xb()

    def _recompute_xb(self):
        x_nb = self.x.copy()
        x_nb[self.basic] = 0.0
        resid = self.b - self.a_ext @ x_nb
        self.xb = self.binv @ resid
        if not np.isfinite(self.xb).all():
            raise LpNumericalError("basic solution overflowed")
        self.x[self.basic] = self.xb

    def column(self, j: int) -> np.ndarray:
        sl = slice(self.a_ext.indptr[j], self.a_ext.indptr[j + 1])
        return self.binv[:, self.a_ext.indices[sl]] @ self.a_ext.data[sl]

    def run(self, max_iters: int) -> str:
        certify = 0
        while True:
            if self.iterations >= max_iters:
                return ITERATION_LIMIT

            lb = self.lower[self.basic]
            ub = self.upper[self.basic]
            below = self.xb < lb - self.tol_lo[self.basic]
            above = self.xb > ub + self.tol_up[self.basic]
            infeasible_now = bool(below.any() or above.any())

            if infeasible_now:
                c_work = np.zeros(self.n_tot)
                c_work[self.basic[below]] = -1.0
                c_work[self.basic[above]] = 1.0
                dual_tol = self.opts.opt_tol
            else:
                c_work = self.cost
                dual_tol = self.dual_tol

            y = self.binv.T @ c_work[self.basic]
            d = c_work - self.at_ext @ y

            elig = (((self.status == AT_LOWER) & (d < -dual_tol) & ~self.fixed)
                    | ((self.status == AT_UPPER) & (d > dual_tol) & ~self.fixed)
                    | ((self.status == FREE) & (np.abs(d) > dual_tol)))

            if not elig.any():
                if self.pivots_since_refactor == 0:
                    return INFEASIBLE if infeasible_now else OPTIMAL
                certify += 1
                if certify > CERTIFY_LIMIT:
                    raise LpNumericalError("termination would not certify")
                self._refactor()
                continue

            if self.bland:
                q = int(np.argmax(elig))
            else:
                q = int(np.argmax(np.where(elig, np.abs(d), -np.inf)))
            sigma = 1.0 if (self.status[q] == AT_LOWER
                            or (self.status[q] == FREE and d[q] < 0)) else -1.0

            w = self.column(q)
            rate = -sigma * w

            t_cand = np.full(self.m, np.inf)
            land_up = np.zeros(self.m, dtype=bool)
            pos = rate > self.opts.pivot_tol
            neg = rate < -self.opts.pivot_tol
            feas = ~(below | above)
            mk = feas & pos & np.isfinite(ub)
            t_cand[mk] = (ub[mk] - self.xb[mk]) / rate[mk]
            land_up[mk] = True
            mk = feas & neg & np.isfinite(lb)
            t_cand[mk] = (lb[mk] - self.xb[mk]) / rate[mk]
            mk = below & pos
            t_cand[mk] = (lb[mk] - self.xb[mk]) / rate[mk]
            mk = above & neg
            t_cand[mk] = (ub[mk] - self.xb[mk]) / rate[mk]
            land_up[mk] = True
            np.maximum(t_cand, 0.0, out=t_cand)

            t_basic = t_cand.min() if self.m else np.inf
            t_flip = self.upper[q] - self.lower[q]

            if t_flip <= t_basic:
                if not np.isfinite(t_flip):
                    if infeasible_now:
                        raise LpNumericalError("unblocked ray during phase 1")
                    if self.pivots_since_refactor == 0:
                        return UNBOUNDED
                    certify += 1
                    if certify > CERTIFY_LIMIT:
                        raise LpNumericalError("termination would not certify")
                    self._refactor()
                    continue
                # bound flip: entering variable crosses to its other bound
                self.x[q] = self.upper[q] if sigma > 0 else self.lower[q]
                self.status[q] = AT_UPPER if sigma > 0 else AT_LOWER
                self.xb += rate * t_flip
                self.x[self.basic] = self.xb
                self.iterations += 1
                self.degen_streak = 0
                certify = 0
                continue

            tie = t_cand <= t_basic * (1 + 1e-9) + 1e-12
            if self.bland:
                cand = np.nonzero(tie)[0]
                r = int(cand[np.argmin(self.basic[cand])])
            else:
                r = int(np.argmax(np.where(tie, np.abs(rate), -np.inf)))
            t_star = float(t_cand[r])

            self.xb += rate * t_star
            leaving = self.basic[r]
            self.x[leaving] = ub[r] if land_up[r] else lb[r]
            self.status[leaving] = AT_UPPER if land_up[r] else AT_LOWER
            self.x[q] += sigma * t_star
            self.basic[r] = q
            self.status[q] = BASIC
            self.xb[r] = self.x[q]

            wr = w[r]
            if wr == 0.0:
                raise LpNumericalError("zero pivot element")
            pivrow = self.binv[r] / wr
            self.binv -= np.outer(w, pivrow)
            self.binv[r] = pivrow
            self.x[self.basic] = self.xb

            self.iterations += 1
            self.pivots_since_refactor += 1
            certify = 0
            if t_star <= DEGEN_TOL:
                self.degen_streak += 1
                if self.degen_streak >= self.opts.bland_after:
                    self.bland = True
            else:
                self.degen_streak = 0
            if self.pivots_since_refactor >= self.opts.refactor_every:
                self._refactor()


def solve(lp: SparseLp, opts: SolverOptions, warm_basis=None,
          warm_statuses=None) -> LpSolution:
    """Solve a validated SparseLp.  See :func:`besslife.lp.solve_lp`."""
    if lp.n_rows == 0:
        return _solve_unconstrained(lp)

    core = _Core(lp, opts, warm_basis, warm_statuses)
    max_iters = opts.max_iters if opts.max_iters is not None else 50 * (core.m + core.n) + 1000
    status = core.run(max_iters)

    x_orig = core.x[:core.n] * core.col_scale
    if status == OPTIMAL:
        obj = float(lp.objective @ x_orig)
    elif status == UNBOUNDED:
        obj = -np.inf
    else:
        obj = float("nan")
    return LpSolution(status=status, x=x_orig, objective_value=obj,
                      iterations=core.iterations, basis=np.sort(core.basic),
                      statuses=core.status.copy())
