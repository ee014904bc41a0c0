"""Rolling-window dispatch LP: prices + plant state + aging weights -> SparseLp.

One window covers ``n_steps`` uniform steps.  Decision variables per step are
charge power, discharge power, stored energy, temperature and the two
epigraph variables for the piecewise-affine aging terms; AC-side power, FEC
increment, average SOC and average temperature are affine in these and are
substituted inline instead of getting variables of their own.

The objective (minimized) is

    sum_t [ c_en(t) * (p_chg/eta_chg - p_dis*eta_dis) * dt
            + c_ag * (lambda_cyc * (k_cyc_dis * dFEC(t) + q_cyc_chg(t))
                      + lambda_cal * q_cal(t)) ]

i.e. energy cost minus revenue plus priced aging.  Simultaneous charge and
discharge is not forbidden by constraints (that would need binaries); with
non-negative prices and efficiencies below one it is never profitable, and
``extract_schedule`` flags any residual overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import PlantState, SimulationConfig
from .lp import EQ, GE, LpSolution, SparseLp

KINDS = ("p_chg", "p_dis", "e", "temp", "q_cyc_chg", "q_cal")
ROW_KINDS = ("energy", "temp", "cyc", "cal")


class WindowInputError(ValueError):
    """A window was asked to start from inputs the model cannot represent."""


@dataclass(frozen=True)
class WindowProblem:
    """Inputs for one rolling-horizon window."""

    prices: np.ndarray          # EUR/kWh per step, length n_steps
    n_steps: int
    state_in: PlantState        # supplies E_0, SOH_0, T_0
    lambda_cyc: float
    lambda_cal: float
    c_ag: float                 # EUR per unit fade fraction


@dataclass(frozen=True)
class VariableLayout:
    """Dense index map for window variables and constraint rows.

    Variables are laid out in blocks of ``n_steps`` in KINDS order; rows are
    energy recursion, temperature recursion, then the two epigraph families,
    step-major within each family.
    """

    n_steps: int
    n_cyc_planes: int
    n_cal_planes: int
    # fade variables live in the LP as money (fade * cost weight) so that
    # their values, costs and duals are all O(1); divide raw solution values
    # by these to recover fade fractions
    q_cyc_scale: float = 1.0
    q_cal_scale: float = 1.0

    @property
    def n_vars(self) -> int:
        return 6 * self.n_steps

    @property
    def n_rows(self) -> int:
        return self.n_steps * (2 + self.n_cyc_planes + self.n_cal_planes)

    def index(self, kind: str, t: int) -> int:
        return KINDS.index(kind) * self.n_steps + t

    def var_slice(self, kind: str) -> slice:
        k = KINDS.index(kind)
        return slice(k * self.n_steps, (k + 1) * self.n_steps)

    def decode_var(self, idx: int):
        kind, t = divmod(idx, self.n_steps)
        return KINDS[kind], t

    def row_index(self, kind: str, t: int, plane: int = 0) -> int:
        n = self.n_steps
        if kind == "energy":
            return t
        if kind == "temp":
            return n + t
        if kind == "cyc":
            return 2 * n + t * self.n_cyc_planes + plane
        if kind == "cal":
            return n * (2 + self.n_cyc_planes) + t * self.n_cal_planes + plane
        raise ValueError(f"unknown row kind {kind!r}")

    def decode_row(self, r: int):
        n = self.n_steps
        if r < n:
            return "energy", r, 0
        if r < 2 * n:
            return "temp", r - n, 0
        r -= 2 * n
        if r < n * self.n_cyc_planes:
            t, plane = divmod(r, self.n_cyc_planes)
            return "cyc", t, plane
        r -= n * self.n_cyc_planes
        t, plane = divmod(r, self.n_cal_planes)
        return "cal", t, plane


def _check_window(wp: WindowProblem, cfg: SimulationConfig):
    problems = []
    b = cfg.battery
    prices = np.asarray(wp.prices, dtype=float)
    if wp.n_steps < 1:
        problems.append(f"n_steps must be >= 1, got {wp.n_steps}")
    if prices.shape != (wp.n_steps,):
        problems.append(f"prices shape {prices.shape} does not match n_steps {wp.n_steps}")
    elif not np.all(np.isfinite(prices)):
        problems.append("prices contain non-finite values")
    elif np.any(prices < 0):
        problems.append("prices must be non-negative (apply the abs transform first)")
    st = wp.state_in
    cap = b.e_nom * st.soh
    tol = 1e-9 * max(1.0, b.e_nom)
    if not st.soh > 0:
        problems.append(f"state_in.soh must be > 0, got {st.soh}")
    if st.e_batt < -tol or st.e_batt > cap + tol:
        problems.append(f"state_in.e_batt {st.e_batt} outside [0, e_nom*soh] = [0, {cap}]")
    if not math.isfinite(st.temp):
        problems.append(f"state_in.temp must be finite, got {st.temp}")
    for name in ("lambda_cyc", "lambda_cal", "c_ag"):
        val = getattr(wp, name)
        if not (math.isfinite(val) and val >= 0):
            problems.append(f"{name} must be finite and >= 0, got {val}")
    if problems:
        raise WindowInputError("; ".join(problems))
    return prices


def build_window_lp(wp: WindowProblem, cfg: SimulationConfig):
    """Build the window LP.  Returns (SparseLp, VariableLayout)."""
    prices = _check_window(wp, cfg)
    b, th, ag = cfg.battery, cfg.thermal, cfg.aging
    n = wp.n_steps
    dt = cfg.horizon.dt_hours
    e0, soh0, t0 = wp.state_in.e_batt, wp.state_in.soh, wp.state_in.temp
    # fade fractions are ~1e-7 per step while their cost weights reach 1e6+;
    # carrying them in money units keeps every row O(1) so feasibility
    # tolerances cannot leak visibly into the objective
    weight_cyc = wp.c_ag * wp.lambda_cyc
    weight_cal = wp.c_ag * wp.lambda_cal
    w_cyc = max(weight_cyc, 1.0)
    w_cal = max(weight_cal, 1.0)
    layout = VariableLayout(n, len(ag.cyc_chg_planes), len(ag.cal_planes),
                            q_cyc_scale=w_cyc, q_cal_scale=w_cal)

    lower = np.zeros(layout.n_vars)
    upper = np.full(layout.n_vars, np.inf)
    upper[layout.var_slice("p_chg")] = b.p_max_chg
    upper[layout.var_slice("p_dis")] = b.p_max_dis
    upper[layout.var_slice("e")] = b.e_nom * soh0
    for kind in ("temp", "q_cyc_chg", "q_cal"):
        lower[layout.var_slice(kind)] = -np.inf

    cost = np.zeros(layout.n_vars)
    fec_coef = wp.c_ag * wp.lambda_cyc * ag.k_cyc_dis * dt / (2.0 * b.e_nom)
    cost[layout.var_slice("p_chg")] = prices * dt / b.eta_chg
    if ag.fec_throughput == "total":
        cost[layout.var_slice("p_chg")] += fec_coef
    cost[layout.var_slice("p_dis")] = -prices * dt * b.eta_dis + fec_coef
    cost[layout.var_slice("q_cyc_chg")] = weight_cyc / w_cyc
    cost[layout.var_slice("q_cal")] = weight_cal / w_cal

    lp = SparseLp(layout.n_vars, lower=lower, upper=upper, objective=cost)
    ts = np.arange(n)
    i_pc = ts
    i_pd = n + ts
    i_e = 2 * n + ts
    i_T = 3 * n + ts
    i_qc = 4 * n + ts
    i_ql = 5 * n + ts

    rows, cols, vals = [], [], []
    rels = np.empty(layout.n_rows, dtype=np.int8)
    rhs = np.zeros(layout.n_rows)

    def block(r, c, v):
        rows.append(np.asarray(r, dtype=np.int64))
        cols.append(np.asarray(c, dtype=np.int64))
        vals.append(np.asarray(v, dtype=float))

    # energy recursion: e(t) - e(t-1) - (p_chg - p_dis) * dt = [E_0 at t=0]
    r_en = ts
    block(r_en, i_e, np.ones(n))
    block(r_en[1:], i_e[:-1], -np.ones(n - 1))
    block(r_en, i_pc, np.full(n, -dt))
    block(r_en, i_pd, np.full(n, dt))
    rels[r_en] = EQ
    rhs[r_en[0]] = e0

    # temperature recursion:
    # T(t) - (1 - k_t*alpha_t*dt) T(t-1) - (k_t*dt/e_nom)(beta_chg p_chg + beta_dis p_dis)
    #   = k_t*alpha_t*dt * t_amb  [plus the T_0 carry at t=0]
    decay = 1.0 - th.k_t * th.alpha_t * dt
    heat = th.k_t * dt / b.e_nom
    drive = th.k_t * th.alpha_t * dt * th.t_amb
    r_T = n + ts
    block(r_T, i_T, np.ones(n))
    if decay != 0.0:
        block(r_T[1:], i_T[:-1], np.full(n - 1, -decay))
    if heat != 0.0:
        if th.beta_chg != 0.0:
            block(r_T, i_pc, np.full(n, -heat * th.beta_chg))
        if th.beta_dis != 0.0:
            block(r_T, i_pd, np.full(n, -heat * th.beta_dis))
    rels[r_T] = EQ
    rhs[r_T] = drive
    rhs[r_T[0]] += decay * t0

    # cycle epigraph, scaled by w_cyc: q~(t) >= w (a_i + b_i * p_chg(t)/e_nom)
    k1 = layout.n_cyc_planes
    for i, (a_i, b_i) in enumerate(ag.cyc_chg_planes):
        r = 2 * n + ts * k1 + i
        block(r, i_qc, np.ones(n))
        if b_i != 0.0:
            block(r, i_pc, np.full(n, -w_cyc * b_i / b.e_nom))
        rels[r] = GE
        rhs[r] = w_cyc * a_i

    # calendar epigraph, scaled by w_cal: q~(t) >= w (a + b*SOC_avg + c*T_avg)
    # SOC_avg = (e(t-1)+e(t)) / (2 e_nom SOH_0), T_avg = (T(t-1)+T(t))/2
    k2 = layout.n_cal_planes
    soc_den = 2.0 * b.e_nom * soh0
    base = n * (2 + k1)
    for i, (a_i, b_i, c_i) in enumerate(ag.cal_planes):
        r = base + ts * k2 + i
        block(r, i_ql, np.ones(n))
        if b_i != 0.0:
            block(r, i_e, np.full(n, -w_cal * b_i / soc_den))
            block(r[1:], i_e[:-1], np.full(n - 1, -w_cal * b_i / soc_den))
        if c_i != 0.0:
            block(r, i_T, np.full(n, -w_cal * c_i / 2.0))
            block(r[1:], i_T[:-1], np.full(n - 1, -w_cal * c_i / 2.0))
        rels[r] = GE
        rhs[r] = w_cal * a_i
        rhs[r[0]] += w_cal * (b_i * e0 / soc_den + c_i * t0 / 2.0)

    lp.add_rows_coo(np.concatenate(rows), np.concatenate(cols),
                    np.concatenate(vals), rels, rhs)
    assert lp.n_rows == layout.n_rows
    return lp, layout


@dataclass
class Schedule:
    """Per-step dispatch extracted from an optimal window solution."""

    p_chg: np.ndarray
    p_dis: np.ndarray
    e: np.ndarray
    temp: np.ndarray
    q_cyc_chg: np.ndarray
    q_cal: np.ndarray
    simultaneous_steps: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __len__(self):
        return len(self.p_chg)

    @property
    def has_simultaneity(self) -> bool:
        return len(self.simultaneous_steps) > 0


def extract_schedule(sol: LpSolution, layout: VariableLayout,
                     eps_simul: float) -> Schedule:
    """Slice an optimal solution into a typed schedule.

    Steps with ``p_chg * p_dis > eps_simul`` are flagged; they indicate the
    convex relaxation of the no-simultaneity rule was not tight (possible
    with zero prices or exotic aging weights, never with strictly positive
    prices and round-trip losses).
    """
    if not sol.optimal:
        raise ValueError(f"cannot extract schedule from status {sol.status!r}")
    fields_ = {kind: sol.x[layout.var_slice(kind)].copy() for kind in KINDS}
    fields_["q_cyc_chg"] /= layout.q_cyc_scale
    fields_["q_cal"] /= layout.q_cal_scale
    overlap = fields_["p_chg"] * fields_["p_dis"]
    simul = np.nonzero(overlap > eps_simul)[0]
    return Schedule(simultaneous_steps=simul, **fields_)


@dataclass
class ScheduleEvaluation:
    """Model quantities recomputed directly from a power schedule."""

    e: np.ndarray          # stored energy after each step
    temp: np.ndarray       # temperature after each step
    p_ac: np.ndarray       # AC-side power, positive = drawing from grid
    fec: np.ndarray        # per-step FEC increment (total throughput / 2 E_nom)
    q_cyc: np.ndarray      # per-step cycle fade
    q_cal: np.ndarray      # per-step calendar fade


def evaluate_schedule_aging(p_chg, p_dis, state_in: PlantState,
                            cfg: SimulationConfig) -> ScheduleEvaluation:
    """Evaluate energy, temperature and aging for given powers.

    This recomputes the piecewise-affine maxima directly (no epigraph
    variables), so it is the reference the LP's aging terms are judged
    against and the revenue/fade evaluator used by tests.
    """
    b, th, ag = cfg.battery, cfg.thermal, cfg.aging
    dt = cfg.horizon.dt_hours
    p_chg = np.asarray(p_chg, dtype=float)
    p_dis = np.asarray(p_dis, dtype=float)
    n = len(p_chg)

    e = np.empty(n)
    temp = np.empty(n)
    e_prev, t_prev = state_in.e_batt, state_in.temp
    decay = 1.0 - th.k_t * th.alpha_t * dt
    drive = th.k_t * th.alpha_t * dt * th.t_amb
    heat = th.k_t * dt / b.e_nom
    for t in range(n):
        e_prev = e_prev + (p_chg[t] - p_dis[t]) * dt
        t_prev = decay * t_prev + drive + heat * (th.beta_chg * p_chg[t] + th.beta_dis * p_dis[t])
        e[t] = e_prev
        temp[t] = t_prev

    p_ac = p_chg / b.eta_chg - p_dis * b.eta_dis
    fec = (p_chg + p_dis) * dt / (2.0 * b.e_nom)
    if ag.fec_throughput == "total":
        fec_aging = fec
    else:
        fec_aging = p_dis * dt / (2.0 * b.e_nom)
    q_cyc = ag.k_cyc_dis * fec_aging + ag.cyc_chg_fade(p_chg / b.e_nom)

    e_from = np.concatenate([[state_in.e_batt], e[:-1]])
    t_from = np.concatenate([[state_in.temp], temp[:-1]])
    soc_avg = (e_from + e) / (2.0 * b.e_nom * state_in.soh)
    t_avg = (t_from + temp) / 2.0
    q_cal = ag.cal_fade(soc_avg, t_avg)
    return ScheduleEvaluation(e=e, temp=temp, p_ac=p_ac, fec=fec,
                              q_cyc=q_cyc, q_cal=q_cal)


def reevaluate_objective(wp: WindowProblem, cfg: SimulationConfig,
                         p_chg, p_dis) -> float:
    """Objective of a power schedule with PWA maxima recomputed directly."""
    ev = evaluate_schedule_aging(p_chg, p_dis, wp.state_in, cfg)
    dt = cfg.horizon.dt_hours
    energy_cost = float(np.dot(np.asarray(wp.prices, dtype=float), ev.p_ac) * dt)
    aging_cost = wp.c_ag * (wp.lambda_cyc * float(ev.q_cyc.sum())
                            + wp.lambda_cal * float(ev.q_cal.sum()))
    return energy_cost + aging_cost


def _shifted_column(idx: int, layout: VariableLayout, shift_steps: int) -> int:
    """New-window id of an old-window column, or -1 if its step was committed.

    Applies to structural columns and slacks alike (slack id = n_vars + row).
    """
    n_vars = layout.n_vars
    if idx < n_vars:
        kind, t = layout.decode_var(idx)
        t2 = t - shift_steps
        return layout.index(kind, t2) if t2 >= 0 else -1
    kind, t, plane = layout.decode_row(idx - n_vars)
    t2 = t - shift_steps
    return n_vars + layout.row_index(kind, t2, plane) if t2 >= 0 else -1


def shift_basis(basis, layout: VariableLayout, shift_steps: int) -> np.ndarray:
    """Translate an optimal basis back by ``shift_steps`` for the next window.

    Columns referring to steps that have been committed fall off the front;
    the vacated basis slots are filled with slacks of rows not already
    represented, which the composite phase 1 then repairs cheaply.  Prefer
    :func:`shift_start` when the next window's LP is at hand: it also carries
    nonbasic placements and keeps the filled basis structurally nonsingular.
    """
    kept = []
    for idx in np.asarray(basis, dtype=np.int64):
        j = _shifted_column(int(idx), layout, shift_steps)
        if j >= 0:
            kept.append(j)
    n_vars = layout.n_vars
    in_basis = set(kept)
    out = list(kept)
    for r in range(layout.n_rows):
        if len(out) >= layout.n_rows:
            break
        slack = n_vars + r
        if slack not in in_basis:
            out.append(slack)
            in_basis.add(slack)
    return np.sort(np.array(out, dtype=np.int64))


def shift_start(basis, statuses, layout: VariableLayout, shift_steps: int,
                lp: SparseLp):
    """Translate a window optimum into a starting point for the next window.

    ``basis`` and ``statuses`` come from the previous window's solution and
    ``lp`` is the next window's problem (same layout, inputs shifted by
    ``shift_steps``).  Committed-step columns fall off the front.  Nonbasic
    placements shift with their columns; new tail columns are left FREE so
    the solver applies its default placement.  Vacated basis slots are
    filled with slacks, rows left without any nonzero among the kept columns
    first (otherwise the candidate basis is singular before it starts, e.g.
    the tail rows whose every structural column is new).  Returns
    ``(basis, statuses)``; the basis is None when no nonsingular fill exists.
    """
    from .simplex import FREE

    n_vars, n_rows = layout.n_vars, layout.n_rows
    statuses = np.asarray(statuses)
    if statuses.shape != (n_vars + n_rows,):
        raise ValueError(
            f"statuses shape {statuses.shape} does not match layout "
            f"({n_vars} columns + {n_rows} slacks)")

    new_statuses = np.full_like(statuses, FREE)
    for idx in range(statuses.size):
        j = _shifted_column(idx, layout, shift_steps)
        if j >= 0:
            new_statuses[j] = statuses[idx]

    kept = []
    for idx in np.asarray(basis, dtype=np.int64):
        j = _shifted_column(int(idx), layout, shift_steps)
        if j >= 0:
            kept.append(j)

    a = lp.matrix().tocsc()
    covered = np.zeros(n_rows, dtype=bool)
    for j in kept:
        if j < n_vars:
            covered[a.indices[a.indptr[j]:a.indptr[j + 1]]] = True
        else:
            covered[j - n_vars] = True
    in_basis = set(kept)
    mandatory = [r for r in np.flatnonzero(~covered) if n_vars + r not in in_basis]
    if len(kept) + len(mandatory) > n_rows:
        return None, new_statuses

    out = kept + [n_vars + r for r in mandatory]
    in_basis.update(n_vars + r for r in mandatory)
    for r in range(n_rows):
        if len(out) >= n_rows:
            break
        slack = n_vars + r
        if slack not in in_basis:
            out.append(slack)
            in_basis.add(slack)
    return np.sort(np.array(out, dtype=np.int64)), new_statuses
