"""Whole-life rolling-horizon dispatch.

Each committed day: slice window prices from the yearly series (tiled
cyclically), build the window LP against the current quasi-steady state,
solve it warm-started from the previous day's shifted basis and bound
placements, commit the first day of the schedule to the plant, and let the
lambda policy observe the outcome.  The run ends the first committed day that leaves the state of
health at or below the end-of-life threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import PlantState, SimulationConfig, soh_at_eol, validate_config
from .economics import (AdaptiveLambdaState, adaptive_update, compute_c_ag,
                        npv, profitability_index)
from .formulation import (WindowProblem, build_window_lp, extract_schedule,
                          shift_start)
from .lp import SolverOptions, solve_lp
from .plant import apply_day
from .prices import PriceSeries


class EngineError(RuntimeError):
    """The life simulation could not proceed."""


class StaticLambda:
    """Fixed aging weights for the whole life."""

    def __init__(self, lambda_cyc: float, lambda_cal: float):
        for name, val in (("lambda_cyc", lambda_cyc), ("lambda_cal", lambda_cal)):
            if not (math.isfinite(val) and val >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {val}")
        self.lambda_cyc = lambda_cyc
        self.lambda_cal = lambda_cal

    def lambdas(self) -> tuple[float, float]:
        return self.lambda_cyc, self.lambda_cal

    def observe_day(self, revenue: float, fade: float) -> None:
        pass

    @property
    def logged_lambda(self) -> float:
        # one scalar for the daily log: the common value, or the dominant
        # weight when the two differ (sweeps only ever vary one of them)
        if self.lambda_cyc == self.lambda_cal:
            return self.lambda_cyc
        return max(self.lambda_cyc, self.lambda_cal)


class AdaptiveLambda:
    """Moving-average lambda_both estimator fed by committed-day outcomes."""

    def __init__(self, c_ag: float, window_days: int = 365):
        if not c_ag > 0:
            raise ValueError(f"adaptive policy needs c_ag > 0, got {c_ag}")
        self.c_ag = c_ag
        self._state = AdaptiveLambdaState(window_days=window_days)

    def lambdas(self) -> tuple[float, float]:
        lam = self._state.current_lambda
        return lam, lam

    def observe_day(self, revenue: float, fade: float) -> None:
        self._state = adaptive_update(self._state, revenue, fade, self.c_ag)

    @property
    def logged_lambda(self) -> float:
        return self._state.current_lambda


def policy_from_config(cfg: SimulationConfig):
    eco = cfg.economic
    if eco.adaptive:
        c_ag = compute_c_ag(cfg.battery.c_battery, cfg.battery.q_eol)
        return AdaptiveLambda(c_ag, window_days=eco.adaptive_window_days)
    return StaticLambda(eco.lambda_cyc, eco.lambda_cal)


@dataclass
class LifeResult:
    """Daily log plus life summary of one whole-life run.

    ``revenue_eur``, ``q_cal`` and ``q_cyc`` are per-day increments; ``soh``
    and ``fec`` are the plant state after the day.  One row per committed
    block, ``day`` being the block's first day index.
    """

    day: np.ndarray
    revenue_eur: np.ndarray
    q_cal: np.ndarray
    q_cyc: np.ndarray
    soh: np.ndarray
    fec: np.ndarray
    lambda_used: np.ndarray
    t_eol_years: float
    yearly_revenues: np.ndarray
    final_state: PlantState

    @property
    def days(self) -> int:
        return self.final_state.day_index

    @property
    def total_fec(self) -> float:
        return self.final_state.fec_total

    @property
    def total_revenue(self) -> float:
        return float(np.sum(self.revenue_eur))

    @property
    def q_cal_share(self) -> float:
        total = self.final_state.q_cal_total + self.final_state.q_cyc_total
        if total == 0:
            return 0.0
        return self.final_state.q_cal_total / total

    def npv(self, interest_rate: float) -> float:
        return npv(self.yearly_revenues, interest_rate)

    def summary(self, c_battery: float, interest_rate: float) -> dict:
        value = self.npv(interest_rate)
        return {
            "t_eol_years": self.t_eol_years,
            "npv_eur": value,
            "pi": profitability_index(value, c_battery),
            "total_fec": self.total_fec,
            "q_cal_share": self.q_cal_share,
        }


def _empty_result(state: PlantState) -> LifeResult:
    empty = np.empty(0)
    return LifeResult(day=np.empty(0, dtype=np.int64), revenue_eur=empty,
                      q_cal=empty.copy(), q_cyc=empty.copy(), soh=empty.copy(),
                      fec=empty.copy(), lambda_used=empty.copy(),
                      t_eol_years=0.0, yearly_revenues=np.empty(0),
                      final_state=state)


def run_life(cfg: SimulationConfig, prices: PriceSeries, policy=None,
             initial_fill: float = 0.5, max_years: float = 100.0,
             solver_options: SolverOptions | None = None) -> LifeResult:
    """Run the plant from new to end of life.  Deterministic.

    ``prices`` must share the configured step length and cover a whole
    number of days; day d of the simulation reads the series at day
    ``d mod <days in series>``, wrapping across its end.  ``initial_fill``
    sets the stored-energy fraction at day zero.
    """
    validate_config(cfg)
    b, hz = cfg.battery, cfg.horizon
    if not math.isclose(prices.dt_hours, hz.dt_hours, rel_tol=0.0, abs_tol=1e-12):
        raise EngineError(
            f"price step {prices.step_minutes} min does not match "
            f"configured dt of {hz.dt_hours} h")
    values = prices.values
    spd = hz.steps_per_day
    if len(values) == 0 or len(values) % spd != 0:
        raise EngineError(
            f"price series must cover a whole number of days, got "
            f"{len(values)} steps at {spd} per day")
    if not 0.0 <= initial_fill <= 1.0:
        raise EngineError(f"initial_fill must be within [0, 1], got {initial_fill}")

    year_days = len(values) // spd
    c_ag = compute_c_ag(b.c_battery, b.q_eol)
    if policy is None:
        policy = policy_from_config(cfg)
    eol = soh_at_eol(b)

    state = PlantState(e_batt=initial_fill * b.e_nom * b.soh_initial,
                       soh=b.soh_initial, temp=cfg.thermal.t_initial,
                       fec_total=0.0, q_cal_total=0.0, q_cyc_total=0.0,
                       day_index=0)
    if state.soh <= eol:
        return _empty_result(state)

    n_win, n_commit = hz.window_steps, hz.commit_steps
    total_steps = len(values)
    window_offsets = np.arange(n_win)
    eps_simul = 1e-6 * b.e_nom

    log_day, log_rev, log_qcal, log_qcyc = [], [], [], []
    log_soh, log_fec, log_lam = [], [], []
    basis, statuses = None, None
    max_blocks = int(math.ceil(max_years * 365.25 / hz.commit_days))

    for _ in range(max_blocks):
        day0 = state.day_index
        lam_cyc, lam_cal = policy.lambdas()
        for name, lam in (("lambda_cyc", lam_cyc), ("lambda_cal", lam_cal)):
            if not (math.isfinite(lam) and lam >= 0):
                raise EngineError(f"policy produced invalid {name}={lam} on day {day0}")
        lam_logged = policy.logged_lambda

        start = (day0 % year_days) * spd
        idx = (start + window_offsets) % total_steps
        window_prices = values[idx]

        wp = WindowProblem(prices=window_prices, n_steps=n_win, state_in=state,
                           lambda_cyc=lam_cyc, lambda_cal=lam_cal, c_ag=c_ag)
        lp, layout = build_window_lp(wp, cfg)
        if basis is not None and statuses is not None:
            warm_basis, warm_statuses = shift_start(basis, statuses, layout,
                                                    n_commit, lp)
        else:
            warm_basis, warm_statuses = None, None
        sol = solve_lp(lp, solver_options, warm_basis=warm_basis,
                       warm_statuses=warm_statuses)
        if not sol.optimal and warm_statuses is not None:
            sol = solve_lp(lp, solver_options)
        if not sol.optimal:
            raise EngineError(
                f"window starting day {day0}: solver returned {sol.status}")
        basis, statuses = sol.basis, sol.statuses

        sched = extract_schedule(sol, layout, eps_simul=eps_simul)
        day = apply_day(state, sched.p_chg[:n_commit], sched.p_dis[:n_commit],
                        window_prices[:n_commit], cfg)
        state = day.state_out
        policy.observe_day(day.revenue, day.q_cal + day.q_cyc)

        log_day.append(day0)
        log_rev.append(day.revenue)
        log_qcal.append(day.q_cal)
        log_qcyc.append(day.q_cyc)
        log_soh.append(state.soh)
        log_fec.append(state.fec_total)
        log_lam.append(lam_logged)

        # quasi-steady derating: stored energy may not exceed the shrunk box
        cap = b.e_nom * state.soh
        state.e_batt = min(max(state.e_batt, 0.0), cap)
        if state.soh <= eol:
            break
    else:
        raise EngineError(f"no end of life within {max_years} years; "
                          f"soh still {state.soh:.6f}")

    day_arr = np.array(log_day, dtype=np.int64)
    revenue_arr = np.array(log_rev)
    yearly = np.zeros(int(day_arr[-1] // 365) + 1)
    np.add.at(yearly, day_arr // 365, revenue_arr)

    return LifeResult(day=day_arr, revenue_eur=revenue_arr,
                      q_cal=np.array(log_qcal), q_cyc=np.array(log_qcyc),
                      soh=np.array(log_soh), fec=np.array(log_fec),
                      lambda_used=np.array(log_lam),
                      t_eol_years=state.day_index / 365.25,
                      yearly_revenues=yearly, final_state=state)
