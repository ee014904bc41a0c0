"""Forward simulation of the physical plant under a committed dispatch.

The plant shares the optimizer's equations exactly (same energy recursion,
thermal model and aging planes) but knows nothing about lambda weights or
prices beyond settling revenue.  Fade accrued here is the ground truth that
lifetime economics are computed from.

Bounds are checked against the quasi-steady state of health frozen at the
start of the committed day (``soh_ref``), matching how the optimizer saw
the window; the living ``state.soh`` keeps decreasing inside the day.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import PlantState, SimulationConfig


class SimulationFault(RuntimeError):
    """A committed schedule violated plant limits beyond tolerance."""


@dataclass
class StepOutcome:
    revenue: float      # EUR, positive = earned from the grid
    q_cal: float        # calendar fade fraction this step
    q_cyc: float        # cycle fade fraction this step
    fec: float          # FEC increment (total throughput / 2 E_nom)


@dataclass
class DayOutcome:
    revenue: float
    q_cal: float
    q_cyc: float
    fec: float
    state_out: PlantState


def step_plant(state: PlantState, p_chg: float, p_dis: float, price: float,
               cfg: SimulationConfig, soh_ref: float | None = None,
               step: int | None = None) -> tuple[PlantState, StepOutcome]:
    """Advance the plant one step under (p_chg, p_dis) at ``price``.

    Returns the new state and the step outcome.  ``soh_ref`` is the frozen
    day-start state of health used for the energy bound and SOC reference;
    it defaults to the current ``state.soh``.
    """
    b, th, ag = cfg.battery, cfg.thermal, cfg.aging
    dt = cfg.horizon.dt_hours
    soh0 = state.soh if soh_ref is None else soh_ref
    where = f" at step {step}" if step is not None else ""

    tol_p = 1e-6 * max(1.0, b.e_nom)
    if not (-tol_p <= p_chg <= b.p_max_chg + tol_p):
        raise SimulationFault(f"charge power {p_chg} outside [0, {b.p_max_chg}]{where}")
    if not (-tol_p <= p_dis <= b.p_max_dis + tol_p):
        raise SimulationFault(f"discharge power {p_dis} outside [0, {b.p_max_dis}]{where}")

    e_prev, t_prev = state.e_batt, state.temp
    e_next = e_prev + (p_chg - p_dis) * dt
    cap = b.e_nom * soh0
    tol_e = 1e-6 * max(1.0, cap)
    if not (-tol_e <= e_next <= cap + tol_e):
        raise SimulationFault(f"stored energy {e_next} outside [0, {cap}]{where}")

    decay = 1.0 - th.k_t * th.alpha_t * dt
    t_next = decay * t_prev + th.k_t * th.alpha_t * dt * th.t_amb \
        + th.k_t * dt / b.e_nom * (th.beta_chg * p_chg + th.beta_dis * p_dis)

    p_ac = p_chg / b.eta_chg - p_dis * b.eta_dis
    revenue = -price * p_ac * dt

    fec = (p_chg + p_dis) * dt / (2.0 * b.e_nom)
    fec_aging = fec if ag.fec_throughput == "total" else p_dis * dt / (2.0 * b.e_nom)
    q_cyc = ag.k_cyc_dis * fec_aging + float(ag.cyc_chg_fade(p_chg / b.e_nom))
    soc_avg = (e_prev + e_next) / (2.0 * b.e_nom * soh0)
    t_avg = (t_prev + t_next) / 2.0
    q_cal = float(ag.cal_fade(soc_avg, t_avg))

    new = state.copy()
    new.e_batt = e_next
    new.temp = t_next
    new.soh = state.soh - q_cal - q_cyc
    new.fec_total = state.fec_total + fec
    new.q_cal_total = state.q_cal_total + q_cal
    new.q_cyc_total = state.q_cyc_total + q_cyc
    return new, StepOutcome(revenue=revenue, q_cal=q_cal, q_cyc=q_cyc, fec=fec)


def apply_day(state: PlantState, p_chg, p_dis, prices,
              cfg: SimulationConfig) -> DayOutcome:
    """Fold ``step_plant`` over one committed day of dispatch.

    ``p_chg``/``p_dis``/``prices`` must each cover exactly
    ``commit_days * steps_per_day`` steps.  The day-start SOH is frozen as
    the bound reference for the whole day.
    """
    n = cfg.horizon.commit_steps
    p_chg = np.asarray(p_chg, dtype=float)
    p_dis = np.asarray(p_dis, dtype=float)
    prices = np.asarray(prices, dtype=float)
    for name, arr in (("p_chg", p_chg), ("p_dis", p_dis), ("prices", prices)):
        if arr.shape != (n,):
            raise ValueError(f"{name} must cover {n} committed steps, got shape {arr.shape}")

    soh_ref = state.soh
    current = state
    revenue = q_cal = q_cyc = fec = 0.0
    for t in range(n):
        current, out = step_plant(current, float(p_chg[t]), float(p_dis[t]),
                                  float(prices[t]), cfg, soh_ref=soh_ref, step=t)
        revenue += out.revenue
        q_cal += out.q_cal
        q_cyc += out.q_cyc
        fec += out.fec
    current.day_index = state.day_index + cfg.horizon.commit_days
    return DayOutcome(revenue=revenue, q_cal=q_cal, q_cyc=q_cyc, fec=fec,
                      state_out=current)
