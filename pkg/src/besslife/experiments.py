"""Scripted studies over whole-life runs: lambda sweeps, interest-rate
families, fade-split decomposition, and weekly lambda estimates.

A sweep runs one life per lambda grid point and prices every requested
interest rate from that run's yearly revenues, so adding rates is free.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .domain import SimulationConfig
from .economics import compute_c_ag, npv, profitability_index
from .engine import EngineError, LifeResult, StaticLambda, run_life
from .prices import PriceSeries

MODES = ("cal-only", "cyc-only", "both", "grid2d")
DEFAULT_LAMBDAS = tuple(float(2.0 ** k) for k in range(-2, 7))


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep: which weight axis, over which values, at which rates."""

    mode: str = "both"
    lambda_values: tuple = DEFAULT_LAMBDAS
    interest_rates: tuple = (0.0,)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        lams = tuple(float(v) for v in self.lambda_values)
        if not lams:
            raise ValueError("lambda_values must not be empty")
        if any(v <= 0 for v in lams):
            raise ValueError("lambda_values must be positive")
        if any(a >= b for a, b in zip(lams, lams[1:])):
            raise ValueError("lambda_values must be strictly ascending")
        rates = tuple(float(r) for r in self.interest_rates)
        if not rates:
            raise ValueError("interest_rates must not be empty")
        if any(r < 0 for r in rates):
            raise ValueError("interest_rates must be >= 0")
        object.__setattr__(self, "lambda_values", lams)
        object.__setattr__(self, "interest_rates", rates)

    def pairs(self) -> list[tuple[float, float]]:
        """Grid of (lambda_cyc, lambda_cal) pairs for the chosen mode.

        Single-axis modes hold the other weight at 1 (plain depreciation
        costing), so each curve perturbs exactly one lever.
        """
        if self.mode == "cal-only":
            return [(1.0, lam) for lam in self.lambda_values]
        if self.mode == "cyc-only":
            return [(lam, 1.0) for lam in self.lambda_values]
        if self.mode == "both":
            return [(lam, lam) for lam in self.lambda_values]
        return [(cyc, cal) for cyc in self.lambda_values
                for cal in self.lambda_values]


@dataclass
class SweepRow:
    lambda_cal: float
    lambda_cyc: float
    interest_rate: float
    npv_eur: float
    pi: float
    t_eol_years: float
    total_fec: float
    q_cal_share: float
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_sweep(spec: SweepSpec, cfg: SimulationConfig, prices: PriceSeries,
              initial_fill: float = 0.5, max_years: float = 100.0,
              solver_options=None) -> list[SweepRow]:
    """One life per grid point, one row per (grid point, interest rate).

    A failed run yields NaN rows carrying the failure text instead of
    aborting the remaining grid.
    """
    rows: list[SweepRow] = []
    c_battery = cfg.battery.c_battery
    for lam_cyc, lam_cal in spec.pairs():
        try:
            life = run_life(cfg, prices, policy=StaticLambda(lam_cyc, lam_cal),
                            initial_fill=initial_fill, max_years=max_years,
                            solver_options=solver_options)
        except EngineError as exc:
            for rate in spec.interest_rates:
                rows.append(SweepRow(lambda_cal=lam_cal, lambda_cyc=lam_cyc,
                                     interest_rate=rate, npv_eur=float("nan"),
                                     pi=float("nan"), t_eol_years=float("nan"),
                                     total_fec=float("nan"),
                                     q_cal_share=float("nan"), error=str(exc)))
            continue
        for rate in spec.interest_rates:
            value = life.npv(rate)
            rows.append(SweepRow(
                lambda_cal=lam_cal, lambda_cyc=lam_cyc, interest_rate=rate,
                npv_eur=value, pi=profitability_index(value, c_battery),
                t_eol_years=life.t_eol_years, total_fec=life.total_fec,
                q_cal_share=life.q_cal_share))
    return rows


def find_peak(rows, interest_rate: float | None = None) -> SweepRow:
    """Row with the highest NPV; ties broken toward gentler (smaller) lambda.

    ``interest_rate`` filters a multi-rate table down to one family first.
    """
    pool = [r for r in rows if r.ok]
    if interest_rate is not None:
        pool = [r for r in pool if r.interest_rate == interest_rate]
    if not pool:
        raise ValueError("no successful sweep rows to pick a peak from")
    return min(pool, key=lambda r: (-r.npv_eur, r.lambda_cyc + r.lambda_cal,
                                    r.lambda_cyc, r.lambda_cal))


def aging_portions(result: LifeResult) -> tuple[float, float]:
    """Calendar and cycle shares of the fade accrued over the whole life."""
    state = result.final_state
    total = state.q_cal_total + state.q_cyc_total
    if total <= 0:
        raise ValueError("life accrued no fade; shares are undefined")
    cal = state.q_cal_total / total
    return cal, 1.0 - cal


def weekly_lambda_scatter(result: LifeResult, c_ag: float):
    """Per-week (revenue/fade)/c_ag estimates from a daily log.

    Returns (week indices, estimates, mean estimate).  Weeks with fade at
    or below zero carry no information and are skipped.
    """
    if not c_ag > 0:
        raise ValueError(f"c_ag must be > 0, got {c_ag}")
    days = len(result.day)
    if days == 0:
        raise ValueError("empty daily log")
    weeks = []
    estimates = []
    for w in range(0, days, 7):
        revenue = float(np.sum(result.revenue_eur[w:w + 7]))
        fade = float(np.sum(result.q_cal[w:w + 7]) + np.sum(result.q_cyc[w:w + 7]))
        if fade <= 0:
            continue
        weeks.append(w // 7)
        estimates.append((revenue / fade) / c_ag)
    weeks = np.array(weeks, dtype=np.int64)
    estimates = np.array(estimates)
    mean = float(np.mean(estimates)) if len(estimates) else float("nan")
    return weeks, estimates, mean


SWEEP_CSV_HEADER = ("lambda_cal,lambda_cyc,interest_rate,npv_eur,pi,"
                    "t_eol_years,total_fec,q_cal_share,error")


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(SWEEP_CSV_HEADER + "\n")
        for r in rows:
            fh.write(f"{r.lambda_cal!r},{r.lambda_cyc!r},{r.interest_rate!r},"
                     f"{r.npv_eur!r},{r.pi!r},{r.t_eol_years!r},"
                     f"{r.total_fec!r},{r.q_cal_share!r},"
                     f"{r.error or ''}\n")


def write_peak_json(row: SweepRow, path) -> None:
    payload = {
        "lambda_cal": row.lambda_cal,
        "lambda_cyc": row.lambda_cyc,
        "interest_rate": row.interest_rate,
        "npv_eur": row.npv_eur,
        "pi": row.pi,
        "t_eol_years": row.t_eol_years,
        "total_fec": row.total_fec,
        "q_cal_share": row.q_cal_share,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
