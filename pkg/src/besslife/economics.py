"""Money math: the depreciation penalty, NPV, profitability index, the
lambda hypothesis, and the adaptive moving-average lambda estimator.

All functions are pure; the estimator state is a small immutable value that
``adaptive_update`` replaces rather than mutates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EPS_FADE = 1e-12    # fade fraction per day below which a sample is skipped


def compute_c_ag(c_battery: float, q_eol: float) -> float:
    """EUR of value destroyed per unit fade fraction: c_battery / q_eol."""
    if not q_eol > 0:
        raise ValueError(f"q_eol must be > 0, got {q_eol}")
    if c_battery < 0:
        raise ValueError(f"c_battery must be >= 0, got {c_battery}")
    return c_battery / q_eol


def npv(yearly_revenues, interest_rate: float) -> float:
    """Net present value of per-year revenues, discounting year p by (1+i)^p.

    Year indices start at 1; a partial final year is simply the last entry.
    """
    if interest_rate < 0:
        raise ValueError(f"interest_rate must be >= 0, got {interest_rate}")
    revenues = np.asarray(yearly_revenues, dtype=float)
    if revenues.ndim != 1:
        raise ValueError("yearly_revenues must be one-dimensional")
    if revenues.size == 0:
        return 0.0
    periods = np.arange(1, revenues.size + 1)
    return float(np.sum(revenues / (1.0 + interest_rate) ** periods))


def profitability_index(npv_eur: float, c_battery: float) -> float:
    """NPV divided by the upfront battery cost."""
    if not c_battery > 0:
        raise ValueError(f"c_battery must be > 0, got {c_battery}")
    return npv_eur / c_battery


def hypothesized_lambda(npv_eur: float, c_battery: float,
                        interest_rate: float = 0.0,
                        corrected: bool = False) -> float:
    """The aging-weight guess implied by whole-life profitability.

    Plain form returns the profitability index; the corrected form divides
    by (1+i), which compensates the one-year lag between earning a revenue
    and its discounting.
    """
    pi = profitability_index(npv_eur, c_battery)
    return pi / (1.0 + interest_rate) if corrected else pi


@dataclass(frozen=True)
class AdaptiveLambdaState:
    """Moving-average estimator for the combined aging weight.

    ``samples`` holds the most recent per-day revenue-per-fade ratios,
    already normalized by c_ag so the mean is directly usable as
    lambda_both.  Before any sample exists the estimator runs at 1.0
    (plain depreciation costing).
    """

    window_days: int
    samples: tuple = ()

    def __post_init__(self):
        if self.window_days < 1:
            raise ValueError(f"window_days must be >= 1, got {self.window_days}")
        if len(self.samples) > self.window_days:
            raise ValueError("sample buffer longer than the window")

    @property
    def current_lambda(self) -> float:
        if not self.samples:
            return 1.0
        return max(float(np.mean(self.samples)), 0.0)


def adaptive_update(state: AdaptiveLambdaState, revenue: float,
                    fade: float, c_ag: float) -> AdaptiveLambdaState:
    """Fold one committed day into the estimator.

    Days with fade below EPS_FADE carry no usable ratio and leave the
    buffer unchanged.
    """
    if not c_ag > 0:
        raise ValueError(f"c_ag must be > 0, got {c_ag}")
    if not (math.isfinite(revenue) and math.isfinite(fade)):
        raise ValueError(f"non-finite day sample: revenue={revenue}, fade={fade}")
    if fade <= EPS_FADE:
        return state
    ratio = (revenue / fade) / c_ag
    samples = (state.samples + (ratio,))[-state.window_days:]
    return AdaptiveLambdaState(window_days=state.window_days, samples=samples)
