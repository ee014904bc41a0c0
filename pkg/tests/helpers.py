"""Shared builders for test configurations.

The baseline is a 1 MWh plant on 15-minute steps with mild, realistic aging
(a few percent per year).  Tests override individual fields through the
``**overrides`` hooks rather than building configs from scratch.
"""

import dataclasses

from besslife.domain import (AgingModel, BatteryConfig, EconomicConfig,
                             HorizonConfig, SimulationConfig, ThermalConfig)


def make_battery(**overrides):
    base = dict(e_nom=1000.0, c_rate_max_chg=0.5, c_rate_max_dis=0.5,
                eta_chg=0.92, eta_dis=0.92, c_battery=200_000.0,
                q_eol=0.20, soh_initial=1.0)
    base.update(overrides)
    return BatteryConfig(**base)


def make_thermal(**overrides):
    base = dict(k_t=1.0, alpha_t=0.1, beta_chg=0.02, beta_dis=0.02,
                t_amb=25.0, t_initial=25.0)
    base.update(overrides)
    return ThermalConfig(**base)


def make_aging(**overrides):
    # coefficients are fade fractions per 15-minute step
    base = dict(
        k_cyc_dis=5e-5,
        cyc_chg_planes=((0.0, 1e-5), (-5e-6, 3e-5)),
        cal_planes=((3e-7, 3e-7, 1.2e-8), (1e-7, 8e-7, 1e-8)),
        fec_throughput="total",
    )
    base.update(overrides)
    return AgingModel(**base)


def make_economic(**overrides):
    base = dict(lambda_cyc=1.0, lambda_cal=1.0, interest_rate=0.0,
                adaptive=False, adaptive_window_days=365)
    base.update(overrides)
    return EconomicConfig(**base)


def make_horizon(**overrides):
    base = dict(dt_hours=0.25, window_days=7, commit_days=1)
    base.update(overrides)
    return HorizonConfig(**base)


def make_config(battery=None, thermal=None, aging=None, economic=None,
                horizon=None):
    return SimulationConfig(
        battery=battery or make_battery(),
        thermal=thermal or make_thermal(),
        aging=aging or make_aging(),
        economic=economic or make_economic(),
        horizon=horizon or make_horizon(),
    )


def with_section(cfg, **sections):
    """Copy of ``cfg`` with whole sections replaced."""
    return dataclasses.replace(cfg, **sections)


def make_fast_config(**horizon_overrides):
    """Plant that dies within weeks of simulated time, on 2 h steps.

    Aging is cranked up so whole-life behavior can be exercised with a few
    dozen window solves.
    """
    horizon = dict(dt_hours=2.0, window_days=1, commit_days=1)
    horizon.update(horizon_overrides)
    return make_config(
        aging=make_aging(
            k_cyc_dis=6e-4,
            cyc_chg_planes=((0.0, 2e-4), (-1e-4, 6e-4)),
            cal_planes=((1.2e-4, 1.0e-4, 4e-6), (0.3e-4, 3.0e-4, 3.5e-6)),
        ),
        horizon=make_horizon(**horizon),
    )


def make_fast_prices(days=4, seed=1):
    from besslife.prices import generate_synthetic_prices
    return generate_synthetic_prices(seed=seed, days=days, step_minutes=120)
