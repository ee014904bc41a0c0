"""Whole-life battery energy arbitrage simulation.

A battery trading on day-ahead style prices is dispatched by a rolling
horizon optimizer whose objective mixes market revenue with priced cyclic
and calendar aging.  The plant is stepped forward day by day until the
battery reaches end of life, and the lifetime cash flows are discounted
into net present value and profitability index figures.  Sweep experiments
expose how the aging price weights shape lifetime economics.
"""

from .domain import (AgingModel, BatteryConfig, ConfigError, EconomicConfig,
                     HorizonConfig, PlantState, SimulationConfig,
                     ThermalConfig, config_from_dict, config_to_dict,
                     load_config, save_config, validate_config)
from .economics import (compute_c_ag, hypothesized_lambda, npv,
                        profitability_index)
from .engine import (AdaptiveLambda, EngineError, LifeResult, StaticLambda,
                     policy_from_config, run_life)
from .experiments import (DEFAULT_LAMBDAS, MODES, SweepRow, SweepSpec,
                          find_peak, run_sweep, write_peak_json,
                          write_sweep_csv)
from .formulation import (Schedule, WindowProblem, build_window_lp,
                          extract_schedule)
from .lp import (LpSolution, SolverOptions, SparseLp, check_solution,
                 solve_lp, write_lp_format)
from .plant import SimulationFault, apply_day, step_plant
from .prices import (PriceError, PriceSeries, generate_synthetic_prices,
                     ingest_prices, write_prices)

__all__ = [
    "AgingModel",
    "BatteryConfig",
    "ConfigError",
    "EconomicConfig",
    "HorizonConfig",
    "PlantState",
    "SimulationConfig",
    "ThermalConfig",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "save_config",
    "validate_config",
    "compute_c_ag",
    "hypothesized_lambda",
    "npv",
    "profitability_index",
    "AdaptiveLambda",
    "EngineError",
    "LifeResult",
    "StaticLambda",
    "policy_from_config",
    "run_life",
    "DEFAULT_LAMBDAS",
    "MODES",
    "SweepRow",
    "SweepSpec",
    "find_peak",
    "run_sweep",
    "write_peak_json",
    "write_sweep_csv",
    "Schedule",
    "WindowProblem",
    "build_window_lp",
    "extract_schedule",
    "LpSolution",
    "SolverOptions",
    "SparseLp",
    "check_solution",
    "solve_lp",
    "write_lp_format",
    "SimulationFault",
    "apply_day",
    "step_plant",
    "PriceError",
    "PriceSeries",
    "generate_synthetic_prices",
    "ingest_prices",
    "write_prices",
]

__version__ = "0.1.0"
