"""Configuration and state types shared by the dispatch, plant and life-cycle code.

All capacity fade quantities are fractions of nominal capacity (0.20 = typical
end of life), never percent.  Aging plane coefficients are fade fractions per
timestep of the configured step size, so a config file is only meaningful
together with its own ``horizon.dt_hours``.  Temperatures are degrees Celsius
throughout; the model only ever uses temperature differences.
"""

from __future__ import annotations

import json
from dataclasses import MISSING, dataclass, fields
from itertools import combinations
from pathlib import Path

import numpy as np

VALID_FEC_THROUGHPUT = ("total", "discharge_only")


class ConfigError(ValueError):
    """Raised when a configuration violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {v}" for v in self.violations))


@dataclass(frozen=True)
class BatteryConfig:
    """Physical and economic battery parameters."""

    e_nom: float                 # nominal beginning-of-life capacity [kWh]
    c_rate_max_chg: float        # max charge C-rate [1/h]
    c_rate_max_dis: float        # max discharge C-rate [1/h]
    eta_chg: float               # charge efficiency (0, 1]
    eta_dis: float               # discharge efficiency (0, 1]
    c_battery: float             # initial investment cost [EUR]
    q_eol: float = 0.20          # fractional capacity loss at end of life
    soh_initial: float = 1.0     # initial state of health [fraction]

    @property
    def p_max_chg(self) -> float:
        return self.e_nom * self.c_rate_max_chg

    @property
    def p_max_dis(self) -> float:
        return self.e_nom * self.c_rate_max_dis


@dataclass(frozen=True)
class ThermalConfig:
    """Lumped first-order thermal model constants."""

    k_t: float          # thermal gain on the temperature update
    alpha_t: float      # ambient coupling coefficient [1/h]
    beta_chg: float     # heat generation per unit charge power [degC kWh / (h kW)]
    beta_dis: float     # heat generation per unit discharge power
    t_amb: float        # ambient temperature [degC]
    t_initial: float    # battery temperature at start of life [degC]


@dataclass(frozen=True)
class AgingModel:
    """Decoupled calendar and cycle aging model.

    ``k_cyc_dis`` is a linear fade coefficient per full equivalent cycle.
    ``cyc_chg_planes`` are (intercept, slope vs charge C-rate) pairs and
    ``cal_planes`` are (intercept, slope vs average SOC, slope vs average
    temperature) triples; each set is read as the pointwise maximum of its
    planes, which keeps the per-step fade convex in the decision variables.
    Coefficients are fade fractions per timestep.

    ``fec_throughput`` selects which throughput the linear coefficient
    multiplies: "total" (charge plus discharge, the default) or
    "discharge_only".
    """

    k_cyc_dis: float
    cyc_chg_planes: tuple[tuple[float, float], ...]
    cal_planes: tuple[tuple[float, float, float], ...]
    fec_throughput: str = "total"

    def cyc_chg_fade(self, c_rate):
        """Charge-rate cycle fade per step: max over planes of a + b * c_rate."""
        planes = self.cyc_chg_planes
        out = planes[0][0] + planes[0][1] * c_rate
        for a, b in planes[1:]:
            out = np.maximum(out, a + b * c_rate)
        return out

    def cal_fade(self, soc_avg, t_avg):
        """Calendar fade per step: max over planes of a + b * SOC + c * T."""
        planes = self.cal_planes
        out = planes[0][0] + planes[0][1] * soc_avg + planes[0][2] * t_avg
        for a, b, c in planes[1:]:
            out = np.maximum(out, a + b * soc_avg + c * t_avg)
        return out


@dataclass(frozen=True)
class EconomicConfig:
    """Aging-cost weights and money-related settings."""

    lambda_cyc: float = 1.0
    lambda_cal: float = 1.0
    interest_rate: float = 0.0          # annual [fraction/yr]
    adaptive: bool = False              # use the moving-average lambda estimator
    adaptive_window_days: int = 365     # estimator window length [days]


@dataclass(frozen=True)
class HorizonConfig:
    """Rolling-horizon discretization."""

    dt_hours: float = 0.25
    window_days: int = 7
    commit_days: int = 1

    @property
    def steps_per_day(self) -> int:
        return round(24.0 / self.dt_hours)

    @property
    def window_steps(self) -> int:
        return self.window_days * self.steps_per_day

    @property
    def commit_steps(self) -> int:
        return self.commit_days * self.steps_per_day


@dataclass(frozen=True)
class SimulationConfig:
    """Full configuration: one section per concern."""

    battery: BatteryConfig
    thermal: ThermalConfig
    aging: AgingModel
    economic: EconomicConfig
    horizon: HorizonConfig


@dataclass
class PlantState:
    """Mutable life state of the plant; owned by exactly one simulation run."""

    e_batt: float               # stored energy [kWh]
    soh: float                  # state of health [fraction]
    temp: float                 # battery temperature [degC]
    fec_total: float = 0.0      # cumulative full equivalent cycles
    q_cal_total: float = 0.0    # cumulative calendar fade [fraction]
    q_cyc_total: float = 0.0    # cumulative cycle fade [fraction]
    day_index: int = 0          # elapsed committed days

    def copy(self) -> "PlantState":
        return PlantState(self.e_batt, self.soh, self.temp, self.fec_total,
                          self.q_cal_total, self.q_cyc_total, self.day_index)


def soh_at_eol(battery: BatteryConfig) -> float:
    """State-of-health threshold at which the plant is retired."""
    return battery.soh_initial - battery.q_eol


# --- validation ---------------------------------------------------------


def _envelope_min_1d(planes, lo, hi):
    """Exact minimum over [lo, hi] of max_i(a_i + b_i * x).

    The minimum of a convex piecewise-linear function on an interval sits at
    an endpoint or at a kink, and every kink is an intersection of two planes.
    """
    candidates = [lo, hi]
    for (a1, b1), (a2, b2) in combinations(planes, 2):
        if b1 != b2:
            x = (a2 - a1) / (b1 - b2)
            if lo < x < hi:
                candidates.append(x)
    env = lambda x: max(a + b * x for a, b in planes)
    best = min(candidates, key=env)
    return env(best), best


def _envelope_min_2d(planes, x_lo, x_hi, y_lo, y_hi):
    """Exact minimum over a box of max_i(a_i + b_i * x + c_i * y).

    Candidate minimizers of a convex piecewise-affine envelope on a rectangle:
    box corners, intersections of plane-pair lines with box edges, and triple
    points of planes inside the box.
    """
    pts = [(x_lo, y_lo), (x_lo, y_hi), (x_hi, y_lo), (x_hi, y_hi)]
    # plane-pair intersection lines, restricted to each box edge
    for (a1, b1, c1), (a2, b2, c2) in combinations(planes, 2):
        da, db, dc = a1 - a2, b1 - b2, c1 - c2
        # along y = const edges: db * x = -(da + dc * y)
        for y in (y_lo, y_hi):
            if db != 0.0:
                x = -(da + dc * y) / db
                if x_lo < x < x_hi:
                    pts.append((x, y))
        for x in (x_lo, x_hi):
            if dc != 0.0:
                y = -(da + db * x) / dc
                if y_lo < y < y_hi:
                    pts.append((x, y))
    # triple points
    for (a1, b1, c1), (a2, b2, c2), (a3, b3, c3) in combinations(planes, 3):
        m = np.array([[b1 - b2, c1 - c2], [b1 - b3, c1 - c3]])
        rhs = np.array([a2 - a1, a3 - a1])
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det) > 1e-30:
            x, y = np.linalg.solve(m, rhs)
            if x_lo < x < x_hi and y_lo < y < y_hi:
                pts.append((float(x), float(y)))
    env = lambda p: max(a + b * p[0] + c * p[1] for a, b, c in planes)
    best = min(pts, key=env)
    return env(best), best


def config_violations(cfg: SimulationConfig) -> list[str]:
    """Check every invariant; returns a human-readable list (empty if valid)."""
    v = []
    b, th, ag, ec, hz = cfg.battery, cfg.thermal, cfg.aging, cfg.economic, cfg.horizon

    if not b.e_nom > 0:
        v.append(f"battery.e_nom must be > 0, got {b.e_nom}")
    for name in ("c_rate_max_chg", "c_rate_max_dis"):
        if not getattr(b, name) > 0:
            v.append(f"battery.{name} must be > 0, got {getattr(b, name)}")
    for name in ("eta_chg", "eta_dis"):
        eta = getattr(b, name)
        if not 0.0 < eta <= 1.0:
            v.append(f"battery.{name}: efficiency out of (0,1], got {eta}")
    if b.c_battery < 0:
        v.append(f"battery.c_battery must be >= 0, got {b.c_battery}")
    if not 0.0 < b.q_eol < 1.0:
        v.append(f"battery.q_eol must be in (0,1), got {b.q_eol}")
    if not 0.0 < b.soh_initial <= 1.0:
        v.append(f"battery.soh_initial must be in (0,1], got {b.soh_initial}")

    for name in ("k_t", "alpha_t", "beta_chg", "beta_dis"):
        if getattr(th, name) < 0:
            v.append(f"thermal.{name} must be >= 0, got {getattr(th, name)}")

    if hz.dt_hours <= 0:
        v.append(f"horizon.dt_hours must be > 0, got {hz.dt_hours}")
    else:
        if abs(24.0 / hz.dt_hours - round(24.0 / hz.dt_hours)) > 1e-9:
            v.append(f"horizon.dt_hours must divide 24 evenly, got {hz.dt_hours}")
        if th.k_t * th.alpha_t * hz.dt_hours > 2.0:
            v.append("thermal recursion unstable: k_t * alpha_t * dt_hours > 2")
    if not (isinstance(hz.window_days, int) and isinstance(hz.commit_days, int)):
        v.append("horizon.window_days and commit_days must be integers")
    elif not hz.window_days >= hz.commit_days >= 1:
        v.append(f"horizon must satisfy window_days >= commit_days >= 1, "
                 f"got {hz.window_days} / {hz.commit_days}")

    if ag.k_cyc_dis < 0:
        v.append(f"aging.k_cyc_dis must be >= 0, got {ag.k_cyc_dis}")
    if ag.fec_throughput not in VALID_FEC_THROUGHPUT:
        v.append(f"aging.fec_throughput must be one of {VALID_FEC_THROUGHPUT}, "
                 f"got {ag.fec_throughput!r}")
    for name, planes in (("cyc_chg_planes", ag.cyc_chg_planes), ("cal_planes", ag.cal_planes)):
        if len(planes) == 0:
            v.append(f"aging.{name}: plane set empty")
        elif not all(np.isfinite(x) for p in planes for x in p):
            v.append(f"aging.{name}: non-finite coefficient")
    # aging never heals: envelope must be non-negative on the admissible box
    if ag.cyc_chg_planes and b.c_rate_max_chg > 0 and \
            all(np.isfinite(x) for p in ag.cyc_chg_planes for x in p):
        env_min, at = _envelope_min_1d(ag.cyc_chg_planes, 0.0, b.c_rate_max_chg)
        if env_min < 0:
            v.append(f"aging.cyc_chg_planes: envelope negative ({env_min:.3e}) "
                     f"at C-rate {at:.4g}")
    if ag.cal_planes and all(np.isfinite(x) for p in ag.cal_planes for x in p):
        env_min, at = _envelope_min_2d(ag.cal_planes, 0.0, 1.0,
                                       th.t_amb - 20.0, th.t_amb + 40.0)
        if env_min < 0:
            v.append(f"aging.cal_planes: envelope negative ({env_min:.3e}) "
                     f"at (SOC={at[0]:.4g}, T={at[1]:.4g})")

    for name in ("lambda_cyc", "lambda_cal"):
        if getattr(ec, name) < 0:
            v.append(f"economic.{name} must be >= 0, got {getattr(ec, name)}")
    if ec.interest_rate < 0:
        v.append(f"economic.interest_rate must be >= 0, got {ec.interest_rate}")
    if ec.adaptive_window_days < 1:
        v.append(f"economic.adaptive_window_days must be >= 1, got {ec.adaptive_window_days}")

    return v


def validate_config(cfg: SimulationConfig) -> SimulationConfig:
    """Return the configuration unchanged if valid, else raise ConfigError."""
    violations = config_violations(cfg)
    if violations:
        raise ConfigError(violations)
    return cfg


# --- JSON (de)serialization ---------------------------------------------

_SECTIONS = {
    "battery": BatteryConfig,
    "thermal": ThermalConfig,
    "aging": AgingModel,
    "economic": EconomicConfig,
    "horizon": HorizonConfig,
}

_INT_FIELDS = {"window_days", "commit_days", "adaptive_window_days"}
_BOOL_FIELDS = {"adaptive"}
_STR_FIELDS = {"fec_throughput"}
_PLANE_FIELDS = {"cyc_chg_planes": 2, "cal_planes": 3}


def _section_from_dict(cls, name, data, errors):
    kwargs = {}
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            errors.append(f"{name}: unknown key {key!r}")
    for f in fields(cls):
        if f.name not in data:
            continue
        raw = data[f.name]
        try:
            if f.name in _PLANE_FIELDS:
                width = _PLANE_FIELDS[f.name]
                planes = []
                for p in raw:
                    if len(p) != width:
                        raise ValueError(f"plane must have {width} coefficients")
                    planes.append(tuple(float(x) for x in p))
                kwargs[f.name] = tuple(planes)
            elif f.name in _INT_FIELDS:
                kwargs[f.name] = int(raw)
            elif f.name in _BOOL_FIELDS:
                if not isinstance(raw, bool):
                    raise ValueError("expected true/false")
                kwargs[f.name] = raw
            elif f.name in _STR_FIELDS:
                kwargs[f.name] = str(raw)
            else:
                kwargs[f.name] = float(raw)
        except (TypeError, ValueError) as exc:
            errors.append(f"{name}.{f.name}: {exc}")
    required = [f.name for f in fields(cls) if f.default is MISSING]
    missing = [n for n in required if n not in kwargs]
    if missing:
        errors.append(f"{name}: missing required key(s) {missing}")
        return None
    try:
        return cls(**kwargs)
    except TypeError as exc:
        errors.append(f"{name}: {exc}")
        return None


def config_from_dict(data: dict) -> SimulationConfig:
    """Build and validate a SimulationConfig from a parsed JSON document."""
    errors = []
    if not isinstance(data, dict):
        raise ConfigError(["top level must be a JSON object"])
    for key in data:
        if key not in _SECTIONS:
            errors.append(f"unknown section {key!r}")
    sections = {}
    for name, cls in _SECTIONS.items():
        if name not in data:
            errors.append(f"missing section {name!r}")
            continue
        sec = _section_from_dict(cls, name, data[name], errors)
        if sec is not None:
            sections[name] = sec
    if errors:
        raise ConfigError(errors)
    cfg = SimulationConfig(**sections)
    return validate_config(cfg)


def config_to_dict(cfg: SimulationConfig) -> dict:
    out = {}
    for name in _SECTIONS:
        sec = getattr(cfg, name)
        sec_out = {}
        for f in fields(sec):
            val = getattr(sec, f.name)
            if f.name in _PLANE_FIELDS:
                val = [list(p) for p in val]
            sec_out[f.name] = val
        out[name] = sec_out
    return out


def dumps_config(cfg: SimulationConfig) -> str:
    """Canonical JSON text; serialize -> parse -> serialize is byte-identical."""
    return json.dumps(config_to_dict(cfg), sort_keys=True, indent=2) + "\n"


def load_config(path) -> SimulationConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"malformed JSON in {path}: {exc}"]) from exc
    return config_from_dict(data)


def save_config(cfg: SimulationConfig, path) -> None:
    Path(path).write_text(dumps_config(cfg), encoding="utf-8")
