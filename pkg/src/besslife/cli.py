"""Command-line surface: simulate, sweep, gen-prices, analyze.

Exit codes: 0 success, 1 input/validation error (including bad flags), 2
runtime failure (solver or simulation breakdown).  All randomness flows
from ``--seed``; repeated runs with identical inputs write byte-identical
artifacts.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .domain import SimulationConfig, load_config
from .engine import EngineError, LifeResult, policy_from_config, run_life
from .experiments import (DEFAULT_LAMBDAS, MODES, SweepSpec, find_peak,
                          run_sweep, write_peak_json, write_sweep_csv)
from .prices import (PriceSeries, generate_synthetic_prices, ingest_prices,
                     write_prices)

DAILY_LOG_HEADER = "day,revenue_eur,q_cal,q_cyc,soh,fec,lambda_used"


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the contract reserves 2 for
    # runtime failures and wants 1 for anything wrong with the invocation
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def default_config() -> SimulationConfig:
    """The bundled baseline plant (15-minute steps, 7-day window)."""
    ref = resources.files("besslife").joinpath("data/default_config.json")
    with resources.as_file(ref) as path:
        return load_config(path)


def write_daily_log(result: LifeResult, path) -> None:
    """Fixed-schema per-day CSV; floats use shortest round-trip form."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(DAILY_LOG_HEADER + "\n")
        for i in range(result.days):
            fh.write(f"{int(result.day[i])},{float(result.revenue_eur[i])!r},"
                     f"{float(result.q_cal[i])!r},{float(result.q_cyc[i])!r},"
                     f"{float(result.soh[i])!r},{float(result.fec[i])!r},"
                     f"{float(result.lambda_used[i])!r}\n")


def write_summary(summary: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({k: float(v) for k, v in summary.items()}, fh,
                  indent=2, sort_keys=True)
        fh.write("\n")


def read_daily_log(path):
    """Daily-log CSV back into per-column float arrays (day as int)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != DAILY_LOG_HEADER:
            raise ValueError(f"{path}: expected header '{DAILY_LOG_HEADER}', "
                             f"got '{header}'")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    cols = DAILY_LOG_HEADER.split(",")
    if any(len(r) != len(cols) for r in rows):
        raise ValueError(f"{path}: malformed row (expected {len(cols)} fields)")
    table = {name: np.array([float(r[j]) for r in rows])
             for j, name in enumerate(cols)}
    table["day"] = table["day"].astype(np.int64)
    return table


def _load_cfg(args) -> SimulationConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return default_config()


def _load_prices(args, cfg: SimulationConfig) -> PriceSeries:
    step = int(round(cfg.horizon.dt_hours * 60))
    if getattr(args, "prices", None):
        return ingest_prices(args.prices, target_step_minutes=step)
    return generate_synthetic_prices(seed=args.seed, days=args.days,
                                     step_minutes=step)


def _add_input_flags(sub, with_prices=True):
    sub.add_argument("--config", help="config JSON (default: bundled baseline)")
    if with_prices:
        sub.add_argument("--prices", help="price CSV 'timestamp,price_eur_mwh' "
                                          "(default: synthetic from --seed)")
        sub.add_argument("--seed", type=int, default=0,
                         help="seed for the synthetic price fallback")
        sub.add_argument("--days", type=int, default=365,
                         help="synthetic price series length [days]")


def _cmd_simulate(args) -> int:
    cfg = _load_cfg(args)
    eco = cfg.economic
    if args.lambda_cyc is not None:
        eco = dataclasses.replace(eco, lambda_cyc=args.lambda_cyc)
    if args.lambda_cal is not None:
        eco = dataclasses.replace(eco, lambda_cal=args.lambda_cal)
    if args.adaptive:
        eco = dataclasses.replace(eco, adaptive=True)
    cfg = dataclasses.replace(cfg, economic=eco)
    if args.window_days is not None:
        cfg = dataclasses.replace(
            cfg, horizon=dataclasses.replace(cfg.horizon,
                                             window_days=args.window_days))
    prices = _load_prices(args, cfg)
    result = run_life(cfg, prices, policy=policy_from_config(cfg),
                      initial_fill=args.initial_fill)
    summary = result.summary(cfg.battery.c_battery, eco.interest_rate)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_daily_log(result, out_dir / "daily_log.csv")
    write_summary(summary, out_dir / "summary.json")
    print(json.dumps({k: float(v) for k, v in summary.items()},
                     indent=2, sort_keys=True))
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_cfg(args)
    prices = _load_prices(args, cfg)
    lambdas = tuple(float(v) for v in args.lambdas.split(",")) \
        if args.lambdas else DEFAULT_LAMBDAS
    rates = tuple(float(v) for v in args.rates.split(","))
    spec = SweepSpec(mode=args.mode, lambda_values=lambdas,
                     interest_rates=rates)
    rows = run_sweep(spec, cfg, prices, initial_fill=args.initial_fill)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, out_dir / "sweep.csv")
    failed = [r for r in rows if not r.ok]
    if len(failed) == len(rows):
        raise EngineError(f"all {len(rows)} sweep points failed; "
                          f"see {out_dir / 'sweep.csv'}")
    peak = find_peak(rows, interest_rate=rates[0])
    write_peak_json(peak, out_dir / "peak.json")
    print(f"swept {len(rows)} rows ({len(failed)} failed); "
          f"peak npv {peak.npv_eur!r} EUR at lambda_cyc={peak.lambda_cyc!r}, "
          f"lambda_cal={peak.lambda_cal!r} (i={peak.interest_rate!r})")
    return 0


def _cmd_gen_prices(args) -> int:
    series = generate_synthetic_prices(
        seed=args.seed, days=args.days, base=args.base,
        daily_amplitude=args.daily_amplitude,
        weekly_amplitude=args.weekly_amplitude,
        noise_scale=args.noise_scale, step_minutes=args.step_minutes)
    write_prices(series, args.out)
    print(f"wrote {len(series)} steps ({args.days} days at "
          f"{args.step_minutes} min) to {args.out}")
    return 0


def _cmd_analyze(args) -> int:
    cfg = _load_cfg(args)
    log = read_daily_log(args.log)
    days = log["day"]
    yearly = np.zeros(int(days[-1]) // 365 + 1)
    np.add.at(yearly, days // 365, log["revenue_eur"])
    periods = np.arange(1, yearly.size + 1)
    value = float(np.sum(yearly / (1.0 + args.rate) ** periods))
    total_cal = float(log["q_cal"].sum())
    total_cyc = float(log["q_cyc"].sum())
    total_fade = total_cal + total_cyc
    # one log row per committed block; the stride recovers days per block
    stride = int(days[1] - days[0]) if len(days) > 1 else 1
    report = {
        "t_eol_years": (int(days[-1]) + stride) / 365.25,
        "npv_eur": value,
        "pi": value / cfg.battery.c_battery,
        "npv_eur_per_kwh_cap": value / cfg.battery.e_nom,
        "total_fec": float(log["fec"][-1]),
        "q_cal_share": total_cal / total_fade if total_fade > 0 else 0.0,
        "interest_rate": args.rate,
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="besslife",
                     description="Battery arbitrage life-cycle simulator")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run one plant to end of life")
    _add_input_flags(sim)
    sim.add_argument("--lambda-cyc", type=float, default=None,
                     help="override cycle-aging weight")
    sim.add_argument("--lambda-cal", type=float, default=None,
                     help="override calendar-aging weight")
    sim.add_argument("--adaptive", action="store_true",
                     help="estimate lambda online instead of fixed weights")
    sim.add_argument("--window-days", type=int, default=None,
                     help="override the look-ahead window length")
    sim.add_argument("--initial-fill", type=float, default=0.5,
                     help="initial stored-energy fraction of usable capacity")
    sim.add_argument("--out-dir", default="besslife-out",
                     help="directory for daily_log.csv and summary.json")
    sim.set_defaults(func=_cmd_simulate)

    sw = sub.add_parser("sweep", help="sweep aging weights over a grid")
    _add_input_flags(sw)
    sw.add_argument("--mode", choices=MODES, default="both")
    sw.add_argument("--lambdas", default=None,
                    help="comma-separated ascending weights "
                         "(default: 0.25..64, powers of two)")
    sw.add_argument("--rates", default="0",
                    help="comma-separated annual interest rates")
    sw.add_argument("--initial-fill", type=float, default=0.5)
    sw.add_argument("--out-dir", default="besslife-sweep",
                    help="directory for sweep.csv and peak.json")
    sw.set_defaults(func=_cmd_sweep)

    gen = sub.add_parser("gen-prices", help="write a synthetic price CSV")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--days", type=int, default=365)
    gen.add_argument("--out", default="prices.csv")
    gen.add_argument("--base", type=float, default=100.0,
                     help="mean price level [EUR/MWh]")
    gen.add_argument("--daily-amplitude", type=float, default=40.0)
    gen.add_argument("--weekly-amplitude", type=float, default=15.0)
    gen.add_argument("--noise-scale", type=float, default=10.0)
    gen.add_argument("--step-minutes", type=int, default=15)
    gen.set_defaults(func=_cmd_gen_prices)

    an = sub.add_parser("analyze",
                        help="recompute economics from a daily log")
    an.add_argument("--log", required=True, help="daily_log.csv from simulate")
    an.add_argument("--rate", type=float, default=0.0,
                    help="annual interest rate for discounting")
    an.add_argument("--config", help="config JSON supplying c_battery and "
                                     "e_nom (default: bundled baseline)")
    an.set_defaults(func=_cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:        # --help exits 0, usage errors exit 1
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
