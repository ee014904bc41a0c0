"""Price series ingestion, generation and serialization.

Prices are stored canonically in EUR/MWh exactly as they appear in CSV
files; the EUR/kWh view used by the dispatch model is derived by dividing
by 1000 on access.  Keeping one canonical array makes
``ingest(write(series))`` reproduce the series bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd


class PriceError(ValueError):
    """Raised for malformed, gappy or otherwise unusable price inputs."""


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Uniformly spaced, non-negative price series.

    ``mwh`` holds the values in EUR/MWh after the absolute-value transform;
    negative market prices never survive ingestion.
    """

    start: str                  # ISO-8601 UTC timestamp of the first step
    step_minutes: int
    mwh: np.ndarray = field(repr=False)

    def __post_init__(self):
        mwh = np.asarray(self.mwh, dtype=float)
        object.__setattr__(self, "mwh", mwh)
        if self.step_minutes <= 0:
            raise PriceError(f"step must be positive, got {self.step_minutes}")
        if mwh.ndim != 1 or len(mwh) == 0:
            raise PriceError("price series must be a non-empty vector")
        if not np.all(np.isfinite(mwh)):
            raise PriceError("price series contains non-finite values")
        if np.any(mwh < 0):
            raise PriceError("price series contains negative values after transform")

    def __len__(self) -> int:
        return len(self.mwh)

    @property
    def values(self) -> np.ndarray:
        """Prices in EUR/kWh, the unit used by the dispatch objective."""
        return self.mwh / 1000.0

    @property
    def dt_hours(self) -> float:
        return self.step_minutes / 60.0


def _parse_timestamps(raw, path):
    try:
        ts = pd.DatetimeIndex(pd.to_datetime(raw, utc=True, format="ISO8601"))
    except (ValueError, TypeError):
        # fall back to per-row parsing so the error names the offender
        parsed = []
        for k, item in enumerate(raw):
            try:
                parsed.append(pd.to_datetime(item, utc=True))
            except (ValueError, TypeError) as exc:
                raise PriceError(f"{path}: malformed timestamp on data row {k}: {item!r}") from exc
        ts = pd.DatetimeIndex(parsed)
    if ts.isna().any():
        k = int(np.argmax(ts.isna()))
        raise PriceError(f"{path}: malformed timestamp on data row {k}")
    return ts


def ingest_prices(path, target_step_minutes: int) -> PriceSeries:
    """Read a `timestamp,price_eur_mwh` CSV into a normalized PriceSeries.

    Negative prices are folded to their absolute value.  The native step is
    inferred from the timestamps; a single missing step is forward-filled,
    anything longer is rejected with the gap named.  Resampling to
    ``target_step_minutes`` repeats values when refining (zero-order hold)
    and takes stepwise means when coarsening.
    """
    try:
        # round_trip: parse floats exactly, so write -> ingest is lossless
        frame = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, OSError) as exc:
        raise PriceError(f"{path}: cannot read CSV: {exc}") from exc
    if list(frame.columns) != ["timestamp", "price_eur_mwh"]:
        raise PriceError(f"{path}: expected header 'timestamp,price_eur_mwh', "
                         f"got {list(frame.columns)}")
    if len(frame) < 2:
        raise PriceError(f"{path}: need at least two rows to infer the step")

    ts = _parse_timestamps(frame["timestamp"], path)
    try:
        prices = frame["price_eur_mwh"].astype(float).to_numpy()
    except ValueError as exc:
        raise PriceError(f"{path}: malformed price value: {exc}") from exc
    if not np.all(np.isfinite(prices)):
        k = int(np.argmax(~np.isfinite(prices)))
        raise PriceError(f"{path}: non-finite price on data row {k}")

    diffs = np.diff(ts.asi8) // 10**9  # seconds
    if np.any(diffs <= 0):
        k = int(np.argmax(diffs <= 0))
        raise PriceError(f"{path}: timestamps not strictly increasing at data row {k + 1}")
    native_s = int(diffs.min())
    if native_s % 60 != 0:
        raise PriceError(f"{path}: native step {native_s} s is not whole minutes")
    if np.any(diffs % native_s != 0):
        k = int(np.argmax(diffs % native_s != 0))
        raise PriceError(f"{path}: irregular timestamp spacing at data row {k + 1}")

    # tolerate a single missing step (forward fill), reject longer gaps
    steps = diffs // native_s
    if np.any(steps > 2):
        k = int(np.argmax(steps > 2))
        raise PriceError(f"{path}: gap of {int(steps[k]) - 1} steps after {ts[k].isoformat()}")
    filled = np.repeat(prices[:-1], steps)
    mwh = np.abs(np.append(filled, prices[-1]))

    native_min = native_s // 60
    target = int(target_step_minutes)
    if target <= 0:
        raise PriceError(f"target step must be positive, got {target}")
    if target < native_min:
        if native_min % target != 0:
            raise PriceError(f"cannot refine {native_min}-minute data to {target} minutes")
        mwh = np.repeat(mwh, native_min // target)
    elif target > native_min:
        if target % native_min != 0:
            raise PriceError(f"cannot coarsen {native_min}-minute data to {target} minutes")
        k = target // native_min
        if len(mwh) % k != 0:
            raise PriceError(f"series length {len(mwh)} is not a multiple of {k} for coarsening")
        mwh = mwh.reshape(-1, k).mean(axis=1)

    return PriceSeries(start=ts[0].isoformat(), step_minutes=target, mwh=mwh)


def write_prices(series: PriceSeries, path) -> None:
    """Write the `timestamp,price_eur_mwh` CSV form of a series.

    Prices are written with shortest round-trip float formatting, so
    ingesting the file reproduces ``series.mwh`` exactly.
    """
    stamps = pd.date_range(start=series.start, periods=len(series),
                           freq=f"{series.step_minutes}min")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp,price_eur_mwh\n")
        for stamp, value in zip(stamps, series.mwh):
            fh.write(f"{stamp.isoformat()},{float(value)!r}\n")


def generate_synthetic_prices(seed: int, days: int, base: float = 100.0,
                              daily_amplitude: float = 40.0,
                              weekly_amplitude: float = 15.0,
                              noise_scale: float = 10.0,
                              step_minutes: int = 15) -> PriceSeries:
    """Deterministic synthetic price year: daily + weekly sinusoids + noise.

    All levels are EUR/MWh.  The default parameters keep the signal well
    above zero, so the non-negativity clamp almost never binds and the
    sample mean stays within a few percent of ``base``.
    """
    for name, value in (("days", days), ("base", base),
                        ("daily_amplitude", daily_amplitude),
                        ("weekly_amplitude", weekly_amplitude),
                        ("noise_scale", noise_scale)):
        if value < 0:
            raise PriceError(f"{name} must be non-negative, got {value}")
    if days == 0:
        raise PriceError("days must be positive")
    steps_per_day = (24 * 60) // step_minutes
    n = int(days) * steps_per_day
    t_hours = np.arange(n) * (step_minutes / 60.0)
    rng = np.random.default_rng(seed)
    mwh = (base
           + daily_amplitude * np.sin(2 * np.pi * t_hours / 24.0)
           + weekly_amplitude * np.sin(2 * np.pi * t_hours / (24.0 * 7.0))
           + noise_scale * rng.standard_normal(n))
    np.maximum(mwh, 0.0, out=mwh)
    return PriceSeries(start="2023-01-01T00:00:00+00:00",
                       step_minutes=step_minutes, mwh=mwh)
