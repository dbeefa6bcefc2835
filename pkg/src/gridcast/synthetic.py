"""Deterministic synthetic load and weather generator.

Stands in for the live TSO/weather feeds at desk scale: a daily load
sinusoid damped on weekends, a U-shaped temperature response around
20 degC, weekday/weekend heteroscedastic noise, and seeded 48-hour
heat-wave windows whose timestamps are exposed in the bundle provenance
so operator flagging can be exercised against known events.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from .datastore import Store
from .errors import ConfigError
from .timeseries import HOUR, DatasetBundle, TimeSeries, format_rfc3339

COMFORT_TEMP_C = 20.0          # heating/cooling degree-day pivot
DAILY_PEAK_PHASE = np.pi       # sin peak lands at 18:00
DEFAULT_ORIGIN = datetime(2021, 1, 1, tzinfo=timezone.utc)
HEAT_WAVE_HOURS = 48
HEAT_WAVE_BUMP_C = 8.0


@dataclass
class SyntheticConfig:
    n_days: int = 120
    base_load: float = 5000.0            # MW
    daily_amplitude: float = 1200.0      # MW
    weekly_weekend_factor: float = 0.85  # damps the daily swing on weekends
    temp_sensitivity: float = 8.0        # MW per degC^2 around the comfort pivot
    noise_sigma_weekday: float = 120.0   # MW
    noise_sigma_weekend: float = 300.0   # MW
    rare_event_count: int = 2
    seed: int = 1

    def validate(self) -> None:
        if self.n_days < 14:
            raise ConfigError("n_days must be >= 14 (two weekly cycles)")
        if self.base_load < 0 or self.daily_amplitude < 0 or self.temp_sensitivity < 0:
            raise ConfigError("amplitudes must be >= 0")
        if self.noise_sigma_weekday < 0 or self.noise_sigma_weekend < 0:
            raise ConfigError("noise sigmas must be >= 0")
        if not 0 < self.weekly_weekend_factor <= 1:
            raise ConfigError("weekly_weekend_factor must be in (0, 1]")
        if self.rare_event_count < 0:
            raise ConfigError("rare_event_count must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be unsigned")


def generate_synthetic(config: SyntheticConfig,
                       origin: datetime = DEFAULT_ORIGIN) -> DatasetBundle:
    """Pure function of the config (seed included): same input, same bits."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    n = config.n_days * 24
    hours = np.arange(n)

    hour_of_day = (origin.hour + hours) % 24
    day_index = (origin.weekday() * 24 + origin.hour + hours) // 24
    day_of_week = day_index % 7
    day_of_year = (origin.timetuple().tm_yday - 1 + (origin.hour + hours) // 24) % 365
    weekend = day_of_week >= 5

    seasonal = 15.0 + 10.0 * np.sin(2 * np.pi * (day_of_year - 105) / 365.25)
    diurnal = 4.0 * np.sin(2 * np.pi * (hour_of_day - 9) / 24)
    temp = seasonal + diurnal + rng.normal(0.0, 1.5, n)

    events: list[tuple[datetime, datetime]] = []
    if config.rare_event_count > 0:
        latest = n - HEAT_WAVE_HOURS
        if latest <= 0:
            raise ConfigError("n_days too small for the requested rare events")
        offsets = rng.choice(latest, size=config.rare_event_count, replace=False)
        for off in sorted(int(o) for o in offsets):
            temp[off:off + HEAT_WAVE_HOURS] += HEAT_WAVE_BUMP_C
            events.append((origin + off * HOUR,
                           origin + (off + HEAT_WAVE_HOURS) * HOUR))

    wind_speed = np.clip(6.0 + 3.0 * np.sin(2 * np.pi * hours / 96)
                         + rng.normal(0.0, 1.5, n), 0.0, None)
    wind_direction = np.mod(180.0 + np.cumsum(rng.normal(0.0, 8.0, n)), 360.0)
    rain_mask = rng.random(n) < 0.1
    precipitation = np.where(rain_mask, rng.gamma(2.0, 1.0, n), 0.0)

    amp_factor = np.where(weekend, config.weekly_weekend_factor, 1.0)
    daily_shape = np.sin(2 * np.pi * hour_of_day / 24 - DAILY_PEAK_PHASE)
    noise_sigma = np.where(weekend, config.noise_sigma_weekend, config.noise_sigma_weekday)
    load = (config.base_load
            + config.daily_amplitude * amp_factor * daily_shape
            + config.temp_sensitivity * np.square(temp - COMFORT_TEMP_C)
            + noise_sigma * rng.normal(0.0, 1.0, n))

    provenance = {
        "config": asdict(config),
        "origin": format_rfc3339(origin),
        "rare_events": [(format_rfc3339(a), format_rfc3339(b)) for a, b in events],
    }
    return DatasetBundle(
        load=TimeSeries("load", origin, load, "MW"),
        covariates={
            "temperature": TimeSeries("temperature", origin, temp, "degC"),
            "wind_speed": TimeSeries("wind_speed", origin, wind_speed, "m/s"),
            "wind_direction": TimeSeries("wind_direction", origin, wind_direction, "deg"),
            "precipitation": TimeSeries("precipitation", origin, precipitation, "mm"),
        },
        calendar_origin=origin,
        provenance=provenance,
    )


def load_bundle_into_store(store: Store, bundle: DatasetBundle, replace: bool = True) -> None:
    store.put_series(bundle.load, replace=replace)
    for series in bundle.covariates.values():
        store.put_series(series, replace=replace)


def bundle_from_store(store: Store, start: datetime, end: datetime) -> DatasetBundle:
    """Reassemble a bundle view over [start, end) from stored series."""
    load = store.query_range("load", start, end)
    covariates = {name: store.query_range(name, start, end)
                  for name in DatasetBundle.COVARIATE_REGISTRY
                  if store.has_series(name)}
    return DatasetBundle(load=load, covariates=covariates, calendar_origin=start)
