"""MinMax scaling, calendar encodings and training-window construction."""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta
from zoneinfo import ZoneInfo

import numpy as np

from .errors import EmptyData, InsufficientData, ShapeError
from .timeseries import HOUR, DatasetBundle, ensure_utc

CALENDAR_FEATURES = ("hour_sin", "hour_cos", "dow_sin", "dow_cos", "month_sin", "month_cos")


@dataclass
class ScalerParams:
    """Per-feature train-split min/max; constant features get a degenerate flag."""

    feature_names: list[str]
    mins: np.ndarray
    maxs: np.ndarray
    degenerate: list[bool] = field(default_factory=list)

    def __post_init__(self):
        self.mins = np.asarray(self.mins, dtype=np.float64)
        self.maxs = np.asarray(self.maxs, dtype=np.float64)
        if not self.degenerate:
            self.degenerate = [mx <= mn for mn, mx in zip(self.mins, self.maxs)]

    def _index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise ShapeError(f"scaler has no feature {name!r}") from None

    def span(self, name: str) -> float:
        """Max minus min; 1.0 for degenerate features so inversion stays defined."""
        i = self._index(name)
        return float(self.maxs[i] - self.mins[i]) if not self.degenerate[i] else 1.0

    def transform_feature(self, name: str, values: np.ndarray) -> np.ndarray:
        i = self._index(name)
        if self.degenerate[i]:
            return np.zeros_like(np.asarray(values, dtype=np.float64))
        return (np.asarray(values, dtype=np.float64) - self.mins[i]) / (self.maxs[i] - self.mins[i])

    def inverse_feature(self, name: str, scaled: np.ndarray) -> np.ndarray:
        i = self._index(name)
        return np.asarray(scaled, dtype=np.float64) * self.span(name) + self.mins[i]


def fit_scaler(matrix: np.ndarray, feature_names: list[str]) -> ScalerParams:
    """Fit per-column min/max. Train min maps to 0, train max to 1, no clipping."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.size == 0:
        raise EmptyData("cannot fit a scaler on empty data")
    if matrix.ndim != 2 or matrix.shape[1] != len(feature_names):
        raise ShapeError(f"expected [N x {len(feature_names)}] matrix, got {matrix.shape}")
    return ScalerParams(
        feature_names=list(feature_names),
        mins=matrix.min(axis=0),
        maxs=matrix.max(axis=0),
    )


def calendar_features(start: datetime, count: int,
                      step: timedelta = HOUR, tz: str = "UTC") -> np.ndarray:
    """[count x 6] sin/cos of hour-of-day, day-of-week and month."""
    zone = ZoneInfo(tz)
    start = ensure_utc(start)
    out = np.empty((count, 6))
    for i in range(count):
        local = (start + i * step).astimezone(zone)
        hour = local.hour + local.minute / 60.0
        dow = local.weekday()
        month = local.month - 1
        out[i, 0] = np.sin(2 * np.pi * hour / 24)
        out[i, 1] = np.cos(2 * np.pi * hour / 24)
        out[i, 2] = np.sin(2 * np.pi * dow / 7)
        out[i, 3] = np.cos(2 * np.pi * dow / 7)
        out[i, 4] = np.sin(2 * np.pi * month / 12)
        out[i, 5] = np.cos(2 * np.pi * month / 12)
    return out


@dataclass
class WindowSample:
    """One training sample: 168h encoder context, 24h decoder day, scaled target."""

    encoder_inputs: np.ndarray   # [history x F_enc]
    decoder_inputs: np.ndarray   # [horizon x F_dec]
    target: np.ndarray           # [horizon] scaled load
    day_start: datetime          # first hour of the target day
    weight: float = 1.0

    def __post_init__(self):
        if (np.isnan(self.encoder_inputs).any() or np.isnan(self.decoder_inputs).any()
                or np.isnan(self.target).any()):
            raise ShapeError("window contains NaN")


@dataclass
class Split:
    """Contiguous day-index ranges [lo, hi) into a bundle, whole days only."""

    train: tuple[int, int]
    val: tuple[int, int]
    test: tuple[int, int] = (0, 0)


def chronological_split(n_days: int, history_days: int,
                        test_days: int = 0, val_fraction: float = 0.1) -> Split:
    """Last `val_fraction` of the training span becomes validation.

    The validation range is floored so that at least a few whole windows
    (history + 3 days) fit inside it.
    """
    span = n_days - test_days
    val_days = max(history_days + 3, int(round(val_fraction * span)))
    if span - val_days < history_days + 1:
        raise InsufficientData(
            f"{n_days} days cannot host train/val/test with {history_days}-day history")
    return Split(train=(0, span - val_days), val=(span - val_days, span),
                 test=(span, n_days))


def assemble_features(bundle: DatasetBundle, scaler: ScalerParams, tz: str = "UTC"
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Scaled (encoder matrix, decoder matrix, target vector) for the whole bundle.

    Encoder columns: scaled load, scaled covariates, calendar.
    Decoder columns: scaled covariates (weather treated as a perfect
    forecast), calendar. Callers choosing calendar-only decoding slice
    the covariate columns away.
    """
    n = len(bundle)
    load_scaled = scaler.transform_feature("load", bundle.load.values)
    cov_names = [name for name in scaler.feature_names if name != "load"]
    missing = [name for name in cov_names if name not in bundle.covariates]
    if missing:
        raise ShapeError(f"bundle lacks covariates the scaler was fitted on: {missing}")
    cov_cols = [scaler.transform_feature(name, bundle.covariates[name].values)
                for name in cov_names]
    cal = calendar_features(bundle.load.start, n, bundle.load.step, tz)
    cov = np.column_stack(cov_cols) if cov_cols else np.empty((n, 0))
    enc = np.column_stack([load_scaled[:, None], cov, cal])
    dec = np.column_stack([cov, cal])
    return enc, dec, load_scaled


def make_windows(bundle: DatasetBundle, history: int, horizon: int, split: Split,
                 scaler: ScalerParams | None = None, use_future_weather: bool = True,
                 tz: str = "UTC", stride_hours: int = 24
                 ) -> tuple[dict[str, list[WindowSample]], ScalerParams]:
    """Sliding windows per split; windows straddling split boundaries are dropped.

    Default stride is 24h (one sample per forecast day); a smaller stride
    densifies training at desk scale. The scaler is fitted on the
    train-split rows unless one is supplied.
    """
    if history % 24 or horizon != 24:
        raise ShapeError("history must be whole days and horizon 24 hours")
    if stride_hours <= 0:
        raise ShapeError("stride_hours must be positive")
    n_days = len(bundle) // 24
    if len(bundle) % 24:
        raise ShapeError("bundle length must be whole days")
    history_days = history // 24
    if n_days < history_days + 1:
        raise InsufficientData(
            f"need at least {history_days + 1} days, have {n_days}")

    feature_names = ["load"] + [name for name in DatasetBundle.COVARIATE_REGISTRY
                                if name in bundle.covariates]
    if scaler is None:
        lo, hi = split.train
        if hi <= lo:
            raise InsufficientData("empty train split")
        rows = np.column_stack(
            [bundle.load.values[lo * 24:hi * 24]]
            + [bundle.covariates[name].values[lo * 24:hi * 24]
               for name in feature_names[1:]])
        scaler = fit_scaler(rows, feature_names)

    enc_all, dec_all, target_all = assemble_features(bundle, scaler, tz)
    if not use_future_weather:
        n_cov = len(feature_names) - 1
        dec_all = dec_all[:, n_cov:]

    out: dict[str, list[WindowSample]] = {}
    for name in ("train", "val", "test"):
        lo, hi = getattr(split, name)
        samples = []
        for t0 in range(lo * 24 + history, hi * 24 - horizon + 1, stride_hours):
            samples.append(WindowSample(
                encoder_inputs=enc_all[t0 - history:t0].copy(),
                decoder_inputs=dec_all[t0:t0 + horizon].copy(),
                target=target_all[t0:t0 + horizon].copy(),
                day_start=bundle.load.timestamp_at(t0),
            ))
        out[name] = samples
    return out, scaler


def windows_for_days(bundle: DatasetBundle, history: int, horizon: int,
                     scaler: ScalerParams, days: list[datetime],
                     use_future_weather: bool = True, tz: str = "UTC"
                     ) -> list[WindowSample]:
    """Windows targeting specific day starts; each needs `history` hours before it."""
    enc_all, dec_all, target_all = assemble_features(bundle, scaler, tz)
    if not use_future_weather:
        n_cov = len(scaler.feature_names) - 1
        dec_all = dec_all[:, n_cov:]
    samples = []
    for day_start in days:
        t0 = bundle.load.index_of(ensure_utc(day_start))
        if t0 < history or t0 + horizon > len(bundle):
            raise InsufficientData(
                f"day {day_start.isoformat()} lacks full history or horizon in bundle")
        samples.append(WindowSample(
            encoder_inputs=enc_all[t0 - history:t0].copy(),
            decoder_inputs=dec_all[t0:t0 + horizon].copy(),
            target=target_all[t0:t0 + horizon].copy(),
            day_start=bundle.load.timestamp_at(t0),
        ))
    return samples
