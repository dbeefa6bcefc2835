"""Point and probabilistic forecast scores: MSE/RMSE/MAE, PICP, sharpness, pinball.

All functions are pure; PICP is reported in percent and sharpness in the
unit of the interval bounds, with the unit carried on the report so both
scaled and MW conventions stay unambiguous.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .forecaster import ForecastRecord


def _vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ShapeError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


@dataclass
class IntervalSet:
    """N interval pairs at one two-sided level."""

    lower: np.ndarray
    upper: np.ndarray
    level: float

    def __post_init__(self):
        self.lower = _vector(self.lower, "lower")
        self.upper = _vector(self.upper, "upper")
        if self.lower.shape != self.upper.shape:
            raise ShapeError("lower and upper must have equal length")
        if np.any(self.upper < self.lower):
            raise DomainError("intervals require upper >= lower")
        if not 0 < self.level < 1:
            raise DomainError(f"interval level must lie in (0, 1), got {self.level}")

    def __len__(self):
        return self.lower.size

    @classmethod
    def from_records(cls, records: list[ForecastRecord]) -> "IntervalSet":
        if not records:
            raise ShapeError("no forecast records given")
        levels = {r.level for r in records}
        if len(levels) > 1:
            raise DomainError(f"records mix interval levels {sorted(levels)}")
        return cls(np.concatenate([r.lower for r in records]),
                   np.concatenate([r.upper for r in records]),
                   records[0].level)


def point_metrics(actuals, predictions) -> tuple[float, float, float]:
    """(mse, rmse, mae) under the standard definitions."""
    y = _vector(actuals, "actuals")
    p = _vector(predictions, "predictions")
    if y.shape != p.shape:
        raise ShapeError(f"length mismatch: {y.size} actuals vs {p.size} predictions")
    err = y - p
    mse = float(np.mean(err ** 2))
    return mse, float(np.sqrt(mse)), float(np.mean(np.abs(err)))


def picp(actuals, intervals: IntervalSet) -> float:
    """Percent of actuals inside their intervals; bounds count as covered."""
    y = _vector(actuals, "actuals")
    if y.size != len(intervals):
        raise ShapeError(f"{y.size} actuals vs {len(intervals)} intervals")
    covered = (intervals.lower <= y) & (y <= intervals.upper)
    return float(100.0 * covered.mean())


def sharpness(intervals: IntervalSet) -> float:
    """Mean interval width in the unit of the bounds."""
    return float(np.mean(intervals.upper - intervals.lower))


def pinball(actuals, quantile_forecasts, tau) -> float:
    """Mean quantile loss; tau may be a scalar or per-forecast vector."""
    y = _vector(actuals, "actuals")
    q = _vector(quantile_forecasts, "quantile_forecasts")
    if y.shape != q.shape:
        raise ShapeError(f"length mismatch: {y.size} actuals vs {q.size} forecasts")
    t = np.broadcast_to(np.asarray(tau, dtype=np.float64), y.shape)
    if np.any(t <= 0) or np.any(t >= 1):
        raise DomainError("pinball levels must lie in (0, 1)")
    diff = y - q
    return float(np.mean(np.where(diff >= 0, t * diff, (t - 1) * diff)))


@dataclass
class MetricsReport:
    """Flat score block for one model evaluated over one span."""

    mse: float
    rmse: float
    mae: float
    picp: float
    sharpness: float
    pinball: float | None
    sample_count: int
    unit: str = "MW"
    level: float = 0.95

    CSV_HEADER = "mse,rmse,mae,picp,sharpness,pinball,sample_count,unit,level"

    def __post_init__(self):
        for name in ("mse", "rmse", "mae", "picp", "sharpness", "level"):
            setattr(self, name, float(getattr(self, name)))
        if self.pinball is not None:
            self.pinball = float(self.pinball)
        self.sample_count = int(self.sample_count)

    def to_dict(self) -> dict:
        return {
            "mse": self.mse, "rmse": self.rmse, "mae": self.mae,
            "picp": self.picp, "sharpness": self.sharpness,
            "pinball": self.pinball, "sample_count": self.sample_count,
            "unit": self.unit, "level": self.level,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricsReport":
        return cls(mse=float(doc["mse"]), rmse=float(doc["rmse"]),
                   mae=float(doc["mae"]), picp=float(doc["picp"]),
                   sharpness=float(doc["sharpness"]),
                   pinball=None if doc.get("pinball") is None else float(doc["pinball"]),
                   sample_count=int(doc["sample_count"]),
                   unit=str(doc.get("unit", "MW")),
                   level=float(doc.get("level", 0.95)))

    def to_kv(self) -> str:
        lines = [f"{key}: {value!r}" if isinstance(value, str) else f"{key}: {value}"
                 for key, value in self.to_dict().items()]
        return "\n".join(lines)

    def to_csv_row(self) -> str:
        d = self.to_dict()
        pin = "" if d["pinball"] is None else repr(d["pinball"])
        return (f"{d['mse']!r},{d['rmse']!r},{d['mae']!r},{d['picp']!r},"
                f"{d['sharpness']!r},{pin},{d['sample_count']},{d['unit']},{d['level']!r}")

    @classmethod
    def from_csv_row(cls, row: str) -> "MetricsReport":
        parts = row.strip().split(",")
        if len(parts) != 9:
            raise ShapeError(f"metrics CSV row needs 9 fields, got {len(parts)}")
        return cls(mse=float(parts[0]), rmse=float(parts[1]), mae=float(parts[2]),
                   picp=float(parts[3]), sharpness=float(parts[4]),
                   pinball=float(parts[5]) if parts[5] else None,
                   sample_count=int(parts[6]), unit=parts[7], level=float(parts[8]))


def evaluate_records(records: list[ForecastRecord], actuals) -> MetricsReport:
    """Score forecast records against aligned hourly actuals.

    Pinball is the mean of the two bound-quantile losses, i.e. the bounds
    treated as the (1-level)/2 and (1+level)/2 quantile forecasts.
    """
    if not records:
        raise ShapeError("no forecast records given")
    y = _vector(actuals, "actuals")
    mu = np.concatenate([r.mu for r in records])
    if y.size != mu.size:
        raise ShapeError(f"{y.size} actuals vs {mu.size} forecast steps")
    intervals = IntervalSet.from_records(records)
    mse, rmse, mae = point_metrics(y, mu)
    tau_hi = (1 + intervals.level) / 2
    pin = 0.5 * (pinball(y, intervals.lower, 1 - tau_hi)
                 + pinball(y, intervals.upper, tau_hi))
    return MetricsReport(mse=mse, rmse=rmse, mae=mae,
                         picp=picp(y, intervals), sharpness=sharpness(intervals),
                         pinball=pin, sample_count=int(y.size),
                         unit=records[0].unit, level=intervals.level)
