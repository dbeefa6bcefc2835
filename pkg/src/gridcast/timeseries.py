"""Uniformly sampled, time-indexed series and timestamp helpers.

All timestamps are UTC. A series is defined by its start, a fixed step
(1 hour unless stated otherwise) and a dense float64 value array; the
timestamp of index i is start + i * step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import AlignmentError

HOUR = timedelta(hours=1)


def parse_rfc3339(text: str) -> datetime:
    """Parse an RFC 3339 timestamp into an aware UTC datetime."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_rfc3339(dt: datetime) -> str:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def ensure_utc(dt: datetime) -> datetime:
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


@dataclass
class TimeSeries:
    """Uniformly spaced measurement series (timestamp(i) = start + i*step)."""

    series_id: str
    start: datetime
    values: np.ndarray
    unit: str = ""
    step: timedelta = HOUR

    def __post_init__(self):
        self.start = ensure_utc(self.start)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise AlignmentError(f"series {self.series_id!r}: values must be 1-D")
        if self.values.size and not np.all(np.isfinite(self.values)):
            raise AlignmentError(f"series {self.series_id!r}: non-finite values")

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def end(self) -> datetime:
        """First timestamp past the stored range."""
        return self.start + len(self) * self.step

    def index_of(self, ts: datetime) -> int:
        """Grid index of ``ts``; raises AlignmentError off the grid."""
        delta = ensure_utc(ts) - self.start
        quot, rem = divmod(delta, self.step)
        if rem:
            raise AlignmentError(f"{format_rfc3339(ts)} is not aligned to the {self.step} grid")
        return quot

    def timestamp_at(self, i: int) -> datetime:
        return self.start + i * self.step

    def timestamps(self) -> list[datetime]:
        return [self.start + i * self.step for i in range(len(self))]

    def slice(self, start: datetime, end: datetime) -> "TimeSeries":
        """Points with start <= t < end. Bounds must be grid-aligned."""
        i = self.index_of(start)
        j = self.index_of(end)
        if j < i:
            raise AlignmentError("slice end precedes start")
        i_clip, j_clip = max(i, 0), min(j, len(self))
        if i_clip >= j_clip:
            vals = np.empty(0, dtype=np.float64)
            i_clip = i
        else:
            vals = self.values[i_clip:j_clip].copy()
        return TimeSeries(self.series_id, self.timestamp_at(i_clip), vals, self.unit, self.step)


@dataclass
class DatasetBundle:
    """Load series plus aligned covariates sharing start, step and length."""

    load: TimeSeries
    covariates: dict[str, TimeSeries]
    calendar_origin: datetime
    provenance: dict = field(default_factory=dict)

    COVARIATE_REGISTRY = ("temperature", "wind_speed", "wind_direction", "precipitation")

    def __post_init__(self):
        self.calendar_origin = ensure_utc(self.calendar_origin)
        for name, series in self.covariates.items():
            if name not in self.COVARIATE_REGISTRY:
                raise AlignmentError(f"unknown covariate {name!r}")
            if (series.start != self.load.start or series.step != self.load.step
                    or len(series) != len(self.load)):
                raise AlignmentError(f"covariate {name!r} not aligned with load series")

    def __len__(self) -> int:
        return len(self.load)
