"""File-backed time-series repository with CSV ingestion.

One writer, many readers: all access goes through an RLock and reads hand
out copies, so a reader always sees a consistent snapshot. Series persist
as ``<root>/series/<id>.csv`` plus a JSON sidecar with unit and step;
documents (models, forecast records, cycle reports, annotations) persist
as named blobs under ``<root>/<kind>/``. Writes go through a temp file and
an atomic rename so a crash never leaves a half-written file behind.
"""
from __future__ import annotations

import csv
import io
import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import (
    AlignmentError,
    ConflictError,
    DuplicateTimestamp,
    GapTooLarge,
    NotFound,
    RepositoryError,
)
from .timeseries import HOUR, TimeSeries, ensure_utc, format_rfc3339, parse_rfc3339

DEFAULT_MAX_GAP = timedelta(hours=3)


@dataclass
class IngestReport:
    series_ids: list[str]
    rows_read: int
    stored_counts: dict[str, int]
    interpolated: dict[str, int] = field(default_factory=dict)


def _format_value(v: float) -> str:
    return repr(float(v))


class Store:
    """Embedded repository for aligned hourly series and named documents."""

    BLOB_KINDS = ("models", "forecasts", "cycles", "annotations", "policy", "state")

    def __init__(self, root: str | Path, step: timedelta = HOUR,
                 max_gap: timedelta = DEFAULT_MAX_GAP):
        self.root = Path(root)
        self.step = step
        self.max_gap = max_gap
        self._lock = threading.RLock()
        self._series: dict[str, TimeSeries] = {}
        try:
            (self.root / "series").mkdir(parents=True, exist_ok=True)
            for kind in self.BLOB_KINDS:
                (self.root / kind).mkdir(exist_ok=True)
        except OSError as exc:
            raise RepositoryError(f"cannot initialize store at {self.root}: {exc}") from exc
        self._load_from_disk()

    # --- series API ---

    def list_series(self) -> list[str]:
        with self._lock:
            return sorted(self._series)

    def has_series(self, series_id: str) -> bool:
        with self._lock:
            return series_id in self._series

    def get_series(self, series_id: str) -> TimeSeries:
        with self._lock:
            if series_id not in self._series:
                raise NotFound(f"unknown series {series_id!r}")
            s = self._series[series_id]
            return TimeSeries(s.series_id, s.start, s.values.copy(), s.unit, s.step)

    def put_series(self, series: TimeSeries, replace: bool = False) -> None:
        with self._lock:
            if series.series_id in self._series and not replace:
                raise ConflictError(f"series {series.series_id!r} already exists")
            stored = TimeSeries(series.series_id, series.start, series.values.copy(),
                                series.unit, self.step)
            self._series[series.series_id] = stored
            self._flush_series(stored)

    def query_range(self, series_id: str, start: datetime, end: datetime) -> TimeSeries:
        """Points with start <= t < end; bounds must sit on the series grid."""
        start, end = ensure_utc(start), ensure_utc(end)
        if end < start:
            raise AlignmentError("query end precedes start")
        with self._lock:
            if series_id not in self._series:
                raise NotFound(f"unknown series {series_id!r}")
            return self._series[series_id].slice(start, end)

    def append(self, series_id: str, points: list[tuple[datetime, float]]) -> int:
        """Extend a series with grid-contiguous points.

        Points overlapping the stored tail must match the stored values
        exactly (re-appending an identical tail is a no-op); an overlap
        with differing values raises ConflictError.
        """
        with self._lock:
            if series_id not in self._series:
                raise NotFound(f"unknown series {series_id!r}")
            series = self._series[series_id]
            if not points:
                return len(series)
            indexed = sorted((series.index_of(ensure_utc(ts)), float(v)) for ts, v in points)
            for (i, _), (j, _) in zip(indexed, indexed[1:]):
                if i == j:
                    raise DuplicateTimestamp(f"duplicate appended timestamp at index {i}")
            n = len(series)
            if indexed[0][0] > n:
                raise AlignmentError("appended points leave a gap after the stored tail")
            expected = indexed[0][0]
            for i, _ in indexed:
                if i != expected:
                    raise AlignmentError("appended points are not contiguous")
                expected += 1
            new_vals = []
            for i, v in indexed:
                if i < 0:
                    raise AlignmentError("appended point precedes the series start")
                if i < n:
                    if series.values[i] != v:
                        raise ConflictError(
                            f"append conflicts with stored value at index {i}")
                else:
                    new_vals.append(v)
            if new_vals:
                series.values = np.concatenate([series.values, np.asarray(new_vals)])
                self._flush_series(series)
            return len(series)

    # --- CSV ingestion / export ---

    def ingest_csv(self, source, schema: dict[str, tuple[str, str]],
                   max_gap: timedelta | None = None) -> IngestReport:
        """Ingest an RFC 3339 CSV into one series per mapped column.

        ``schema`` maps CSV column names to (series_id, unit). Rows are
        sorted by timestamp; duplicate timestamps are rejected; gaps up to
        ``max_gap`` are linearly interpolated and counted in the report,
        larger ones raise GapTooLarge.
        """
        max_gap = max_gap or self.max_gap
        text = source.decode("utf-8") if isinstance(source, bytes) else source
        if hasattr(text, "read"):
            text = text.read()
            if isinstance(text, bytes):
                text = text.decode("utf-8")
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or "timestamp" not in reader.fieldnames:
            raise AlignmentError("CSV must have a 'timestamp' column")
        missing = [c for c in schema if c not in reader.fieldnames]
        if missing:
            raise AlignmentError(f"schema columns missing from CSV: {missing}")

        rows = []
        for row in reader:
            ts = parse_rfc3339(row["timestamp"])
            rows.append((ts, {col: float(row[col]) for col in schema}))
        if not rows:
            raise AlignmentError("CSV contains no data rows")
        rows.sort(key=lambda r: r[0])
        for (a, _), (b, _) in zip(rows, rows[1:]):
            if a == b:
                raise DuplicateTimestamp(f"duplicate timestamp {format_rfc3339(a)}")

        origin = rows[0][0]
        grid = []
        for ts, vals in rows:
            quot, rem = divmod(ts - origin, self.step)
            if rem:
                raise AlignmentError(
                    f"timestamp {format_rfc3339(ts)} is off the {self.step} grid")
            grid.append((quot, vals))

        max_gap_steps = max_gap // self.step
        n_slots = grid[-1][0] + 1
        interpolated: dict[str, int] = {sid: 0 for sid, _ in schema.values()}
        columns: dict[str, np.ndarray] = {}
        for col, (sid, unit) in schema.items():
            filled = np.full(n_slots, np.nan)
            for idx, vals in grid:
                filled[idx] = vals[col]
            prev = 0
            for idx, _ in grid[1:]:
                gap = idx - prev
                if gap > 1:
                    if gap > max_gap_steps:
                        raise GapTooLarge(
                            f"gap of {gap * self.step} at "
                            f"{format_rfc3339(origin + prev * self.step)} exceeds {max_gap}")
                    lo, hi = filled[prev], filled[idx]
                    for k in range(1, gap):
                        filled[prev + k] = lo + (hi - lo) * k / gap
                    interpolated[sid] += gap - 1
                prev = idx
            columns[sid] = filled

        with self._lock:
            for col, (sid, unit) in schema.items():
                self.put_series(TimeSeries(sid, origin, columns[sid], unit, self.step))
        return IngestReport(
            series_ids=[sid for sid, _ in schema.values()],
            rows_read=len(rows),
            stored_counts={sid: int(n_slots) for sid, _ in schema.values()},
            interpolated=interpolated,
        )

    def export_csv(self, series_ids: list[str]) -> str:
        """Aligned series to CSV text, formatted for exact float round-trips."""
        with self._lock:
            series = [self.get_series(sid) for sid in series_ids]
        first = series[0]
        for s in series[1:]:
            if s.start != first.start or len(s) != len(first) or s.step != first.step:
                raise AlignmentError("export requires aligned series")
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["timestamp"] + series_ids)
        for i in range(len(first)):
            writer.writerow([format_rfc3339(first.timestamp_at(i))]
                            + [_format_value(s.values[i]) for s in series])
        return out.getvalue()

    # --- document blobs ---

    def put_blob(self, kind: str, name: str, data: bytes) -> None:
        self._check_kind(kind)
        path = self.root / kind / name
        try:
            tmp = path.with_name(path.name + ".tmp")
            tmp.write_bytes(data)
            tmp.replace(path)
        except OSError as exc:
            raise RepositoryError(f"cannot write {kind}/{name}: {exc}") from exc

    def get_blob(self, kind: str, name: str) -> bytes:
        self._check_kind(kind)
        path = self.root / kind / name
        if not path.exists():
            raise NotFound(f"no {kind} document named {name!r}")
        try:
            return path.read_bytes()
        except OSError as exc:
            raise RepositoryError(f"cannot read {kind}/{name}: {exc}") from exc

    def has_blob(self, kind: str, name: str) -> bool:
        self._check_kind(kind)
        return (self.root / kind / name).exists()

    def list_blobs(self, kind: str) -> list[str]:
        self._check_kind(kind)
        return sorted(p.name for p in (self.root / kind).iterdir()
                      if p.is_file() and not p.name.endswith(".tmp"))

    def _check_kind(self, kind: str) -> None:
        if kind not in self.BLOB_KINDS:
            raise RepositoryError(f"unknown blob kind {kind!r}")

    # --- persistence ---

    def _series_paths(self, series_id: str) -> tuple[Path, Path]:
        base = self.root / "series"
        return base / f"{series_id}.csv", base / f"{series_id}.meta.json"

    def _flush_series(self, series: TimeSeries) -> None:
        csv_path, meta_path = self._series_paths(series.series_id)
        try:
            out = io.StringIO()
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(["timestamp", "value"])
            for i in range(len(series)):
                writer.writerow([format_rfc3339(series.timestamp_at(i)),
                                 _format_value(series.values[i])])
            tmp = csv_path.with_name(csv_path.name + ".tmp")
            tmp.write_text(out.getvalue())
            tmp.replace(csv_path)
            meta = {"series_id": series.series_id, "unit": series.unit,
                    "start": format_rfc3339(series.start),
                    "step_seconds": int(series.step.total_seconds())}
            meta_path.write_text(json.dumps(meta, sort_keys=True))
        except OSError as exc:
            raise RepositoryError(f"cannot persist series {series.series_id!r}: {exc}") from exc

    def _load_from_disk(self) -> None:
        for meta_path in sorted((self.root / "series").glob("*.meta.json")):
            meta = json.loads(meta_path.read_text())
            sid = meta["series_id"]
            csv_path, _ = self._series_paths(sid)
            if not csv_path.exists():
                continue
            reader = csv.reader(io.StringIO(csv_path.read_text()))
            header = next(reader, None)
            values = [float(row[1]) for row in reader if row]
            self._series[sid] = TimeSeries(
                sid, parse_rfc3339(meta["start"]), np.asarray(values), meta["unit"],
                timedelta(seconds=meta["step_seconds"]))
