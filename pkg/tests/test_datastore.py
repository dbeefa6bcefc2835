"""File-backed store: ingestion, range queries, appends, blobs, persistence."""
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from gridcast.datastore import Store
from gridcast.errors import (AlignmentError, ConflictError, DuplicateTimestamp,
                             GapTooLarge, NotFound, RepositoryError)
from gridcast.timeseries import HOUR, TimeSeries

T0 = datetime(2021, 1, 1, tzinfo=timezone.utc)


def _csv(rows):
    return "timestamp,mw\n" + "\n".join(f"{t},{v}" for t, v in rows) + "\n"


def _hours(*offsets):
    return [(T0 + h * HOUR).strftime("%Y-%m-%dT%H:%M:%SZ") for h in offsets]


class TestIngest:
    def test_three_rows_stored_directly(self, tmp_store):
        text = _csv(zip(_hours(0, 1, 2), [100, 110, 105]))
        report = tmp_store.ingest_csv(text, {"mw": ("load", "MW")})
        assert report.series_ids == ["load"]
        assert report.rows_read == 3
        series = tmp_store.get_series("load")
        assert list(series.values) == [100.0, 110.0, 105.0]
        assert series.unit == "MW"

    def test_small_gap_linearly_interpolated(self, tmp_store):
        text = _csv(zip(_hours(0, 2), [100, 110]))
        report = tmp_store.ingest_csv(text, {"mw": ("load", "MW")},
                                      max_gap=timedelta(hours=2))
        series = tmp_store.get_series("load")
        assert len(series) == 3
        assert series.values[1] == pytest.approx(105.0)
        assert report.interpolated["load"] == 1

    def test_duplicate_timestamp_rejected(self, tmp_store):
        text = _csv(zip(_hours(0, 1, 1), [100, 110, 111]))
        with pytest.raises(DuplicateTimestamp):
            tmp_store.ingest_csv(text, {"mw": ("load", "MW")})

    def test_gap_beyond_limit_rejected(self, tmp_store):
        text = _csv(zip(_hours(0, 7), [100, 110]))
        with pytest.raises(GapTooLarge):
            tmp_store.ingest_csv(text, {"mw": ("load", "MW")})

    def test_unsorted_rows_are_sorted_by_timestamp(self, tmp_store):
        ts = _hours(2, 0, 1)
        text = _csv(zip(ts, [105, 100, 110]))
        tmp_store.ingest_csv(text, {"mw": ("load", "MW")})
        assert list(tmp_store.get_series("load").values) == [100.0, 110.0, 105.0]


class TestQueryRange:
    @pytest.fixture()
    def two_days(self, tmp_store):
        series = TimeSeries("load", T0, np.arange(48.0), "MW")
        tmp_store.put_series(series)
        return tmp_store

    def test_first_day_slice(self, two_days):
        got = two_days.query_range("load", T0, T0 + timedelta(days=1))
        assert len(got) == 24
        assert list(got.values) == list(range(24))
        assert got.unit == "MW"

    def test_empty_range_is_not_an_error(self, two_days):
        got = two_days.query_range("load", T0 + 5 * HOUR, T0 + 5 * HOUR)
        assert len(got) == 0

    def test_unknown_series(self, two_days):
        with pytest.raises(NotFound):
            two_days.query_range("nope", T0, T0 + HOUR)

    def test_unaligned_bounds(self, two_days):
        with pytest.raises(AlignmentError):
            two_days.query_range("load", T0 + timedelta(minutes=30), T0 + HOUR)

    def test_partition_concatenation_equals_full_span(self, two_days):
        full = two_days.query_range("load", T0, T0 + 48 * HOUR).values
        cut = T0 + 17 * HOUR
        left = two_days.query_range("load", T0, cut).values
        right = two_days.query_range("load", cut, T0 + 48 * HOUR).values
        assert list(np.concatenate([left, right])) == list(full)


class TestAppend:
    @pytest.fixture()
    def one_day(self, tmp_store):
        tmp_store.put_series(TimeSeries("load", T0, np.arange(24.0), "MW"))
        return tmp_store

    def test_contiguous_append_extends(self, one_day):
        points = [(T0 + (24 + i) * HOUR, float(100 + i)) for i in range(24)]
        assert one_day.append("load", points) == 48

    def test_reappend_identical_tail_is_noop(self, one_day):
        points = [(T0 + (24 + i) * HOUR, float(i)) for i in range(24)]
        assert one_day.append("load", points) == 48
        assert one_day.append("load", points) == 48

    def test_conflicting_value_rejected(self, one_day):
        with pytest.raises(ConflictError):
            one_day.append("load", [(T0 + 23 * HOUR, 999.0)])


class TestPersistence:
    def test_export_reingest_round_trip(self, tmp_store):
        rng = np.random.default_rng(5)
        values = rng.normal(5000, 300, size=72)
        tmp_store.put_series(TimeSeries("load", T0, values, "MW"))
        text = tmp_store.export_csv(["load"])
        other = Store(tmp_store.root.parent / "other")
        other.ingest_csv(text, {"load": ("load", "MW")})
        assert np.array_equal(other.get_series("load").values, values)

    def test_series_survive_reopen(self, tmp_path):
        store = Store(tmp_path / "s")
        store.put_series(TimeSeries("load", T0, np.arange(24.0), "MW"))
        again = Store(tmp_path / "s")
        assert list(again.get_series("load").values) == list(range(24))

    def test_blobs_survive_reopen(self, tmp_path):
        store = Store(tmp_path / "s")
        store.put_blob("models", "m.json", b'{"a":1}')
        again = Store(tmp_path / "s")
        assert again.get_blob("models", "m.json") == b'{"a":1}'
        assert again.list_blobs("models") == ["m.json"]

    def test_unknown_blob_kind_rejected(self, tmp_store):
        with pytest.raises(RepositoryError):
            tmp_store.put_blob("attic", "x", b"")

    def test_missing_blob_raises(self, tmp_store):
        with pytest.raises(NotFound):
            tmp_store.get_blob("models", "missing.json")
