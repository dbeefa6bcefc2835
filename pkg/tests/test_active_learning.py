"""Query selection, threshold policy, augmentation and the cycle engine."""
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

import gridcast.active_learning as al
from gridcast.active_learning import (ALCycleReport, QuerySet, ThresholdPolicy,
                                      acquire_actuals, augment_and_retrain,
                                      day_of, select_queries, sweep_thetas,
                                      update_threshold)
from gridcast.datastore import Store
from gridcast.errors import (DomainError, EmptyData, NothingToLearn,
                             RepositoryError, ShapeError)
from gridcast.forecaster import ForecastRecord
from gridcast.synthetic import load_bundle_into_store
from gridcast.timeseries import HOUR

from conftest import make_tiny_engine, slice_days

UTC = timezone.utc
DAY8 = datetime(2021, 1, 8, tzinfo=UTC)


def record(issue, sigmas, series="load"):
    sigmas = np.asarray(sigmas, dtype=np.float64)
    return ForecastRecord.build(series, issue, np.full(sigmas.size, 100.0), sigmas)


class TestSelectQueries:
    def test_strictly_above_theta(self):
        rec = record(DAY8, [0.5, 1.2, 0.9])
        queries = select_queries([rec], 1.0)
        assert queries.timestamps == [DAY8 + HOUR]
        assert queries.sigmas.tolist() == [1.2]
        assert queries.theta_used == 1.0

    def test_boundary_not_queried(self):
        rec = record(DAY8, [1.0, 1.0])
        assert len(select_queries([rec], 1.0)) == 0

    def test_theta_above_max_empty(self):
        rec = record(DAY8, [0.5, 1.2, 0.9])
        assert len(select_queries([rec], 5.0)) == 0

    def test_tiny_theta_selects_all(self):
        rec = record(DAY8, [0.5, 1.2, 0.9])
        assert len(select_queries([rec], 1e-9)) == 3

    def test_excluded_days_skipped(self):
        rec = record(DAY8, [2.0, 2.0, 2.0])
        queries = select_queries([rec], 1.0, exclude_days={DAY8})
        assert len(queries) == 0

    def test_exclusion_normalizes_to_day(self):
        rec = record(DAY8, [2.0])
        queries = select_queries([rec], 1.0, exclude_days={DAY8 + 5 * HOUR})
        assert len(queries) == 0

    def test_later_record_wins(self):
        stale = record(DAY8, [1.5])
        fresh = record(DAY8, [0.5])
        assert len(select_queries([stale, fresh], 1.0)) == 0
        queries = select_queries([fresh, stale], 1.0)
        assert queries.sigmas.tolist() == [1.5]

    def test_empty_archive(self):
        with pytest.raises(EmptyData):
            select_queries([], 1.0)

    def test_monotone_nesting(self):
        rng = np.random.default_rng(0)
        archive = [record(DAY8 + d * timedelta(days=1), rng.uniform(0.1, 3.0, 24))
                   for d in range(4)]
        prev = None
        for theta in (0.5, 1.0, 1.5, 2.0, 2.5):
            current = set(select_queries(archive, theta).timestamps)
            if prev is not None:
                assert current <= prev
            prev = current

    def test_sweep_matches_individual_counts(self):
        rng = np.random.default_rng(1)
        archive = [record(DAY8, rng.uniform(0.1, 3.0, 24))]
        table = sweep_thetas(archive, [0.5, 1.5, 2.5])
        for theta, count in table:
            assert count == len(select_queries(archive, theta))

    def test_days_deduped_and_sorted(self):
        rec1 = record(DAY8 + 23 * HOUR, [2.0, 2.0])  # spans midnight
        queries = select_queries([rec1], 1.0)
        assert queries.days() == [DAY8, DAY8 + timedelta(days=1)]


class TestAcquireActuals:
    def test_split_available_unavailable(self, tiny_bundle, tmp_store):
        load_bundle_into_store(tmp_store, slice_days(tiny_bundle, 0, 2))
        series = tmp_store.get_series("load")
        inside = series.start + 5 * HOUR
        beyond = series.end + 3 * HOUR
        queries = QuerySet(timestamps=[inside, beyond],
                           sigmas=np.array([2.0, 2.0]), theta_used=1.0)
        labeled, unavailable = acquire_actuals(queries, tmp_store)
        assert labeled == [(inside, float(series.values[5]))]
        assert unavailable == [beyond]

    def test_empty_queries(self, tmp_store):
        queries = QuerySet(timestamps=[], sigmas=np.array([]), theta_used=1.0)
        assert acquire_actuals(queries, tmp_store) == ([], [])


class TestThresholdPolicy:
    def test_initial_policy(self):
        policy = ThresholdPolicy.initial(at=DAY8)
        assert policy.theta == 1000.0
        assert policy.set_by == "default"
        assert len(policy.history) == 1
        assert policy.history[0].rationale == "initial value"

    def test_update_appends_and_swaps(self):
        policy = ThresholdPolicy.initial(at=DAY8)
        update_threshold(policy, 550.0, "post-storm review", "op-7", at=DAY8 + HOUR)
        assert policy.theta == 550.0
        assert policy.set_by == "op-7"
        assert len(policy.history) == 2
        assert policy.history[-1].rationale == "post-storm review"

    def test_repeated_value_not_deduped(self):
        policy = ThresholdPolicy.initial(at=DAY8)
        update_threshold(policy, 550.0, "first", "a", at=DAY8)
        update_threshold(policy, 550.0, "second", "b", at=DAY8)
        assert len(policy.history) == 3

    def test_invalid_theta_rejected(self):
        policy = ThresholdPolicy.initial(at=DAY8)
        for bad in (0.0, -5.0, float("inf"), float("nan")):
            with pytest.raises(DomainError):
                update_threshold(policy, bad, "x", "y")
        assert policy.theta == 1000.0
        assert len(policy.history) == 1

    def test_doc_round_trip(self):
        policy = ThresholdPolicy.initial(at=DAY8)
        update_threshold(policy, 750.0, "tune", "op", at=DAY8 + HOUR)
        clone = ThresholdPolicy.from_doc(policy.to_doc())
        assert clone == policy

    def test_history_csv(self):
        policy = ThresholdPolicy.initial(at=DAY8)
        update_threshold(policy, 2.0, 'say "why"', "op", at=DAY8 + HOUR)
        lines = policy.history_csv().splitlines()
        assert lines[0] == "timestamp,theta,set_by,rationale"
        assert lines[1].startswith("2021-01-08T00:00:00")
        assert '"say ""why"""' in lines[2]


class TestAugmentAndRetrain:
    def test_empty_augment_rejected(self, tiny_model):
        with pytest.raises(NothingToLearn):
            augment_and_retrain(tiny_model, [], [], [])

    def base_and_new(self, tiny_bundle, tiny_model):
        from gridcast.features import make_windows, windows_for_days, Split
        bundle = slice_days(tiny_bundle, 0, 28)
        base, _ = make_windows(bundle, 168, 24, Split((0, 12), (12, 22)),
                               scaler=tiny_model.scaler)
        new = windows_for_days(bundle, 168, 24, tiny_model.scaler,
                               [bundle.load.timestamp_at(24 * 24)])
        return base, new

    def test_new_windows_weighted_double(self, tiny_bundle, tiny_model, tiny_hp):
        base, new = self.base_and_new(tiny_bundle, tiny_model)
        child = augment_and_retrain(tiny_model, base["train"], base["val"],
                                    new, tiny_hp)
        assert all(w.weight == 2.0 for w in new)
        assert child.provenance["parent"] == tiny_model.model_id
        assert child.provenance["augmented_days"] == ["2021-01-25T00:00:00Z"]
        assert child.provenance["warm_start"] is True
        assert child.provenance["epoch_cap"] == max(1, tiny_hp.max_epochs // 2)

    def test_full_retrain_runs_cold(self, tiny_bundle, tiny_model, tiny_hp):
        base, new = self.base_and_new(tiny_bundle, tiny_model)
        child = augment_and_retrain(tiny_model, base["train"], base["val"],
                                    new, tiny_hp, full_retrain=True)
        assert child.provenance["warm_start"] is False
        assert child.provenance["epoch_cap"] == tiny_hp.max_epochs


class TestEngineLifecycle:
    def test_train_initial_commits_state(self, tiny_engine):
        model = tiny_engine.train_initial()
        state = tiny_engine.state()
        assert state["active_model"] == model.model_id
        assert state["cycles_run"] == 0
        assert len(state["training_days"]) == 20
        assert tiny_engine.load_model().model_id == model.model_id
        assert tiny_engine.load_policy().theta == 1000.0

    def test_state_missing_before_training(self, tiny_engine):
        from gridcast.errors import NotFound
        with pytest.raises(NotFound):
            tiny_engine.state()

    def test_set_theta_persists(self, tiny_engine):
        tiny_engine.train_initial()
        tiny_engine.set_theta(42.0, "test", "op")
        assert tiny_engine.load_policy().theta == 42.0
        assert len(tiny_engine.load_policy().history) == 2


class TestEngineCycle:
    def test_noop_cycle_keeps_model(self, tiny_engine):
        model = tiny_engine.train_initial()
        tiny_engine.set_theta(1e9, "silence queries", "test")
        report = tiny_engine.run_cycle()
        assert report.status == "no-op"
        assert report.queried == 0
        assert report.child_model == model.model_id
        assert report.metrics_after == report.metrics_before
        state = tiny_engine.state()
        assert state["cycles_run"] == 1
        assert state["active_model"] == model.model_id
        assert tiny_engine.list_cycles() == [1]

    def test_low_theta_retrains(self, tiny_engine):
        model = tiny_engine.train_initial()
        tiny_engine.set_theta(1e-6, "query everything", "test")
        report = tiny_engine.run_cycle()
        assert report.status == "retrained"
        assert report.queried == 4 * 24
        assert report.acquired == 4 * 24
        assert len(report.augmented_days) == 4
        assert report.parent_model == model.model_id
        assert report.child_model != model.model_id
        state = tiny_engine.state()
        assert state["active_model"] == report.child_model
        assert len(state["training_days"]) == 24

    def test_augmentation_never_touches_eval_span(self, tiny_engine):
        tiny_engine.train_initial()
        tiny_engine.set_theta(1e-6, "query everything", "test")
        report = tiny_engine.run_cycle()
        from gridcast.timeseries import parse_rfc3339
        eval_start = parse_rfc3339(report.eval_start)
        assert all(parse_rfc3339(d) < eval_start for d in report.augmented_days)

    def test_consecutive_cycles_chain(self, tiny_engine):
        tiny_engine.train_initial()
        tiny_engine.set_theta(1e-6, "query everything", "test")
        first = tiny_engine.run_cycle()
        second = tiny_engine.run_cycle()
        assert second.cycle == 2
        assert second.parent_model == first.child_model
        # every query-span day joined the manifest in cycle 1
        assert second.status == "no-op"
        assert tiny_engine.list_cycles() == [1, 2]

    def test_flagged_day_forced_in(self, tiny_engine):
        model = tiny_engine.train_initial()
        tiny_engine.set_theta(1e9, "no uncertainty queries", "test")
        series = tiny_engine.store.get_series("load")
        flag_day = series.start + timedelta(days=21)
        doc, created = tiny_engine.flag_rare_event(
            flag_day, flag_day + timedelta(hours=6), "unit heat wave", "op")
        assert created and doc["id"] == "flag-0001"
        report = tiny_engine.run_cycle()
        assert report.status == "retrained"
        assert report.queried == 0
        assert report.flagged_included == 1
        assert report.child_model != model.model_id

    def test_flag_duplicate_range(self, tiny_engine):
        tiny_engine.train_initial()
        series = tiny_engine.store.get_series("load")
        a = series.start + timedelta(days=21)
        b = a + timedelta(hours=6)
        _, created1 = tiny_engine.flag_rare_event(a, b, "first", "op")
        dup, created2 = tiny_engine.flag_rare_event(a, b, "second", "op")
        assert created1 and not created2
        assert dup["note"] == "first"
        assert len(tiny_engine.list_flags()) == 1

    def test_flag_outside_data_rejected(self, tiny_engine):
        tiny_engine.train_initial()
        series = tiny_engine.store.get_series("load")
        future = series.end + timedelta(days=2)
        with pytest.raises(DomainError):
            tiny_engine.flag_rare_event(future, future + timedelta(hours=3), "x", "op")
        with pytest.raises(DomainError):
            tiny_engine.flag_rare_event(series.start + HOUR, series.start, "x", "op")

    def test_report_text_round_trip(self, tiny_engine):
        tiny_engine.train_initial()
        tiny_engine.set_theta(1e-6, "query everything", "test")
        report = tiny_engine.run_cycle()
        clone = ALCycleReport.from_text(report.to_text())
        assert clone == report
        assert tiny_engine.load_cycle(1) == report

    def test_report_missing_field_rejected(self, tiny_engine):
        tiny_engine.train_initial()
        tiny_engine.set_theta(1e9, "quiet", "test")
        report = tiny_engine.run_cycle()
        text = "\n".join(line for line in report.to_text().splitlines()
                         if not line.startswith("theta:"))
        with pytest.raises(ShapeError):
            ALCycleReport.from_text(text)


class TestCycleAtomicity:
    def test_failed_retrain_leaves_state_untouched(self, tiny_engine, monkeypatch):
        tiny_engine.train_initial()
        tiny_engine.set_theta(1e-6, "query everything", "test")
        before_state = tiny_engine.state()
        before_models = tiny_engine.store.list_blobs("models")

        def boom(*args, **kwargs):
            raise RepositoryError("disk full during retrain")

        monkeypatch.setattr(al, "augment_and_retrain", boom)
        with pytest.raises(RepositoryError):
            tiny_engine.run_cycle()
        assert tiny_engine.state() == before_state
        assert tiny_engine.store.list_blobs("models") == before_models
        assert tiny_engine.list_cycles() == []

    def test_failed_acquisition_leaves_state_untouched(self, tiny_engine, monkeypatch):
        tiny_engine.train_initial()
        tiny_engine.set_theta(1e-6, "query everything", "test")
        before_state = tiny_engine.state()

        def boom(*args, **kwargs):
            raise RepositoryError("feed outage")

        monkeypatch.setattr(al, "acquire_actuals", boom)
        with pytest.raises(RepositoryError):
            tiny_engine.run_cycle()
        assert tiny_engine.state() == before_state
        assert tiny_engine.list_cycles() == []
