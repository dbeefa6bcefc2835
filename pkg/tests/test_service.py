"""HTTP envelope, job lifecycle, and endpoint semantics over a tiny dataset."""
import json
import threading
from datetime import datetime, timezone

import numpy as np
import pytest
from fastapi.testclient import TestClient

from gridcast.active_learning import EngineConfig
from gridcast.forecaster import ForecastRecord, Hyperparams
from gridcast.service import ApiError, JobRunner, create_app, make_clock

from conftest import TINY_HP

TINY_CONFIG = EngineConfig(train_days=20, query_days=4, eval_days=4,
                           hyperparams=Hyperparams(**TINY_HP))


@pytest.fixture()
def client(tmp_path, monkeypatch):
    monkeypatch.setenv("GRIDCAST_FAKE_CLOCK", "2026-01-01T00:00:00Z")
    monkeypatch.setenv("GRIDCAST_SYNC_JOBS", "1")
    app = create_app(str(tmp_path / "data"), config=TINY_CONFIG)
    with TestClient(app) as c:
        yield c


def body(resp, status="ok"):
    doc = resp.json()
    assert doc["api_version"] == "1"
    assert doc["status"] == status
    assert ("data" in doc) != ("error" in doc)
    return doc.get("data") if status == "ok" else doc.get("error")


def seed_dataset(client, n_days=30, seed=7):
    resp = client.post("/api/v1/dataset/synthetic",
                       json={"n_days": n_days, "seed": seed})
    assert resp.status_code == 201
    return body(resp)


def train_model(client):
    resp = client.post("/api/v1/train", json={})
    assert resp.status_code == 202
    job = body(resp)
    done = body(client.get(f"/api/v1/jobs/{job['id']}"))
    assert done["state"] == "done", done
    return done


class TestEnvelope:
    def test_health(self, client):
        resp = client.get("/api/v1/health")
        assert resp.status_code == 200
        assert body(resp) == {"service": "gridcast"}

    def test_error_envelope_shape(self, client):
        resp = client.get("/api/v1/jobs/job-9999")
        assert resp.status_code == 404
        err = body(resp, status="error")
        assert err["code"] == "not-found"
        assert "job-9999" in err["message"]

    def test_canonical_bytes_sorted_compact(self, client):
        raw = client.get("/api/v1/health").content
        assert raw == json.dumps(json.loads(raw), sort_keys=True,
                                 separators=(",", ":")).encode()


class TestValidation:
    def test_forecast_requires_date(self, client):
        resp = client.get("/api/v1/forecast")
        assert resp.status_code == 422
        assert body(resp, "error")["code"] == "validation"

    def test_forecast_bad_level(self, client):
        seed_dataset(client)
        train_model(client)
        resp = client.get("/api/v1/forecast",
                          params={"date": "2021-01-22", "level": "1.5"})
        assert resp.status_code == 422

    def test_forecast_before_model(self, client):
        resp = client.get("/api/v1/forecast", params={"date": "2021-01-22"})
        assert resp.status_code == 409
        assert body(resp, "error")["code"] == "no-model"

    def test_forecast_without_context(self, client):
        seed_dataset(client)
        train_model(client)
        resp = client.get("/api/v1/forecast", params={"date": "1999-01-01"})
        assert resp.status_code == 409
        assert body(resp, "error")["code"] == "data-unavailable"

    def test_synthetic_unknown_field(self, client):
        resp = client.post("/api/v1/dataset/synthetic", json={"dayz": 3})
        assert resp.status_code == 422

    def test_synthetic_bad_config_value(self, client):
        resp = client.post("/api/v1/dataset/synthetic", json={"n_days": 3})
        assert resp.status_code == 422

    def test_threshold_requires_number(self, client):
        seed_dataset(client)
        resp = client.post("/api/v1/threshold", json={"theta": "soon"})
        assert resp.status_code == 422
        resp = client.post("/api/v1/threshold", json={})
        assert resp.status_code == 422

    def test_reversed_flag_range(self, client):
        seed_dataset(client)
        train_model(client)
        resp = client.get("/api/v1/uncertainty-flags",
                          params={"start": "2021-01-25", "end": "2021-01-21"})
        assert resp.status_code == 422

    def test_cycle_before_model(self, client):
        resp = client.post("/api/v1/al/cycle")
        assert resp.status_code == 409
        assert body(resp, "error")["code"] == "no-model"


class TestJobRunner:
    def make_runner(self, sync=False):
        return JobRunner(make_clock(), sync=sync)

    def test_one_job_at_a_time(self):
        runner = self.make_runner()
        release = threading.Event()
        started = threading.Event()

        def slow(on_epoch):
            started.set()
            release.wait(timeout=10)
            return {"ok": True}

        first = runner.submit("train", slow)
        assert started.wait(timeout=10)
        with pytest.raises(ApiError) as err:
            runner.submit("train", lambda on_epoch: {})
        assert err.value.status == 409 and err.value.code == "busy"
        release.set()
        import time
        for _ in range(200):
            if runner.snapshot(first["id"])["state"] == "done":
                break
            time.sleep(0.01)
        else:
            pytest.fail("job never finished")
        # terminal: a new submit works now
        second = runner.submit("train", lambda on_epoch: {"n": 2})
        assert second["id"] == "job-0002"

    def test_failed_job_reports_error(self):
        runner = self.make_runner(sync=True)

        def bad(on_epoch):
            raise ValueError("boom")

        job = runner.submit("train", bad)
        snap = runner.snapshot(job["id"])
        assert snap["state"] == "failed"
        assert "ValueError: boom" in snap["error"]
        assert snap["result"] is None

    def test_terminal_snapshot_immutable(self):
        runner = self.make_runner(sync=True)
        job = runner.submit("train", lambda on_epoch: {"x": 1})
        snap = runner.snapshot(job["id"])
        snap["state"] = "vandalized"
        snap["result"]["x"] = 99
        again = runner.snapshot(job["id"])
        assert again["state"] == "done"
        assert again["result"] == {"x": 1}

    def test_progress_via_on_epoch(self):
        runner = self.make_runner(sync=True)

        def work(on_epoch):
            on_epoch(3, 8, 1.0, 2.0)
            return {}

        job = runner.submit("train", work)
        assert runner.snapshot(job["id"])["progress"] == {"epoch": 3, "epoch_cap": 8}


class TestPipeline:
    def test_synthetic_train_forecast(self, client):
        data = seed_dataset(client)
        assert data["hours"] == 30 * 24
        done = train_model(client)
        model_id = done["result"]["model_id"]

        info = body(client.get("/api/v1/model"))
        assert info["model_id"] == model_id
        assert info["cycles_run"] == 0
        assert info["training_days"] == 20

        resp = client.get("/api/v1/forecast", params={"date": "2021-01-22"})
        data = body(resp)
        assert data["model_id"] == model_id
        record = data["record"]
        assert len(record["mu"]) == 24
        assert record["issue_time"] == "2021-01-22T00:00:00Z"
        assert all(l < u for l, u in zip(record["lower"], record["upper"]))

    def test_forecast_bytes_stable(self, client):
        seed_dataset(client)
        train_model(client)
        a = client.get("/api/v1/forecast", params={"date": "2021-01-22"})
        b = client.get("/api/v1/forecast", params={"date": "2021-01-22"})
        assert a.content == b.content

    def test_forecast_level_rescales(self, client):
        seed_dataset(client)
        train_model(client)
        narrow = body(client.get("/api/v1/forecast",
                                 params={"date": "2021-01-22", "level": "0.5"}))
        wide = body(client.get("/api/v1/forecast",
                               params={"date": "2021-01-22", "level": "0.99"}))
        assert narrow["record"]["mu"] == wide["record"]["mu"]
        assert narrow["record"]["upper"][0] < wide["record"]["upper"][0]

    def test_threshold_update_and_audit(self, client):
        seed_dataset(client)
        current = body(client.get("/api/v1/threshold"))
        assert current["theta"] == 1000.0
        updated = body(client.post("/api/v1/threshold",
                                   json={"theta": 650.0, "rationale": "storm week",
                                         "actor": "op-1"}))
        assert updated["theta"] == 650.0
        assert updated["history"][-1]["rationale"] == "storm week"
        again = body(client.get("/api/v1/threshold"))
        assert again["theta"] == 650.0
        assert len(again["history"]) == 2

    def test_cycle_retrain_and_comparison(self, client):
        seed_dataset(client)
        train_model(client)
        body(client.post("/api/v1/threshold", json={"theta": 1e-6}))
        resp = client.post("/api/v1/al/cycle")
        assert resp.status_code == 202
        job = body(resp)
        snap = body(client.get(f"/api/v1/jobs/{job['id']}"))
        assert snap["state"] == "done"
        report = snap["result"]
        assert report["status"] == "retrained"
        assert report["queried"] == 96

        cycles = body(client.get("/api/v1/cycles"))["cycles"]
        assert [c["cycle"] for c in cycles] == [1]
        detail = body(client.get("/api/v1/cycles/1"))
        assert detail["child_model"] == report["child_model"]

        comparison = body(client.get("/api/v1/metrics/comparison",
                                     params={"cycle": "1"}))
        assert [row["label"] for row in comparison["rows"]] == ["before", "after"]
        assert set(comparison["improvement"]) == {"mse_pct", "mae_pct",
                                                  "sharpness_pct", "picp_pp"}

        info = body(client.get("/api/v1/model"))
        assert info["model_id"] == report["child_model"]
        assert info["cycles_run"] == 1

    def test_comparison_by_model_ids(self, client):
        seed_dataset(client)
        train_model(client)
        body(client.post("/api/v1/threshold", json={"theta": 1e-6}))
        body(client.post("/api/v1/al/cycle"))
        report = body(client.get("/api/v1/cycles/1"))
        resp = client.get("/api/v1/metrics/comparison",
                          params={"models": f"{report['parent_model']},"
                                            f"{report['child_model']}"})
        rows = body(resp)["rows"]
        assert [r["label"] for r in rows] == [report["parent_model"],
                                              report["child_model"]]

    def test_comparison_needs_selector(self, client):
        seed_dataset(client)
        assert client.get("/api/v1/metrics/comparison").status_code == 422
        assert client.get("/api/v1/metrics/comparison",
                          params={"cycle": "7"}).status_code == 404


class TestUncertaintyFlags:
    def test_spiked_day_flagged(self, client):
        seed_dataset(client)
        train_model(client)
        store = client.app.state.gridcast.store
        spike_day = datetime(2021, 1, 21, tzinfo=timezone.utc)
        record = ForecastRecord.build("load", spike_day, np.full(24, 5000.0),
                                      np.full(24, 4000.0), 0.95)
        store.put_blob("forecasts", record.blob_name(), record.to_bytes())
        quiet = ForecastRecord.build(
            "load", datetime(2021, 1, 22, tzinfo=timezone.utc),
            np.full(24, 5000.0), np.full(24, 1.0), 0.95)
        store.put_blob("forecasts", quiet.blob_name(), quiet.to_bytes())

        data = body(client.get("/api/v1/uncertainty-flags",
                               params={"start": "2021-01-20", "end": "2021-01-24"}))
        assert [d["date"] for d in data["days"]] == ["2021-01-21T00:00:00Z"]
        day = data["days"][0]
        assert day["max_sigma"] == 4000.0
        assert day["sources"] == ["uncertainty"]

    def test_operator_flag_read_your_writes(self, client):
        seed_dataset(client)
        resp = client.post("/api/v1/rare-event-flag",
                           json={"start": "2021-01-10", "end": "2021-01-11",
                                 "note": "grid maintenance", "actor": "op-2"})
        assert resp.status_code == 201
        created = body(resp)
        assert created["created"] is True
        assert created["flag"]["id"] == "flag-0001"

        flags = body(client.get("/api/v1/rare-event-flags"))["flags"]
        assert len(flags) == 1 and flags[0]["note"] == "grid maintenance"

        data = body(client.get("/api/v1/uncertainty-flags",
                               params={"start": "2021-01-09", "end": "2021-01-13"}))
        assert [d["date"] for d in data["days"]] == ["2021-01-10T00:00:00Z"]
        assert data["days"][0]["sources"] == ["operator-flagged"]
        assert data["days"][0]["note"] == "grid maintenance"

    def test_duplicate_flag_returns_200(self, client):
        seed_dataset(client)
        payload = {"start": "2021-01-10", "end": "2021-01-11", "note": "x"}
        assert client.post("/api/v1/rare-event-flag", json=payload).status_code == 201
        resp = client.post("/api/v1/rare-event-flag", json=payload)
        assert resp.status_code == 200
        data = body(resp)
        assert data["created"] is False
        assert "notice" in data


class TestIdempotency:
    def test_replay_returns_cached_bytes(self, client):
        headers = {"Idempotency-Key": "train-once"}
        seed_dataset(client)
        first = client.post("/api/v1/train", json={}, headers=headers)
        assert first.status_code == 202
        replay = client.post("/api/v1/train", json={}, headers=headers)
        assert replay.status_code == 202
        assert replay.content == first.content
        # only one job was created by the two calls
        assert client.get("/api/v1/jobs/job-0002").status_code == 404

    def test_different_keys_run_twice(self, client):
        seed_dataset(client)
        a = client.post("/api/v1/dataset/synthetic", json={"n_days": 30, "seed": 7},
                        headers={"Idempotency-Key": "a"})
        b = client.post("/api/v1/dataset/synthetic", json={"n_days": 30, "seed": 7},
                        headers={"Idempotency-Key": "b"})
        assert a.status_code == b.status_code == 201
