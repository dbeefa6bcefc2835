"""HTTP service exposing the forecasting and active-learning engine.

Every response is a canonical JSON envelope with sorted keys and no
whitespace, so documents for immutable resources are byte-stable across
calls and suitable for golden-payload testing. Mutations are serialized;
training and cycle runs execute as background jobs polled by id.

Set GRIDCAST_FAKE_CLOCK to an RFC 3339 timestamp to make wall-clock fields
deterministic (each reading advances one second), and GRIDCAST_SYNC_JOBS=1
to run jobs inline on submission, which keeps polling sequences stable.
"""
from __future__ import annotations

import json
import os
import threading
from datetime import datetime, timedelta, timezone

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import Response

from . import active_learning as al
from .datastore import Store
from .errors import (ConfigError, DomainError, EmptyData, GridcastError,
                     InsufficientData, NotFound, ShapeError)
from .forecaster import ForecastRecord, TrainedModel, predict_span
from .metrics import MetricsReport, evaluate_records
from .synthetic import (SyntheticConfig, bundle_from_store, generate_synthetic,
                        load_bundle_into_store)
from .timeseries import ensure_utc, format_rfc3339, parse_rfc3339

API_VERSION = "1"
DAY = timedelta(days=1)


def canonical_json(doc) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


class ApiError(Exception):
    """Maps straight onto the error envelope."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _ok(data, status: int = 200) -> Response:
    body = canonical_json({"api_version": API_VERSION, "status": "ok", "data": data})
    return Response(content=body, status_code=status, media_type="application/json")


def _err(status: int, code: str, message: str) -> Response:
    body = canonical_json({"api_version": API_VERSION, "status": "error",
                           "error": {"code": code, "message": message}})
    return Response(content=body, status_code=status, media_type="application/json")


def make_clock():
    """Real UTC clock, or a fake one-second ticker when the env asks for it."""
    fake = os.environ.get("GRIDCAST_FAKE_CLOCK")
    if not fake:
        return lambda: datetime.now(timezone.utc).replace(microsecond=0)
    state = {"now": parse_rfc3339(fake)}
    lock = threading.Lock()

    def tick() -> datetime:
        with lock:
            state["now"] += timedelta(seconds=1)
            return state["now"]
    return tick


class JobRunner:
    """One background job at a time; terminal job records never change."""

    def __init__(self, clock, sync: bool):
        self.clock = clock
        self.sync = sync
        self.lock = threading.Lock()
        self.jobs: dict[str, dict] = {}
        self.active: str | None = None
        self._counter = 0

    def snapshot(self, job_id: str) -> dict:
        with self.lock:
            if job_id not in self.jobs:
                raise ApiError(404, "not-found", f"no job {job_id}")
            return json.loads(json.dumps(self.jobs[job_id]))

    def submit(self, kind: str, work) -> dict:
        """Queue `work` (returns the result doc); reject if a job is active."""
        with self.lock:
            if self.active is not None and self.jobs[self.active]["state"] in (
                    "queued", "running"):
                raise ApiError(409, "busy", "another job is already running")
            self._counter += 1
            job_id = f"job-{self._counter:04d}"
            job = {"id": job_id, "kind": kind, "state": "queued",
                   "progress": {"epoch": 0, "epoch_cap": 0},
                   "submitted_at": format_rfc3339(self.clock()),
                   "result": None, "error": None}
            self.jobs[job_id] = job
            self.active = job_id
        queued_view = json.loads(json.dumps(job))

        def on_epoch(epoch, cap, train_gnll, val_gnll):
            with self.lock:
                job["progress"] = {"epoch": epoch, "epoch_cap": cap}

        def run():
            with self.lock:
                job["state"] = "running"
            try:
                result = work(on_epoch)
            except Exception as exc:  # job errors surface via polling
                with self.lock:
                    job["state"] = "failed"
                    job["error"] = f"{type(exc).__name__}: {exc}"
            else:
                with self.lock:
                    job["state"] = "done"
                    job["result"] = result

        if self.sync:
            run()
        else:
            threading.Thread(target=run, daemon=True).start()
        return queued_view


def _report_doc(report: al.ALCycleReport) -> dict:
    return {"cycle": report.cycle, "status": report.status, "theta": report.theta,
            "queried": report.queried, "acquired": report.acquired,
            "unavailable": report.unavailable,
            "flagged_included": report.flagged_included,
            "augmented_days": report.augmented_days,
            "parent_model": report.parent_model, "child_model": report.child_model,
            "eval_start": report.eval_start, "eval_end": report.eval_end,
            "started_at": report.started_at, "wall_time_s": report.wall_time_s,
            "metrics_before": report.metrics_before.to_dict(),
            "metrics_after": report.metrics_after.to_dict(),
            "notes": report.notes}


def _policy_doc(policy: al.ThresholdPolicy) -> dict:
    return policy.to_doc()


def _comparison_rows(labels_reports: list[tuple[str, MetricsReport]]) -> dict:
    rows = [{"label": label, **report.to_dict()} for label, report in labels_reports]
    doc = {"rows": rows}
    if len(rows) == 2:
        a, b = labels_reports[0][1], labels_reports[1][1]
        doc["improvement"] = {
            "mse_pct": (a.mse - b.mse) / a.mse * 100.0 if a.mse else 0.0,
            "mae_pct": (a.mae - b.mae) / a.mae * 100.0 if a.mae else 0.0,
            "sharpness_pct": ((a.sharpness - b.sharpness) / a.sharpness * 100.0
                              if a.sharpness else 0.0),
            "picp_pp": b.picp - a.picp,
        }
    return doc


def _parse_date(text: str, name: str) -> datetime:
    try:
        if len(text) == 10:
            d = datetime.strptime(text, "%Y-%m-%d").replace(tzinfo=timezone.utc)
        else:
            d = parse_rfc3339(text)
        return ensure_utc(d)
    except (ValueError, GridcastError) as exc:
        raise ApiError(422, "validation", f"bad {name}: {text!r}") from exc


def _parse_level(raw: str | None) -> float:
    if raw is None:
        return 0.95
    try:
        level = float(raw)
    except ValueError:
        raise ApiError(422, "validation", f"level must be a number, got {raw!r}")
    if not 0 < level < 1:
        raise ApiError(422, "validation", "level must lie strictly inside (0, 1)")
    return level


async def _body_doc(request: Request) -> dict:
    raw = await request.body()
    if not raw:
        return {}
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ApiError(422, "validation", f"request body is not JSON: {exc}")
    if not isinstance(doc, dict):
        raise ApiError(422, "validation", "request body must be a JSON object")
    return doc


class ServiceState:
    def __init__(self, data_dir: str, config: al.EngineConfig | None = None,
                 clock=None):
        self.store = Store(data_dir)
        self.default_config = config or al.EngineConfig()
        self.clock = clock or make_clock()
        self.jobs = JobRunner(self.clock,
                              sync=os.environ.get("GRIDCAST_SYNC_JOBS") == "1")
        self.mutate_lock = threading.Lock()
        self.idempotency: dict[str, bytes] = {}

    def engine(self, config: al.EngineConfig | None = None) -> al.ALEngine:
        """Prefer the configuration recorded when the active model was trained."""
        if config is None:
            if self.store.has_blob("state", al.ALEngine.STATE_BLOB):
                doc = json.loads(self.store.get_blob("state", al.ALEngine.STATE_BLOB))
                config = al.EngineConfig.from_dict(doc["config"])
            else:
                config = self.default_config
        return al.ALEngine(self.store, config, clock=self.clock)

    def active_model(self) -> TrainedModel:
        engine = self.engine()
        try:
            return engine.load_model()
        except NotFound:
            raise ApiError(409, "no-model", "no trained model is active yet")


def create_app(data_dir: str, config: al.EngineConfig | None = None,
               clock=None, frontend_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="gridcast", docs_url=None, redoc_url=None,
                  openapi_url=None)
    state = ServiceState(data_dir, config, clock)
    app.state.gridcast = state

    @app.exception_handler(ApiError)
    async def api_error_handler(request, exc: ApiError):
        return _err(exc.status, exc.code, exc.message)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request, exc):
        return _err(422, "validation", str(exc))

    @app.exception_handler(GridcastError)
    async def domain_error_handler(request, exc: GridcastError):
        status = {NotFound: 404, DomainError: 422, ConfigError: 422,
                  ShapeError: 422, EmptyData: 422,
                  InsufficientData: 409}.get(type(exc), 500)
        code = {404: "not-found", 422: "validation", 409: "data-unavailable"}.get(
            status, "internal")
        return _err(status, code, f"{type(exc).__name__}: {exc}")

    def idempotent(request: Request, compute) -> Response:
        """Replay the stored response when the same Idempotency-Key returns."""
        key = request.headers.get("Idempotency-Key")
        if key:
            cached = state.idempotency.get(key)
            if cached is not None:
                status, body = json.loads(cached)
                return Response(content=body.encode("utf-8"), status_code=status,
                                media_type="application/json")
        response = compute()
        if key:
            state.idempotency[key] = json.dumps(
                [response.status_code, response.body.decode("utf-8")]).encode()
        return response

    # --- dataset ---

    @app.get("/api/v1/health")
    async def health():
        return _ok({"service": "gridcast"})

    @app.get("/api/v1/dataset")
    async def dataset_summary():
        series = {}
        for sid in state.store.list_series():
            s = state.store.get_series(sid)
            series[sid] = {"start": format_rfc3339(s.start),
                           "end": format_rfc3339(s.end), "hours": len(s),
                           "unit": s.unit}
        return _ok({"series": series})

    @app.post("/api/v1/dataset/synthetic")
    async def dataset_synthetic(request: Request):
        doc = await _body_doc(request)

        def compute():
            with state.mutate_lock:
                allowed = {f.name for f in
                           SyntheticConfig.__dataclass_fields__.values()}
                unknown = set(doc) - allowed
                if unknown:
                    raise ApiError(422, "validation",
                                   f"unknown synthetic fields: {sorted(unknown)}")
                bundle = generate_synthetic(SyntheticConfig(**doc))
                load_bundle_into_store(state.store, bundle, replace=True)
                return _ok({"series": ["load", "temperature"],
                            "start": format_rfc3339(bundle.load.start),
                            "end": format_rfc3339(bundle.load.end),
                            "hours": len(bundle.load),
                            "provenance": bundle.provenance}, status=201)
        return idempotent(request, compute)

    @app.post("/api/v1/dataset/ingest")
    async def dataset_ingest(request: Request):
        doc = await _body_doc(request)
        if "csv" not in doc or "schema" not in doc:
            raise ApiError(422, "validation", "body needs 'csv' text and 'schema' map")

        def compute():
            with state.mutate_lock:
                schema = {col: (m["series"], m.get("unit", ""))
                          for col, m in doc["schema"].items()}
                report = state.store.ingest_csv(doc["csv"], schema)
                return _ok({"series": report.series_ids,
                            "rows_read": report.rows_read,
                            "stored": report.stored_counts,
                            "interpolated": report.interpolated}, status=201)
        return idempotent(request, compute)

    # --- model & training ---

    @app.post("/api/v1/train")
    async def train_endpoint(request: Request):
        doc = await _body_doc(request)

        def compute():
            with state.mutate_lock:
                config = (al.EngineConfig.from_dict(doc["config"])
                          if "config" in doc else state.default_config)
                engine = state.engine(config)
                engine._spans()  # surface missing/short data before queueing

                def work(on_epoch):
                    model = engine.train_initial(on_epoch=on_epoch)
                    return {"model_id": model.model_id}
                return _ok(state.jobs.submit("train", work), status=202)
        return idempotent(request, compute)

    @app.get("/api/v1/model")
    async def model_info():
        model = state.active_model()
        engine_state = state.engine().state()
        return _ok({"model_id": model.model_id,
                    "hyperparams": model.hyperparams.to_dict(),
                    "provenance": model.provenance,
                    "best_epoch": model.training_log.get("best_epoch"),
                    "best_val_gnll": model.training_log.get("best_val_gnll"),
                    "cycles_run": engine_state["cycles_run"],
                    "training_days": len(engine_state["training_days"])})

    @app.get("/api/v1/jobs/{job_id}")
    async def job_status(job_id: str):
        return _ok(state.jobs.snapshot(job_id))

    # --- forecasts ---

    @app.get("/api/v1/forecast")
    async def get_forecast(request: Request):
        params = request.query_params
        if "date" not in params:
            raise ApiError(422, "validation", "query parameter 'date' is required")
        date = _parse_date(params["date"], "date")
        level = _parse_level(params.get("level"))
        model = state.active_model()
        engine = state.engine()
        theta = engine.load_policy().theta

        name = f"{engine.config.series_id}_{date:%Y-%m-%dT%H%M}.json"
        if state.store.has_blob("forecasts", name):
            record = ForecastRecord.from_bytes(state.store.get_blob("forecasts", name))
            if record.level != level:
                record = record.with_level(level)
        else:
            hp = model.hyperparams
            history = timedelta(hours=hp.history_horizon)
            try:
                bundle = bundle_from_store(state.store, date - history, date + DAY)
            except (NotFound, DomainError) as exc:
                raise ApiError(404, "data-unavailable",
                               f"no stored context to forecast {params['date']}: {exc}")
            record = predict_span(model, bundle, date, n_days=1, level=level)[0]
        return _ok({"record": record.to_doc(), "model_id": record.model_id or
                    model.model_id, "theta": theta})

    @app.get("/api/v1/uncertainty-flags")
    async def uncertainty_flags(request: Request):
        params = request.query_params
        for required in ("start", "end"):
            if required not in params:
                raise ApiError(422, "validation",
                               f"query parameter '{required}' is required")
        start = _parse_date(params["start"], "start")
        end = _parse_date(params["end"], "end")
        if end <= start:
            raise ApiError(422, "validation", "date range is reversed or empty")
        engine = state.engine()
        theta = engine.load_policy().theta

        flagged: dict[str, dict] = {}
        for record in engine.forecast_archive(start, end):
            max_sigma = float(max(record.sigma))
            if max_sigma > theta:
                day = format_rfc3339(record.issue_time)
                flagged[day] = {"date": day, "max_sigma": max_sigma,
                                "theta": theta, "sources": ["uncertainty"]}
        for doc in engine.list_flags():
            lo = al.day_of(parse_rfc3339(doc["start"]))
            hi = parse_rfc3339(doc["end"])
            d = lo
            while d < hi:
                if start <= d < end:
                    day = format_rfc3339(d)
                    entry = flagged.setdefault(
                        day, {"date": day, "max_sigma": None, "theta": theta,
                              "sources": []})
                    if "operator-flagged" not in entry["sources"]:
                        entry["sources"].append("operator-flagged")
                        entry["note"] = doc["note"]
                d += DAY
        days = [flagged[k] for k in sorted(flagged)]
        return _ok({"theta": theta, "start": format_rfc3339(start),
                    "end": format_rfc3339(end), "days": days})

    # --- threshold ---

    @app.get("/api/v1/threshold")
    async def get_threshold():
        return _ok(_policy_doc(state.engine().load_policy()))

    @app.post("/api/v1/threshold")
    async def post_threshold(request: Request):
        doc = await _body_doc(request)
        if "theta" not in doc:
            raise ApiError(422, "validation", "body needs 'theta'")
        try:
            theta = float(doc["theta"])
        except (TypeError, ValueError):
            raise ApiError(422, "validation", "theta must be a number")
        rationale = str(doc.get("rationale", ""))
        actor = str(doc.get("actor", "api"))
        with state.mutate_lock:  # appends are serialized, every one recorded
            policy = state.engine().set_theta(theta, rationale, actor)
        return _ok(_policy_doc(policy))

    # --- active learning ---

    @app.post("/api/v1/al/cycle")
    async def post_cycle(request: Request):
        def compute():
            with state.mutate_lock:
                engine = state.engine()
                try:
                    engine.state()
                except NotFound:
                    raise ApiError(409, "no-model", "train a model before cycling")

                def work(on_epoch):
                    report = engine.run_cycle(on_epoch=on_epoch)
                    return _report_doc(report)
                return _ok(state.jobs.submit("al_cycle", work), status=202)
        return idempotent(request, compute)

    @app.get("/api/v1/cycles")
    async def list_cycles():
        engine = state.engine()
        out = []
        for index in engine.list_cycles():
            report = engine.load_cycle(index)
            out.append({"cycle": report.cycle, "status": report.status,
                        "theta": report.theta, "queried": report.queried,
                        "child_model": report.child_model,
                        "started_at": report.started_at})
        return _ok({"cycles": out})

    @app.get("/api/v1/cycles/{index}")
    async def get_cycle(index: int):
        engine = state.engine()
        try:
            report = engine.load_cycle(index)
        except NotFound:
            raise ApiError(404, "not-found", f"no cycle {index}")
        return _ok(_report_doc(report))

    @app.get("/api/v1/metrics/comparison")
    async def metrics_comparison(request: Request):
        params = request.query_params
        engine = state.engine()
        if "cycle" in params:
            try:
                index = int(params["cycle"])
            except ValueError:
                raise ApiError(422, "validation", "cycle must be an integer")
            try:
                report = engine.load_cycle(index)
            except NotFound:
                raise ApiError(404, "not-found", f"no cycle {index}")
            doc = _comparison_rows([("before", report.metrics_before),
                                    ("after", report.metrics_after)])
            doc.update({"cycle": report.cycle, "parent_model": report.parent_model,
                        "child_model": report.child_model})
            return _ok(doc)
        if "models" in params:
            ids = [m for m in params["models"].split(",") if m]
            if not ids:
                raise ApiError(422, "validation", "models list is empty")
            d0, t1, q1, e1 = engine._spans()
            bundle = bundle_from_store(state.store, d0, e1)
            actuals = bundle.load.values[-engine.config.eval_days * 24:]
            rows = []
            for model_id in ids:
                try:
                    model = engine.load_model(model_id)
                except NotFound:
                    raise ApiError(404, "not-found", f"no model {model_id}")
                records = predict_span(model, bundle, q1,
                                       n_days=engine.config.eval_days,
                                       level=engine.config.level)
                rows.append((model_id, evaluate_records(records, actuals)))
            doc = _comparison_rows(rows)
            doc.update({"eval_start": format_rfc3339(q1),
                        "eval_end": format_rfc3339(e1)})
            return _ok(doc)
        raise ApiError(422, "validation", "pass ?cycle=N or ?models=a,b")

    # --- rare events ---

    @app.get("/api/v1/rare-event-flags")
    async def list_rare_flags():
        return _ok({"flags": state.engine().list_flags()})

    @app.post("/api/v1/rare-event-flag")
    async def post_rare_flag(request: Request):
        doc = await _body_doc(request)
        for required in ("start", "end"):
            if required not in doc:
                raise ApiError(422, "validation", f"body needs '{required}'")
        start = _parse_date(str(doc["start"]), "start")
        end = _parse_date(str(doc["end"]), "end")
        note = str(doc.get("note", ""))
        actor = str(doc.get("actor", "api"))

        def compute():
            with state.mutate_lock:
                flag, created = state.engine().flag_rare_event(start, end, note, actor)
                data = {"flag": flag, "created": created}
                if not created:
                    data["notice"] = "identical range already flagged; no new entry"
                return _ok(data, status=201 if created else 200)
        return idempotent(request, compute)

    if frontend_dir and os.path.isdir(frontend_dir):
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="console")

    return app
