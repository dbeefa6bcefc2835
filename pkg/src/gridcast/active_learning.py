"""Uncertainty-sampling active learning over the forecast archive.

One cycle runs predict -> store -> select -> acquire -> augment -> retrain
-> evaluate. Query selection keeps forecast steps whose sigma strictly
exceeds the operator threshold theta (in MW); augmentation deduplicates the
queried steps into whole days, adds those day windows at sample weight 2.0,
and warm-starts retraining from the parent weights for half the epoch cap.
All engine state changes commit atomically at the end of a successful cycle.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone

import numpy as np

from .datastore import Store
from .errors import (ConfigError, DomainError, EmptyData, InsufficientData,
                     NothingToLearn, NotFound, ShapeError)
from .features import Split, WindowSample, make_windows, windows_for_days
from .forecaster import (ForecastRecord, Hyperparams, TrainedModel, predict_span,
                         train)
from .metrics import MetricsReport, evaluate_records
from .synthetic import bundle_from_store
from .timeseries import HOUR, ensure_utc, format_rfc3339, parse_rfc3339

DEFAULT_THETA = 1000.0  # MW, operator-adjustable
DAY = timedelta(days=1)


def _utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def day_of(ts: datetime) -> datetime:
    ts = ensure_utc(ts)
    return ts.replace(hour=0, minute=0, second=0, microsecond=0)


# --- threshold lifecycle ---


@dataclass
class ThresholdEvent:
    at: datetime
    theta: float
    set_by: str
    rationale: str

    def to_doc(self) -> dict:
        return {"at": format_rfc3339(self.at), "theta": self.theta,
                "set_by": self.set_by, "rationale": self.rationale}

    @classmethod
    def from_doc(cls, doc: dict) -> "ThresholdEvent":
        return cls(at=parse_rfc3339(doc["at"]), theta=float(doc["theta"]),
                   set_by=str(doc["set_by"]), rationale=str(doc["rationale"]))


@dataclass
class ThresholdPolicy:
    """Active theta plus an append-only audit trail of every change."""

    theta: float = DEFAULT_THETA
    set_by: str = "default"
    history: list[ThresholdEvent] = field(default_factory=list)

    @classmethod
    def initial(cls, theta: float = DEFAULT_THETA,
                at: datetime | None = None) -> "ThresholdPolicy":
        at = at or _utc_now()
        if theta <= 0:
            raise DomainError("theta must be positive")
        return cls(theta=theta, set_by="default",
                   history=[ThresholdEvent(at, theta, "default", "initial value")])

    def to_doc(self) -> dict:
        return {"theta": self.theta, "set_by": self.set_by,
                "history": [e.to_doc() for e in self.history]}

    @classmethod
    def from_doc(cls, doc: dict) -> "ThresholdPolicy":
        return cls(theta=float(doc["theta"]), set_by=str(doc["set_by"]),
                   history=[ThresholdEvent.from_doc(e) for e in doc["history"]])

    def history_csv(self) -> str:
        lines = ["timestamp,theta,set_by,rationale"]
        for e in self.history:
            rationale = e.rationale.replace('"', '""')
            lines.append(f'{format_rfc3339(e.at)},{e.theta!r},{e.set_by},"{rationale}"')
        return "\n".join(lines) + "\n"


def update_threshold(policy: ThresholdPolicy, new_theta: float, rationale: str,
                     actor: str, at: datetime | None = None) -> ThresholdPolicy:
    """Append to the audit trail and swap the active theta."""
    if not np.isfinite(new_theta) or new_theta <= 0:
        raise DomainError(f"theta must be positive and finite, got {new_theta}")
    policy.history.append(
        ThresholdEvent(at or _utc_now(), float(new_theta), actor, rationale))
    policy.theta = float(new_theta)
    policy.set_by = actor
    return policy


# --- query selection & acquisition ---


@dataclass
class QuerySet:
    """Forecast steps whose sigma strictly exceeded theta, sorted by time."""

    timestamps: list[datetime]
    sigmas: np.ndarray
    theta_used: float

    def __len__(self):
        return len(self.timestamps)

    def days(self) -> list[datetime]:
        return sorted({day_of(ts) for ts in self.timestamps})


def select_queries(archive: list[ForecastRecord], policy: ThresholdPolicy | float,
                   exclude_days: set[datetime] | None = None) -> QuerySet:
    """Keep the steps Q = {t | sigma_t > theta}, strict, over the archive.

    Steps whose day is already part of the training set are excluded via
    `exclude_days`. Duplicate timestamps across records resolve to the
    latest record in archive order.
    """
    if not archive:
        raise EmptyData("forecast archive is empty")
    theta = policy.theta if isinstance(policy, ThresholdPolicy) else float(policy)
    exclude = {day_of(d) for d in (exclude_days or set())}
    hits: dict[datetime, float] = {}
    for record in archive:
        for ts, sigma in zip(record.timestamps(), record.sigma):
            if day_of(ts) in exclude:
                continue
            if sigma > theta:
                hits[ts] = float(sigma)
            else:
                hits.pop(ts, None)  # a later record may lower sigma below theta
    ordered = sorted(hits)
    return QuerySet(timestamps=ordered,
                    sigmas=np.array([hits[ts] for ts in ordered]),
                    theta_used=theta)


def acquire_actuals(queries: QuerySet, store: Store, series_id: str = "load"
                    ) -> tuple[list[tuple[datetime, float]], list[datetime]]:
    """(timestamp, actual) for every available query; the rest listed, not dropped."""
    if not queries.timestamps:
        return [], []
    series = store.get_series(series_id)
    labeled: list[tuple[datetime, float]] = []
    unavailable: list[datetime] = []
    for ts in queries.timestamps:
        if series.start <= ts < series.end:
            labeled.append((ts, float(series.values[series.index_of(ts)])))
        else:
            unavailable.append(ts)
    return labeled, unavailable


def augment_and_retrain(parent: TrainedModel, base_train: list[WindowSample],
                        base_val: list[WindowSample],
                        new_windows: list[WindowSample],
                        hp: Hyperparams | None = None, *,
                        full_retrain: bool = False,
                        provenance: dict | None = None,
                        on_epoch=None) -> TrainedModel:
    """Retrain with queried-day windows added at sample weight 2.0.

    Warm-starts from the parent weights for max_epochs/2 epochs unless
    `full_retrain` asks for a from-scratch fit over the full cap.
    """
    if not new_windows:
        raise NothingToLearn("no new complete windows to augment with")
    hp = hp or parent.hyperparams
    for w in new_windows:
        w.weight = 2.0
    prov = {"parent": parent.model_id,
            "augmented_days": [format_rfc3339(w.day_start) for w in new_windows]}
    prov.update(provenance or {})
    return train(list(base_train) + list(new_windows), base_val, hp, parent.scaler,
                 initial_weights=None if full_retrain else parent.weights,
                 max_epochs=hp.max_epochs if full_retrain else max(1, hp.max_epochs // 2),
                 provenance=prov, on_epoch=on_epoch)


def sweep_thetas(archive: list[ForecastRecord], thetas: list[float],
                 exclude_days: set[datetime] | None = None) -> list[tuple[float, int]]:
    """Queried step count per candidate theta (sensitivity table)."""
    return [(float(t), len(select_queries(archive, float(t), exclude_days)))
            for t in thetas]


# --- cycle report ---


@dataclass
class ALCycleReport:
    cycle: int
    status: str                       # "retrained" or "no-op"
    theta: float
    queried: int
    acquired: int
    unavailable: int
    flagged_included: int
    augmented_days: list[str]
    parent_model: str
    child_model: str
    eval_start: str
    eval_end: str
    started_at: str
    wall_time_s: float
    metrics_before: MetricsReport
    metrics_after: MetricsReport
    notes: list[str] = field(default_factory=list)

    def blob_name(self) -> str:
        return f"cycle_{self.cycle:04d}.txt"

    def to_text(self) -> str:
        """Key-value header plus a metrics CSV block."""
        lines = [
            f"cycle: {self.cycle}",
            f"status: {self.status}",
            f"theta: {self.theta!r}",
            f"queried: {self.queried}",
            f"acquired: {self.acquired}",
            f"unavailable: {self.unavailable}",
            f"flagged_included: {self.flagged_included}",
            f"augmented_days: {json.dumps(self.augmented_days)}",
            f"parent_model: {self.parent_model}",
            f"child_model: {self.child_model}",
            f"eval_start: {self.eval_start}",
            f"eval_end: {self.eval_end}",
            f"started_at: {self.started_at}",
            f"wall_time_s: {self.wall_time_s!r}",
            f"notes: {json.dumps(self.notes)}",
            "[metrics]",
            "phase," + MetricsReport.CSV_HEADER,
            "before," + self.metrics_before.to_csv_row(),
            "after," + self.metrics_after.to_csv_row(),
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ALCycleReport":
        head, _, block = text.partition("[metrics]")
        kv: dict[str, str] = {}
        for line in head.strip().splitlines():
            key, _, value = line.partition(":")
            kv[key.strip()] = value.strip()
        rows = [r for r in block.strip().splitlines() if r and not r.startswith("phase,")]
        metrics = {}
        for row in rows:
            phase, _, rest = row.partition(",")
            metrics[phase] = MetricsReport.from_csv_row(rest)
        try:
            return cls(
                cycle=int(kv["cycle"]), status=kv["status"], theta=float(kv["theta"]),
                queried=int(kv["queried"]), acquired=int(kv["acquired"]),
                unavailable=int(kv["unavailable"]),
                flagged_included=int(kv["flagged_included"]),
                augmented_days=json.loads(kv["augmented_days"]),
                parent_model=kv["parent_model"], child_model=kv["child_model"],
                eval_start=kv["eval_start"], eval_end=kv["eval_end"],
                started_at=kv["started_at"], wall_time_s=float(kv["wall_time_s"]),
                metrics_before=metrics["before"], metrics_after=metrics["after"],
                notes=json.loads(kv["notes"]))
        except KeyError as exc:
            raise ShapeError(f"cycle report missing field {exc}") from exc


# --- engine ---


@dataclass
class EngineConfig:
    """Span layout over the stored series plus training configuration.

    The stored series splits into [initial training | query span | eval
    span] measured in whole days from the series start; the eval span is
    never trained on, including by augmentation.
    """

    series_id: str = "load"
    train_days: int = 88
    query_days: int = 16
    eval_days: int = 16
    level: float = 0.95
    warm_start: bool = True
    hyperparams: Hyperparams = field(default_factory=Hyperparams)

    def validate(self) -> None:
        if min(self.train_days, self.query_days, self.eval_days) <= 0:
            raise ConfigError("all span lengths must be positive")
        if not 0 < self.level < 1:
            raise ConfigError("interval level must lie in (0, 1)")
        self.hyperparams.validate()
        history_days = self.hyperparams.history_horizon // 24
        if self.train_days < history_days + 2:
            raise ConfigError("training span shorter than one window plus a target")

    def to_dict(self) -> dict:
        return {"series_id": self.series_id, "train_days": self.train_days,
                "query_days": self.query_days, "eval_days": self.eval_days,
                "level": self.level, "warm_start": self.warm_start,
                "hyperparams": self.hyperparams.to_dict()}

    @classmethod
    def from_dict(cls, doc: dict) -> "EngineConfig":
        doc = dict(doc)
        hp = doc.pop("hyperparams", {})
        return cls(hyperparams=Hyperparams.from_dict(hp), **doc)


def _canonical(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("ascii")


class ALEngine:
    """Owns engine state in the store: active model, manifest, policy, cycles.

    A cycle mutates nothing until its final commit: the child model and the
    report are written as new blobs first, and the state document swap is
    the single commit point. Any failure before that leaves the active
    model, training manifest, and theta history untouched.
    """

    STATE_BLOB = "engine.json"
    POLICY_BLOB = "policy.json"

    def __init__(self, store: Store, config: EngineConfig, clock=None):
        config.validate()
        self.store = store
        self.config = config
        self.clock = clock or _utc_now

    # --- persistence helpers ---

    def _spans(self) -> tuple[datetime, datetime, datetime, datetime]:
        series = self.store.get_series(self.config.series_id)
        d0 = series.start
        need = (self.config.train_days + self.config.query_days
                + self.config.eval_days) * 24
        if len(series) < need:
            raise InsufficientData(
                f"series holds {len(series)} hours, layout needs {need}")
        t1 = d0 + self.config.train_days * DAY
        q1 = t1 + self.config.query_days * DAY
        e1 = q1 + self.config.eval_days * DAY
        return d0, t1, q1, e1

    def load_policy(self) -> ThresholdPolicy:
        if not self.store.has_blob("policy", self.POLICY_BLOB):
            policy = ThresholdPolicy.initial(at=self.clock())
            self.save_policy(policy)
            return policy
        return ThresholdPolicy.from_doc(
            json.loads(self.store.get_blob("policy", self.POLICY_BLOB)))

    def save_policy(self, policy: ThresholdPolicy) -> None:
        self.store.put_blob("policy", self.POLICY_BLOB, _canonical(policy.to_doc()))

    def set_theta(self, value: float, rationale: str, actor: str) -> ThresholdPolicy:
        policy = self.load_policy()
        update_threshold(policy, value, rationale, actor, at=self.clock())
        self.save_policy(policy)
        return policy

    def state(self) -> dict:
        if not self.store.has_blob("state", self.STATE_BLOB):
            raise NotFound("engine has no state yet; train an initial model first")
        return json.loads(self.store.get_blob("state", self.STATE_BLOB))

    def _save_state(self, state: dict) -> None:
        self.store.put_blob("state", self.STATE_BLOB, _canonical(state))

    def load_model(self, model_id: str | None = None) -> TrainedModel:
        model_id = model_id or self.state()["active_model"]
        return TrainedModel.from_bytes(self.store.get_blob("models", f"{model_id}.json"))

    def _save_model(self, model: TrainedModel) -> str:
        model_id = model.model_id
        self.store.put_blob("models", f"{model_id}.json", model.to_bytes())
        return model_id

    # --- bootstrap ---

    def train_initial(self, on_epoch=None) -> TrainedModel:
        """Fit the first model on the initial training span and commit state."""
        d0, t1, _, e1 = self._spans()
        bundle = bundle_from_store(self.store, d0, t1)
        model = train(*self._base_windows(bundle), self.config.hyperparams,
                      self._fit_scaler(bundle),
                      provenance=self._bundle_provenance(bundle), on_epoch=on_epoch)
        model_id = self._save_model(model)
        manifest = [format_rfc3339(d0 + i * DAY) for i in range(self.config.train_days)]
        self._save_state({"active_model": model_id, "cycles_run": 0,
                          "training_days": manifest,
                          "config": self.config.to_dict()})
        self.load_policy()  # materialize the default policy alongside
        return model

    def _fit_scaler(self, bundle):
        hp = self.config.hyperparams
        split = self._base_split()
        _, scaler = make_windows(bundle, hp.history_horizon, hp.forecast_horizon,
                                 split, use_future_weather=hp.use_future_weather,
                                 stride_hours=hp.history_horizon)  # scaler fit only
        return scaler

    def _base_split(self) -> Split:
        hp = self.config.hyperparams
        from .features import chronological_split
        return chronological_split(self.config.train_days, hp.history_horizon // 24,
                                   test_days=0, val_fraction=hp.val_fraction)

    def _base_windows(self, bundle, scaler=None):
        hp = self.config.hyperparams
        windows, scaler = make_windows(bundle, hp.history_horizon, hp.forecast_horizon,
                                       self._base_split(), scaler=scaler,
                                       use_future_weather=hp.use_future_weather,
                                       stride_hours=hp.train_stride_hours)
        return windows["train"], windows["val"]

    def _bundle_provenance(self, bundle) -> dict:
        return {"series_id": self.config.series_id,
                "data_start": format_rfc3339(bundle.load.start),
                "data_end": format_rfc3339(bundle.load.end),
                "seed": self.config.hyperparams.seed}

    # --- rare-event flags ---

    def flag_rare_event(self, start: datetime, end: datetime, note: str,
                        actor: str) -> tuple[dict, bool]:
        """Annotate a range for forced augmentation; returns (doc, created)."""
        start, end = ensure_utc(start), ensure_utc(end)
        if end <= start:
            raise DomainError("flag range must have end after start")
        series = self.store.get_series(self.config.series_id)
        if start < series.start or end > series.end:
            raise DomainError("flag range must lie within stored data")
        for name in self.store.list_blobs("annotations"):
            doc = json.loads(self.store.get_blob("annotations", name))
            if doc["start"] == format_rfc3339(start) and doc["end"] == format_rfc3339(end):
                return doc, False  # identical range already flagged
        n = len(self.store.list_blobs("annotations")) + 1
        doc = {"id": f"flag-{n:04d}", "start": format_rfc3339(start),
               "end": format_rfc3339(end), "note": note, "actor": actor,
               "created_at": format_rfc3339(self.clock())}
        self.store.put_blob("annotations", f"{doc['id']}.json", _canonical(doc))
        return doc, True

    def list_flags(self) -> list[dict]:
        return [json.loads(self.store.get_blob("annotations", name))
                for name in self.store.list_blobs("annotations")]

    def _flagged_days(self, q0: datetime, q1: datetime) -> list[datetime]:
        days: set[datetime] = set()
        for doc in self.list_flags():
            lo = day_of(parse_rfc3339(doc["start"]))
            hi = parse_rfc3339(doc["end"])
            d = lo
            while d < hi:
                if q0 <= d < q1:
                    days.add(d)
                d += DAY
        return sorted(days)

    # --- forecasting views ---

    def forecast_archive(self, start: datetime | None = None,
                         end: datetime | None = None) -> list[ForecastRecord]:
        """Stored forecast records for the series, optionally time-filtered."""
        prefix = f"{self.config.series_id}_"
        records = []
        for name in self.store.list_blobs("forecasts"):
            if not name.startswith(prefix):
                continue
            record = ForecastRecord.from_bytes(self.store.get_blob("forecasts", name))
            if start is not None and record.issue_time < ensure_utc(start):
                continue
            if end is not None and record.issue_time >= ensure_utc(end):
                continue
            records.append(record)
        records.sort(key=lambda r: r.issue_time)
        return records

    # --- the cycle ---

    def run_cycle(self, on_epoch=None) -> ALCycleReport:
        """One uncertainty-sampling pass; commits atomically, propagates any failure."""
        started = self.clock()
        state = self.state()
        policy = self.load_policy()
        parent = self.load_model(state["active_model"])
        cfg = self.config
        hp = cfg.hyperparams
        d0, t1, q1, e1 = self._spans()
        cycle_index = state["cycles_run"] + 1
        manifest = {day_of(parse_rfc3339(d)) for d in state["training_days"]}

        bundle_all = bundle_from_store(self.store, d0, e1)
        archive = predict_span(parent, bundle_all, t1, n_days=cfg.query_days,
                               level=cfg.level, store=self.store)
        eval_days = cfg.eval_days
        actuals = bundle_all.load.values[-eval_days * 24:]
        before_records = predict_span(parent, bundle_all, q1, n_days=eval_days,
                                      level=cfg.level)
        before = evaluate_records(before_records, actuals)

        queries = select_queries(archive, policy, exclude_days=manifest)
        labeled, unavailable = acquire_actuals(queries, self.store, cfg.series_id)
        queried_days = sorted({day_of(ts) for ts, _ in labeled})
        flagged = [d for d in self._flagged_days(t1, q1)
                   if d not in manifest and d not in queried_days]
        augment_days = sorted(set(queried_days) | set(flagged))

        notes = []
        if unavailable:
            notes.append(f"{len(unavailable)} queried timestamps unavailable in store")
        if flagged:
            notes.append(f"{len(flagged)} flagged days force-included")

        report_base = dict(
            cycle=cycle_index, theta=policy.theta, queried=len(queries),
            acquired=len(labeled), unavailable=len(unavailable),
            flagged_included=len(flagged),
            augmented_days=[format_rfc3339(d) for d in augment_days],
            parent_model=parent.model_id,
            eval_start=format_rfc3339(q1), eval_end=format_rfc3339(e1),
            started_at=format_rfc3339(started),
        )

        if not augment_days:
            notes.append("no queries above theta; model unchanged")
            report = ALCycleReport(status="no-op", child_model=parent.model_id,
                                   wall_time_s=(self.clock() - started).total_seconds(),
                                   metrics_before=before, metrics_after=before,
                                   notes=notes, **report_base)
            self.store.put_blob("cycles", report.blob_name(),
                                report.to_text().encode("utf-8"))
            state["cycles_run"] = cycle_index
            self._save_state(state)
            return report

        base_bundle = bundle_from_store(self.store, d0, t1)
        base_train, base_val = self._base_windows(base_bundle, scaler=parent.scaler)
        context_bundle = bundle_from_store(self.store, d0, q1)
        new_windows = windows_for_days(
            context_bundle, hp.history_horizon, hp.forecast_horizon, parent.scaler,
            augment_days, use_future_weather=hp.use_future_weather)
        child = augment_and_retrain(
            parent, base_train, base_val, new_windows, hp,
            full_retrain=not cfg.warm_start,
            provenance={**self._bundle_provenance(context_bundle),
                        "cycle": cycle_index})

        after_records = predict_span(child, bundle_all, q1, n_days=eval_days,
                                     level=cfg.level)
        after = evaluate_records(after_records, actuals)

        # commit: new blobs first, state swap last
        child_id = self._save_model(child)
        report = ALCycleReport(status="retrained", child_model=child_id,
                               wall_time_s=(self.clock() - started).total_seconds(),
                               metrics_before=before, metrics_after=after,
                               notes=notes, **report_base)
        self.store.put_blob("cycles", report.blob_name(),
                            report.to_text().encode("utf-8"))
        state["active_model"] = child_id
        state["cycles_run"] = cycle_index
        state["training_days"] = sorted(set(state["training_days"])
                                        | {format_rfc3339(d) for d in augment_days})
        self._save_state(state)
        return report

    def load_cycle(self, index: int) -> ALCycleReport:
        name = f"cycle_{index:04d}.txt"
        return ALCycleReport.from_text(
            self.store.get_blob("cycles", name).decode("utf-8"))

    def list_cycles(self) -> list[int]:
        out = []
        for name in self.store.list_blobs("cycles"):
            if name.startswith("cycle_") and name.endswith(".txt"):
                out.append(int(name[6:10]))
        return sorted(out)
