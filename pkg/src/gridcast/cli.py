"""Command-line interface mirroring the HTTP API one-to-one.

Every command works against the file-backed store in --data-dir (or
GRIDCAST_DATA_DIR), so the whole pipeline is drivable headless. Tabular
output switches to CSV with --csv for plotting.
"""
from __future__ import annotations

import json
import sys
from datetime import datetime, timedelta, timezone

import click
import numpy as np

from . import active_learning as al
from .baselines import fit_ar, forecast_ar, seasonal_naive
from .datastore import Store
from .errors import GridcastError
from .forecaster import Hyperparams, predict_span
from .metrics import MetricsReport, evaluate_records, point_metrics
from .synthetic import (SyntheticConfig, bundle_from_store, generate_synthetic,
                        load_bundle_into_store)
from .timeseries import format_rfc3339, parse_rfc3339

DAY = timedelta(days=1)


def _parse_date(text: str) -> datetime:
    if len(text) == 10:
        return datetime.strptime(text, "%Y-%m-%d").replace(tzinfo=timezone.utc)
    return parse_rfc3339(text)


def _parse_span(text: str) -> tuple[datetime, datetime]:
    try:
        lo, hi = text.split(":", 1)
        start, end = _parse_date(lo), _parse_date(hi)
    except ValueError as exc:
        raise click.BadParameter(f"span must be START:END dates, got {text!r}") from exc
    if end <= start:
        raise click.BadParameter("span end must come after start")
    return start, end


def _engine(ctx) -> al.ALEngine:
    store = ctx.obj["store"]
    if store.has_blob("state", al.ALEngine.STATE_BLOB):
        doc = json.loads(store.get_blob("state", al.ALEngine.STATE_BLOB))
        return al.ALEngine(store, al.EngineConfig.from_dict(doc["config"]))
    return al.ALEngine(store, al.EngineConfig())


def _echo_report(report: MetricsReport, as_csv: bool) -> None:
    if as_csv:
        click.echo(MetricsReport.CSV_HEADER)
        click.echo(report.to_csv_row())
    else:
        click.echo(report.to_kv())


@click.group()
@click.option("--data-dir", envvar="GRIDCAST_DATA_DIR", default="./gridcast-data",
              show_default=True, help="Store directory (env GRIDCAST_DATA_DIR).")
@click.pass_context
def main(ctx, data_dir):
    """Day-ahead probabilistic load forecasting with operator-driven retraining."""
    ctx.ensure_object(dict)
    ctx.obj["data_dir"] = data_dir
    ctx.obj["store"] = Store(data_dir)


def _handle(fn):
    """Convert domain errors into clean CLI failures."""
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except GridcastError as exc:
            raise click.ClickException(f"{type(exc).__name__}: {exc}")
    return wrapper


@main.command()
@click.argument("csv_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--schema", required=True,
              help="Column map, e.g. 'mw=load:MW,temp_c=temperature:degC'.")
@click.pass_context
@_handle
def ingest(ctx, csv_path, schema):
    """Ingest an RFC 3339 CSV file into the store."""
    mapping = {}
    for part in schema.split(","):
        col, _, target = part.partition("=")
        series, _, unit = target.partition(":")
        if not col or not series:
            raise click.BadParameter(f"bad schema entry {part!r}")
        mapping[col.strip()] = (series.strip(), unit.strip())
    with open(csv_path, "r", encoding="utf-8") as fh:
        report = ctx.obj["store"].ingest_csv(fh.read(), mapping)
    click.echo(f"read {report.rows_read} rows into {', '.join(report.series_ids)}")
    for sid, n in sorted(report.stored_counts.items()):
        extra = report.interpolated.get(sid, 0)
        click.echo(f"  {sid}: {n} points" + (f" ({extra} interpolated)" if extra else ""))


@main.command()
@click.option("--days", default=120, show_default=True, type=int)
@click.option("--seed", envvar="GRIDCAST_SEED", default=1, show_default=True, type=int)
@click.option("--rare-events", default=2, show_default=True, type=int)
@click.pass_context
@_handle
def synth(ctx, days, seed, rare_events):
    """Generate the synthetic load/weather dataset into the store."""
    bundle = generate_synthetic(SyntheticConfig(n_days=days, seed=seed,
                                                rare_event_count=rare_events))
    load_bundle_into_store(ctx.obj["store"], bundle, replace=True)
    click.echo(f"stored {len(bundle.load)} hourly points per series "
               f"({format_rfc3339(bundle.load.start)} .. {format_rfc3339(bundle.load.end)})")
    for start, end in bundle.provenance.get("rare_events", []):
        click.echo(f"  rare event: {start} .. {end}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON file with span layout and hyperparameters.")
@click.option("--seed", envvar="GRIDCAST_SEED", default=None, type=int,
              help="Override the training seed.")
@click.option("--csv", "as_csv", is_flag=True, help="Emit the epoch log as CSV.")
@click.pass_context
@_handle
def train(ctx, config_path, seed, as_csv):
    """Fit the initial model on the training span and activate it."""
    if config_path:
        with open(config_path, "r", encoding="utf-8") as fh:
            config = al.EngineConfig.from_dict(json.load(fh))
    else:
        config = al.EngineConfig()
    if seed is not None:
        config.hyperparams = Hyperparams.from_dict(
            {**config.hyperparams.to_dict(), "seed": seed})
    engine = al.ALEngine(ctx.obj["store"], config)

    def on_epoch(epoch, cap, train_gnll, val_gnll):
        if not as_csv:
            click.echo(f"epoch {epoch}/{cap}  train {train_gnll:.4f}  val {val_gnll:.4f}")
    model = engine.train_initial(on_epoch=on_epoch)
    if as_csv:
        click.echo("epoch,train_gnll,val_gnll")
        for row in model.training_log["epochs"]:
            click.echo(f"{row['epoch']},{row['train_gnll']!r},{row['val_gnll']!r}")
    click.echo(f"model {model.model_id} active "
               f"(best epoch {model.training_log['best_epoch']}, "
               f"val {model.training_log['best_val_gnll']:.4f})")


@main.command()
@click.option("--date", required=True, help="Target day, YYYY-MM-DD.")
@click.option("--level", default=0.95, show_default=True, type=float)
@click.option("--csv", "as_csv", is_flag=True)
@click.pass_context
@_handle
def forecast(ctx, date, level, as_csv):
    """Day-ahead forecast with a central interval at --level."""
    engine = _engine(ctx)
    model = engine.load_model()
    day = _parse_date(date)
    hp = model.hyperparams
    bundle = bundle_from_store(ctx.obj["store"], day - timedelta(hours=hp.history_horizon),
                               day + DAY)
    record = predict_span(model, bundle, day, n_days=1, level=level)[0]
    if as_csv:
        click.echo("timestamp,mu,sigma,lower,upper")
        for i, ts in enumerate(record.timestamps()):
            click.echo(f"{format_rfc3339(ts)},{float(record.mu[i])!r},"
                       f"{float(record.sigma[i])!r},{float(record.lower[i])!r},"
                       f"{float(record.upper[i])!r}")
    else:
        click.echo(f"forecast {date} model {record.model_id} level {level}")
        for i, ts in enumerate(record.timestamps()):
            click.echo(f"  {ts:%H:%M}  mu {record.mu[i]:9.1f}  sigma {record.sigma[i]:7.1f}"
                       f"  [{record.lower[i]:9.1f}, {record.upper[i]:9.1f}] MW")


@main.command()
@click.option("--model", "model_id", default=None, help="Model id (default: active).")
@click.option("--span", required=True, help="Evaluation window START:END (days).")
@click.option("--level", default=0.95, show_default=True, type=float)
@click.option("--csv", "as_csv", is_flag=True)
@click.pass_context
@_handle
def metrics(ctx, model_id, span, level, as_csv):
    """Score a model against stored actuals over a span of whole days."""
    engine = _engine(ctx)
    model = engine.load_model(model_id)
    start, end = _parse_span(span)
    n_days = (end - start) // DAY
    hp = model.hyperparams
    bundle = bundle_from_store(ctx.obj["store"],
                               start - timedelta(hours=hp.history_horizon), end)
    records = predict_span(model, bundle, start, n_days=n_days, level=level)
    actuals = ctx.obj["store"].query_range(engine.config.series_id, start, end).values
    _echo_report(evaluate_records(records, actuals), as_csv)


@main.command()
@click.option("--models", default="rnn,seasonal,ar", show_default=True,
              help="Comma list drawn from rnn, seasonal, ar.")
@click.option("--span", default=None, help="Evaluation span START:END "
              "(default: the configured eval span).")
@click.option("--ar-p", default=24, show_default=True, type=int)
@click.option("--ar-d", default=1, show_default=True, type=int)
@click.option("--ar-season", default=0, show_default=True, type=int)
@click.option("--csv", "as_csv", is_flag=True)
@click.pass_context
@_handle
def bench(ctx, models, span, ar_p, ar_d, ar_season, as_csv):
    """Point-accuracy comparison of the model against the naive baselines."""
    engine = _engine(ctx)
    store = ctx.obj["store"]
    series_id = engine.config.series_id
    if span:
        start, end = _parse_span(span)
    else:
        _, _, start, end = engine._spans()
    n_days = (end - start) // DAY
    series = store.get_series(series_id)
    actuals = store.query_range(series_id, start, end).values

    rows = []
    wanted = [m.strip() for m in models.split(",") if m.strip()]
    for name in wanted:
        if name == "rnn":
            model = engine.load_model()
            hp = model.hyperparams
            bundle = bundle_from_store(store, start - timedelta(hours=hp.history_horizon),
                                       end)
            records = predict_span(model, bundle, start, n_days=n_days)
            preds = np.concatenate([r.mu for r in records])
        elif name == "seasonal":
            preds = []
            for d in range(n_days):
                day = start + d * DAY
                hist = store.query_range(series_id, day - timedelta(hours=168), day)
                preds.append(seasonal_naive(hist.values, season=168, horizon=24))
            preds = np.concatenate(preds)
        elif name == "ar":
            fit_end = start
            fit_series = store.query_range(series_id, series.start, fit_end)
            model_ar = fit_ar(fit_series.values, p=ar_p, S=ar_season, d=ar_d)
            preds = []
            for d in range(n_days):
                day = start + d * DAY
                hist = store.query_range(series_id, series.start, day)
                preds.append(forecast_ar(model_ar, hist.values, horizon=24))
            preds = np.concatenate(preds)
        else:
            raise click.BadParameter(f"unknown model {name!r}")
        mse, rmse, mae = point_metrics(actuals, preds)
        rows.append((name, mse, rmse, mae))

    if as_csv:
        click.echo("model,mse,rmse,mae")
        for name, mse, rmse, mae in rows:
            click.echo(f"{name},{mse!r},{rmse!r},{mae!r}")
    else:
        click.echo(f"{'model':<10}{'mse':>14}{'rmse':>10}{'mae':>10}")
        for name, mse, rmse, mae in rows:
            click.echo(f"{name:<10}{mse:>14.1f}{rmse:>10.1f}{mae:>10.1f}")


@main.group(name="al")
def al_group():
    """Active-learning cycle control."""


@al_group.command(name="run")
@click.option("--csv", "as_csv", is_flag=True, help="Emit the metric rows as CSV.")
@click.pass_context
@_handle
def al_run(ctx, as_csv):
    """Run one uncertainty-sampling cycle against the active model."""
    engine = _engine(ctx)

    def on_epoch(epoch, cap, train_gnll, val_gnll):
        if not as_csv:
            click.echo(f"retrain epoch {epoch}/{cap}  val {val_gnll:.4f}")
    report = engine.run_cycle(on_epoch=on_epoch)
    if as_csv:
        click.echo("phase," + MetricsReport.CSV_HEADER)
        click.echo("before," + report.metrics_before.to_csv_row())
        click.echo("after," + report.metrics_after.to_csv_row())
    else:
        click.echo(report.to_text(), nl=False)


@al_group.group(name="theta")
def theta_group():
    """Uncertainty threshold control."""


@theta_group.command(name="set")
@click.argument("value", type=float)
@click.option("--why", required=True, help="Rationale recorded verbatim.")
@click.option("--actor", default="cli", show_default=True)
@click.pass_context
@_handle
def theta_set(ctx, value, why, actor):
    """Set theta (MW); the change is appended to the audit history."""
    policy = _engine(ctx).set_theta(value, why, actor)
    click.echo(f"theta = {policy.theta} MW (history: {len(policy.history)} entries)")


@theta_group.command(name="show")
@click.option("--csv", "as_csv", is_flag=True, help="Full history as CSV.")
@click.pass_context
@_handle
def theta_show(ctx, as_csv):
    """Show the active theta, or the full audit history with --csv."""
    policy = _engine(ctx).load_policy()
    if as_csv:
        click.echo(policy.history_csv(), nl=False)
    else:
        click.echo(f"theta = {policy.theta} MW (set by {policy.set_by})")


@al_group.command(name="sweep")
@click.option("--thetas", required=True, help="Comma list of candidate thresholds.")
@click.option("--csv", "as_csv", is_flag=True)
@click.pass_context
@_handle
def al_sweep(ctx, thetas, as_csv):
    """Queried-step counts over the stored archive per candidate theta."""
    try:
        candidates = [float(t) for t in thetas.split(",") if t.strip()]
    except ValueError:
        raise click.BadParameter("thetas must be a comma list of numbers")
    engine = _engine(ctx)
    state = engine.state()
    exclude = {parse_rfc3339(d) for d in state["training_days"]}
    archive = engine.forecast_archive()
    table = al.sweep_thetas(archive, candidates, exclude_days=exclude)
    if as_csv:
        click.echo("theta,queried")
        for theta, count in table:
            click.echo(f"{theta!r},{count}")
    else:
        for theta, count in table:
            click.echo(f"theta {theta:>10.1f} MW -> {count} steps queried")


@main.command(name="flag-event")
@click.option("--from", "start", required=True, help="Range start (date or RFC 3339).")
@click.option("--to", "end", required=True, help="Range end (exclusive).")
@click.option("--note", default="", help="Free-text annotation.")
@click.option("--actor", default="cli", show_default=True)
@click.pass_context
@_handle
def flag_event(ctx, start, end, note, actor):
    """Flag a rare-event range for forced inclusion in the next cycle."""
    doc, created = _engine(ctx).flag_rare_event(_parse_date(start), _parse_date(end),
                                                note, actor)
    if created:
        click.echo(f"{doc['id']}: {doc['start']} .. {doc['end']}")
    else:
        click.echo(f"identical range already flagged as {doc['id']}; nothing added")


@main.command()
@click.option("--port", envvar="GRIDCAST_PORT", default=8000, show_default=True,
              type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--frontend", "frontend_dir", default=None,
              type=click.Path(file_okay=False),
              help="Directory of console static files to serve at /.")
@click.pass_context
def serve(ctx, port, host, frontend_dir):
    """Run the HTTP service (env GRIDCAST_PORT overrides the port)."""
    import uvicorn

    from .service import create_app
    app = create_app(ctx.obj["data_dir"], frontend_dir=frontend_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
