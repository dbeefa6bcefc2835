"""Classical reference forecasters: seasonal-naive and conditional-LS AR models.

The AR fit is ordinary least squares on lagged regressors (conditional sum
of squares), optionally after first differencing; no moving-average terms.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InsufficientData, SingularError
from .timeseries import TimeSeries


def _values(history) -> np.ndarray:
    if isinstance(history, TimeSeries):
        return history.values
    return np.asarray(history, dtype=np.float64).ravel()


def seasonal_naive(history, season: int = 168, horizon: int = 24) -> np.ndarray:
    """forecast(t) = history(t - season), extended periodically past one season."""
    vals = _values(history)
    if season <= 0 or horizon <= 0:
        raise ConfigError("season and horizon must be positive")
    if vals.size < season:
        raise InsufficientData(
            f"need at least {season} points for a season, have {vals.size}")
    tail = vals[-season:]
    reps = int(np.ceil(horizon / season))
    return np.tile(tail, reps)[:horizon].copy()


@dataclass
class ARModel:
    """AR(p) with optional single seasonal lag and first differencing."""

    p: int
    S: int
    d: int
    phi: np.ndarray
    Phi: float | None
    intercept: float
    residual_variance: float

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=np.float64).ravel()
        if self.p < 1 or self.phi.size != self.p:
            raise ConfigError("p must be >= 1 and match the coefficient count")
        if self.S < 0 or (self.S > 0) != (self.Phi is not None):
            raise ConfigError("seasonal lag S>0 requires Phi and vice versa")
        if self.d not in (0, 1):
            raise ConfigError("d must be 0 or 1")
        if not np.all(np.isfinite(self.phi)) or not np.isfinite(self.intercept):
            raise ConfigError("coefficients must be finite")
        if self.residual_variance < 0:
            raise ConfigError("residual variance must be >= 0")


def fit_ar(series, p: int, S: int = 0, d: int = 0) -> ARModel:
    """Least-squares fit of y_t on y_{t-1..t-p} (+ y_{t-S}, + intercept)."""
    if p < 1 or S < 0 or d not in (0, 1):
        raise ConfigError("need p >= 1, S >= 0 and d in {0, 1}")
    vals = _values(series)
    if d:
        vals = np.diff(vals)
    if vals.size < 10 * (p + (1 if S else 0)):
        raise InsufficientData(
            f"need at least {10 * (p + (1 if S else 0))} points after differencing")
    start = max(p, S)
    n = vals.size
    k = p + (1 if S else 0) + 1
    if n - start < k + 1:
        raise InsufficientData("too few rows for the requested lags")
    cols = [vals[start - i:n - i] for i in range(1, p + 1)]
    if S:
        cols.append(vals[start - S:n - S])
    cols.append(np.ones(n - start))
    X = np.column_stack(cols)
    y = vals[start:]
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < k:
        raise SingularError("regressor matrix is rank deficient (constant series?)")
    resid = y - X @ coef
    rss = float(resid @ resid)
    return ARModel(
        p=p, S=S, d=d,
        phi=coef[:p],
        Phi=float(coef[p]) if S else None,
        intercept=float(coef[-1]),
        residual_variance=rss / (y.size - k),
    )


def forecast_ar(model: ARModel, history, horizon: int) -> np.ndarray:
    """Iterated one-step prediction feeding its own outputs forward."""
    if horizon <= 0:
        raise ConfigError("horizon must be positive")
    vals = _values(history)
    need = max(model.p, model.S) + model.d
    if vals.size < need:
        raise InsufficientData(f"need at least {need} history points, have {vals.size}")
    work = np.diff(vals) if model.d else vals
    buf = list(work)
    out = np.empty(horizon)
    for t in range(horizon):
        yhat = model.intercept
        for i in range(model.p):
            yhat += model.phi[i] * buf[-1 - i]
        if model.S:
            yhat += model.Phi * buf[-model.S]
        buf.append(yhat)
        out[t] = yhat
    if model.d:
        out = vals[-1] + np.cumsum(out)
    return out
