"""Encoder-decoder LSTM producing per-hour Gaussian day-ahead load forecasts.

The network encodes 168 hours of scaled history, unrolls a 24-step decoder on
calendar (and optionally weather) inputs, and maps each decoder state through
a fully connected head to (mu_t, s_t) with sigma_t^2 = softplus(s_t) + floor.
Training minimizes the mean Gaussian negative log likelihood with Adam.
"""
from __future__ import annotations

import base64
import dataclasses
import hashlib
import json
import warnings
from dataclasses import dataclass
from datetime import datetime
from statistics import NormalDist

import numpy as np

from .autodiff import Node, Tape
from .errors import (ConfigError, DivergenceError, DomainError, EmptyData,
                     InsufficientData, ModelFormatError, ScaleWarning,
                     ShapeError, VarianceError)
from .features import (ScalerParams, WindowSample, assemble_features,
                       chronological_split, make_windows)
from .timeseries import HOUR, DatasetBundle, ensure_utc, format_rfc3339, parse_rfc3339

MODEL_FORMAT = "gridcast-model"
MODEL_VERSION = 1
WEIGHT_NAMES = ("w_enc", "b_enc", "w_dec", "b_dec", "w_fc1", "b_fc1", "w_fc2", "b_fc2")


@dataclass(frozen=True)
class Hyperparams:
    history_horizon: int = 168
    forecast_horizon: int = 24
    lstm_hidden: int = 64
    lstm_layers: int = 1
    fc_dropout: float = 0.4
    lstm_dropout: float = 0.3
    leaky_relu_alpha: float = 0.1
    max_epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 1
    early_stop_patience: int = 8
    variance_floor: float = 1e-6
    use_future_weather: bool = True
    val_fraction: float = 0.1
    train_stride_hours: int = 1

    def validate(self) -> None:
        if self.history_horizon <= 0 or self.forecast_horizon <= 0:
            raise ConfigError("horizons must be positive")
        if self.history_horizon % 24 or self.forecast_horizon != 24:
            raise ConfigError("history must be whole days and the horizon 24 hours")
        if not (0 <= self.fc_dropout < 1) or not (0 <= self.lstm_dropout < 1):
            raise ConfigError("dropout probabilities must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.lstm_layers != 1:
            raise ConfigError("only a single LSTM layer is supported")
        if self.lstm_hidden <= 0 or self.batch_size <= 0 or self.max_epochs <= 0:
            raise ConfigError("lstm_hidden, batch_size and max_epochs must be positive")
        if self.seed < 0 or self.early_stop_patience < 0:
            raise ConfigError("seed and early_stop_patience must be non-negative")
        if self.variance_floor <= 0:
            raise ConfigError("variance_floor must be positive")
        if not (0 < self.val_fraction < 1):
            raise ConfigError("val_fraction must lie in (0, 1)")
        if self.train_stride_hours <= 0:
            raise ConfigError("train_stride_hours must be positive")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "Hyperparams":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - names)
        if unknown:
            raise ConfigError(f"unknown hyperparameters: {unknown}")
        return cls(**doc)


def z_quantile(level: float) -> float:
    """Two-sided standard-normal quantile; level 0.95 -> 1.959964."""
    if not 0 < level < 1:
        raise DomainError(f"interval level must lie in (0, 1), got {level}")
    return NormalDist().inv_cdf((1 + level) / 2)


def gnll_loss(mu, sigma2, y) -> float:
    """Mean Gaussian negative log likelihood over T steps."""
    mu = np.asarray(mu, dtype=np.float64).ravel()
    sigma2 = np.asarray(sigma2, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if mu.size == 0:
        raise EmptyData("GNLL of zero steps is undefined")
    if not (mu.shape == sigma2.shape == y.shape):
        raise ShapeError(f"length mismatch: mu {mu.shape}, sigma2 {sigma2.shape}, y {y.shape}")
    if np.any(sigma2 <= 0):
        raise VarianceError("sigma2 must be positive elementwise")
    return float(np.mean(0.5 * np.log(2 * np.pi * sigma2) + (y - mu) ** 2 / (2 * sigma2)))


def prediction_interval(mu, sigma, level: float):
    """(L_t, U_t) = mu_t -/+ z*sigma_t at the given two-sided level."""
    z = z_quantile(level)
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    return mu - z * sigma, mu + z * sigma


# --- network graph ---


def _expected_shapes(hp: Hyperparams, n_enc: int, n_dec: int) -> dict[str, tuple]:
    H = hp.lstm_hidden
    return {
        "w_enc": (n_enc + H, 4 * H), "b_enc": (1, 4 * H),
        "w_dec": (n_dec + H, 4 * H), "b_dec": (1, 4 * H),
        "w_fc1": (H, H), "b_fc1": (1, H),
        "w_fc2": (H, 2), "b_fc2": (1, 2),
    }


def _check_weights(weights: dict, hp: Hyperparams, n_enc: int, n_dec: int) -> None:
    expected = _expected_shapes(hp, n_enc, n_dec)
    for name, shape in expected.items():
        if name not in weights:
            raise ShapeError(f"missing weight array {name!r}")
        if tuple(weights[name].shape) != shape:
            raise ShapeError(
                f"weight {name} has shape {tuple(weights[name].shape)}, expected {shape}")


def _init_weights(hp: Hyperparams, n_enc: int, n_dec: int,
                  rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Uniform +/-1/sqrt(fanin); LSTM forget-gate bias starts at 1.0."""
    H = hp.lstm_hidden

    def uniform(rows, cols):
        bound = 1.0 / np.sqrt(rows)
        return rng.uniform(-bound, bound, size=(rows, cols))

    b_enc = np.zeros((1, 4 * H))
    b_enc[0, H:2 * H] = 1.0
    b_dec = np.zeros((1, 4 * H))
    b_dec[0, H:2 * H] = 1.0
    return {
        "w_enc": uniform(n_enc + H, 4 * H), "b_enc": b_enc,
        "w_dec": uniform(n_dec + H, 4 * H), "b_dec": b_dec,
        "w_fc1": uniform(H, H), "b_fc1": np.zeros((1, H)),
        "w_fc2": uniform(H, 2), "b_fc2": np.zeros((1, 2)),
    }


class _CompiledNet:
    """Static tape for a fixed batch size; short batches are zero-padded.

    Padding rows carry sample weight 0 so they contribute nothing to the
    loss or its gradient.
    """

    def __init__(self, hp: Hyperparams, n_enc: int, n_dec: int,
                 weights: dict[str, np.ndarray], batch: int):
        _check_weights(weights, hp, n_enc, n_dec)
        self.hp = hp
        self.batch = batch
        self.n_enc = n_enc
        self.n_dec = n_dec
        t = Tape()
        self.tape = t
        p = {name: t.param(weights[name], name=name) for name in WEIGHT_NAMES}
        self.param_nodes = p
        H = hp.lstm_hidden
        h = t.const(np.zeros((batch, H)))
        c = t.const(np.zeros((batch, H)))
        for step in range(hp.history_horizon):
            h, c = self._cell(t, t.input(f"enc_{step}"), h, c, p["w_enc"], p["b_enc"], H)
        states = []
        for step in range(hp.forecast_horizon):
            h, c = self._cell(t, t.input(f"dec_{step}"), h, c, p["w_dec"], p["b_dec"], H)
            states.append(t.dropout(h, t.input(f"mask_h_{step}")))
        seq = t.concat(states, axis=0)  # [(horizon*batch) x H], step-major
        a = t.leaky_relu(t.add(t.matmul(seq, p["w_fc1"]), p["b_fc1"]), hp.leaky_relu_alpha)
        a = t.dropout(a, t.input("mask_fc"))
        out = t.add(t.matmul(a, p["w_fc2"]), p["b_fc2"])
        self.mu = t.slice(out, 0, 1, axis=1)
        s = t.slice(out, 1, 2, axis=1)
        self.sigma2 = t.add(t.softplus(s), t.const(hp.variance_floor))
        y = t.input("y")
        w = t.input("w")
        nll = t.add(
            t.mul(t.const(0.5), t.log(t.mul(t.const(2 * np.pi), self.sigma2))),
            t.div(t.square(t.sub(y, self.mu)), t.mul(t.const(2.0), self.sigma2)))
        t.set_loss(t.sum(t.mul(nll, w)))

    @staticmethod
    def _cell(t: Tape, x: Node, h: Node, c: Node, w: Node, b: Node, H: int):
        z = t.add(t.matmul(t.concat([x, h], axis=1), w), b)
        i = t.sigmoid(t.slice(z, 0, H))
        f = t.sigmoid(t.slice(z, H, 2 * H))
        g = t.tanh(t.slice(z, 2 * H, 3 * H))
        o = t.sigmoid(t.slice(z, 3 * H, 4 * H))
        c_next = t.add(t.mul(f, c), t.mul(i, g))
        return t.mul(o, t.tanh(c_next)), c_next

    def weights(self) -> dict[str, np.ndarray]:
        return {name: node.value.copy() for name, node in self.param_nodes.items()}

    def bindings(self, samples: list[WindowSample],
                 rng: np.random.Generator | None = None) -> dict[str, np.ndarray]:
        """Input bindings for a (possibly short) batch; rng=None means eval mode."""
        hp = self.hp
        B, T = self.batch, hp.forecast_horizon
        if len(samples) > B:
            raise ShapeError(f"{len(samples)} samples exceed compiled batch {B}")
        enc = np.zeros((hp.history_horizon, B, self.n_enc))
        dec = np.zeros((T, B, self.n_dec))
        targets = np.zeros((B, T))
        wv = np.zeros(B)
        for i, s in enumerate(samples):
            enc[:, i] = s.encoder_inputs
            dec[:, i] = s.decoder_inputs
            targets[i] = s.target
            wv[i] = s.weight
        out: dict[str, np.ndarray] = {}
        for step in range(hp.history_horizon):
            out[f"enc_{step}"] = enc[step]
        for step in range(T):
            out[f"dec_{step}"] = dec[step]
        out["y"] = targets.T.reshape(-1, 1)
        total = wv.sum()
        if total > 0:
            out["w"] = np.tile(wv / (T * total), T)[:, None]
        else:
            out["w"] = np.zeros((B * T, 1))
        H = hp.lstm_hidden
        if rng is None:
            for step in range(T):
                out[f"mask_h_{step}"] = np.ones((B, H))
            out["mask_fc"] = np.ones((B * T, H))
        else:
            keep_h = 1.0 - hp.lstm_dropout
            keep_f = 1.0 - hp.fc_dropout
            for step in range(T):
                out[f"mask_h_{step}"] = (rng.random((B, H)) < keep_h) / keep_h
            out["mask_fc"] = (rng.random((B * T, H)) < keep_f) / keep_f
        return out


def _adam_step(params: list[Node], m: list[np.ndarray], v: list[np.ndarray],
               step: int, lr: float, b1=0.9, b2=0.999, eps=1e-8) -> None:
    bc1 = 1.0 - b1 ** step
    bc2 = 1.0 - b2 ** step
    for node, mi, vi in zip(params, m, v):
        g = node.grad
        mi *= b1
        mi += (1 - b1) * g
        vi *= b2
        vi += (1 - b2) * (g * g)
        node.value -= lr * (mi / bc1) / (np.sqrt(vi / bc2) + eps)


def _eval_gnll(net: _CompiledNet, samples: list[WindowSample]) -> float:
    """Weighted mean GNLL with dropout disabled."""
    total, weight = 0.0, 0.0
    for lo in range(0, len(samples), net.batch):
        chunk = samples[lo:lo + net.batch]
        loss = net.tape.forward(net.bindings(chunk, rng=None))
        w = sum(s.weight for s in chunk)
        total += loss * w
        weight += w
    return total / weight


# --- training ---


def train(train_samples: list[WindowSample], val_samples: list[WindowSample],
          hp: Hyperparams, scaler: ScalerParams, *,
          initial_weights: dict[str, np.ndarray] | None = None,
          max_epochs: int | None = None,
          provenance: dict | None = None,
          on_epoch=None) -> "TrainedModel":
    """Adam on mean batch GNLL; returns the best-validation-epoch parameters.

    `initial_weights` warm-starts from an existing model (shapes must match);
    `max_epochs` overrides the hyperparameter cap for short retrains;
    `on_epoch(epoch, cap, train_gnll, val_gnll)` reports progress if given.
    """
    hp.validate()
    if not train_samples or not val_samples:
        raise InsufficientData("training requires non-empty train and validation sets")
    n_enc = train_samples[0].encoder_inputs.shape[1]
    n_dec = train_samples[0].decoder_inputs.shape[1]
    for s in list(train_samples) + list(val_samples):
        if s.encoder_inputs.shape[1] != n_enc or s.decoder_inputs.shape[1] != n_dec:
            raise ShapeError("samples disagree on feature dimensions")

    rng = np.random.default_rng(hp.seed)
    if initial_weights is None:
        weights = _init_weights(hp, n_enc, n_dec, rng)
    else:
        weights = {k: np.array(v, dtype=np.float64) for k, v in initial_weights.items()}
    net = _CompiledNet(hp, n_enc, n_dec, weights, hp.batch_size)
    cap = hp.max_epochs if max_epochs is None else max_epochs
    if cap <= 0:
        raise ConfigError("epoch cap must be positive")

    m = [np.zeros_like(p.value) for p in net.tape.params]
    v = [np.zeros_like(p.value) for p in net.tape.params]
    step = 0
    threshold = None
    best_val = np.inf
    best_epoch = 0
    best_weights = net.weights()
    wait = 0
    early = False
    epochs_log = []
    for epoch in range(1, cap + 1):
        order = rng.permutation(len(train_samples))
        loss_sum, weight_sum = 0.0, 0.0
        for lo in range(0, len(order), hp.batch_size):
            chunk = [train_samples[i] for i in order[lo:lo + hp.batch_size]]
            loss = net.tape.forward(net.bindings(chunk, rng=rng))
            if threshold is None:
                threshold = 1e6 * max(1.0, abs(loss))
            if not np.isfinite(loss) or loss > threshold:
                raise DivergenceError(
                    f"training diverged at epoch {epoch} (batch loss {loss!r})", epoch)
            net.tape.backward()
            step += 1
            _adam_step(net.tape.params, m, v, step, hp.learning_rate)
            w = sum(s.weight for s in chunk)
            loss_sum += loss * w
            weight_sum += w
        val_loss = _eval_gnll(net, val_samples)
        epochs_log.append({"epoch": epoch,
                           "train_gnll": loss_sum / weight_sum,
                           "val_gnll": val_loss})
        if on_epoch is not None:
            on_epoch(epoch, cap, loss_sum / weight_sum, val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_weights = net.weights()
            wait = 0
        else:
            wait += 1
            if hp.early_stop_patience and wait >= hp.early_stop_patience:
                early = True
                break

    log = {"epochs": epochs_log, "best_epoch": best_epoch,
           "best_val_gnll": best_val, "early_stopped": early}
    prov = {"seed": hp.seed, "n_train": len(train_samples), "n_val": len(val_samples),
            "warm_start": initial_weights is not None, "epoch_cap": cap}
    prov.update(provenance or {})
    return TrainedModel(hyperparams=hp, scaler=scaler, weights=best_weights,
                        training_log=log, provenance=prov)


def train_on_bundle(bundle: DatasetBundle, hp: Hyperparams, *,
                    scaler: ScalerParams | None = None,
                    extra_train: list[WindowSample] = (),
                    initial_weights: dict[str, np.ndarray] | None = None,
                    max_epochs: int | None = None,
                    provenance: dict | None = None) -> "TrainedModel":
    """Window a bundle chronologically (last val_fraction held out) and train."""
    hp.validate()
    if len(bundle) % 24:
        raise ShapeError("bundle length must be whole days")
    n_days = len(bundle) // 24
    split = chronological_split(n_days, hp.history_horizon // 24,
                                test_days=0, val_fraction=hp.val_fraction)
    windows, scaler = make_windows(bundle, hp.history_horizon, hp.forecast_horizon,
                                   split, scaler=scaler,
                                   use_future_weather=hp.use_future_weather,
                                   stride_hours=hp.train_stride_hours)
    prov = {
        "series_id": bundle.load.series_id,
        "data_start": format_rfc3339(bundle.load.start),
        "data_end": format_rfc3339(bundle.load.end),
        "train_days": list(split.train),
        "val_days": list(split.val),
    }
    prov.update(provenance or {})
    return train(windows["train"] + list(extra_train), windows["val"], hp, scaler,
                 initial_weights=initial_weights, max_epochs=max_epochs,
                 provenance=prov)


# --- trained model ---


def _encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "dtype": "<f8",
            "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode_array(doc: dict) -> np.ndarray:
    try:
        raw = base64.b64decode(doc["data"])
        return np.frombuffer(raw, dtype=doc["dtype"]).reshape(doc["shape"]).astype(np.float64)
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"bad weight encoding: {exc}") from exc


@dataclass
class TrainedModel:
    """Immutable after training; safe to share across threads for inference."""

    hyperparams: Hyperparams
    scaler: ScalerParams
    weights: dict[str, np.ndarray]
    training_log: dict
    provenance: dict

    def to_bytes(self) -> bytes:
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "hyperparams": self.hyperparams.to_dict(),
            "scaler": {
                "feature_names": list(self.scaler.feature_names),
                "mins": [float(x) for x in self.scaler.mins],
                "maxs": [float(x) for x in self.scaler.maxs],
                "degenerate": [bool(x) for x in self.scaler.degenerate],
            },
            "weights": {name: _encode_array(arr)
                        for name, arr in sorted(self.weights.items())},
            "training_log": self.training_log,
            "provenance": self.provenance,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("ascii")

    @classmethod
    def from_bytes(cls, raw: bytes) -> "TrainedModel":
        try:
            doc = json.loads(raw)
        except (ValueError, UnicodeDecodeError) as exc:
            raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
            raise ModelFormatError("not a model file")
        version = doc.get("version")
        if not isinstance(version, int) or version < 1:
            raise ModelFormatError(f"bad model version {version!r}")
        if version > MODEL_VERSION:
            raise ModelFormatError(
                f"model version {version} is newer than supported {MODEL_VERSION}")
        try:
            hp = Hyperparams.from_dict(doc["hyperparams"])
            sc = doc["scaler"]
            scaler = ScalerParams(feature_names=list(sc["feature_names"]),
                                  mins=np.array(sc["mins"], dtype=np.float64),
                                  maxs=np.array(sc["maxs"], dtype=np.float64),
                                  degenerate=[bool(x) for x in sc["degenerate"]])
            weights = {name: _decode_array(enc) for name, enc in doc["weights"].items()}
            return cls(hyperparams=hp, scaler=scaler, weights=weights,
                       training_log=doc["training_log"], provenance=doc["provenance"])
        except (KeyError, TypeError, ConfigError) as exc:
            raise ModelFormatError(f"model file missing or malformed field: {exc}") from exc

    @property
    def model_id(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()[:16]


# --- inference ---


@dataclass
class ForecastRecord:
    """24 hourly Gaussians in MW plus one symmetric interval level.

    `issue_time` is the first forecasted hour; step t covers
    issue_time + (t-1) hours.
    """

    series_id: str
    issue_time: datetime
    mu: np.ndarray
    sigma: np.ndarray
    level: float
    lower: np.ndarray
    upper: np.ndarray
    unit: str = "MW"
    model_id: str = ""

    @classmethod
    def build(cls, series_id: str, issue_time: datetime, mu, sigma,
              level: float = 0.95, unit: str = "MW", model_id: str = "") -> "ForecastRecord":
        mu = np.asarray(mu, dtype=np.float64)
        sigma = np.asarray(sigma, dtype=np.float64)
        if mu.shape != sigma.shape or mu.ndim != 1:
            raise ShapeError("mu and sigma must be equal-length vectors")
        if np.any(sigma <= 0):
            raise VarianceError("sigma must be positive elementwise")
        lower, upper = prediction_interval(mu, sigma, level)
        return cls(series_id=series_id, issue_time=ensure_utc(issue_time),
                   mu=mu, sigma=sigma, level=float(level),
                   lower=lower, upper=upper, unit=unit, model_id=model_id)

    def with_level(self, level: float) -> "ForecastRecord":
        return ForecastRecord.build(self.series_id, self.issue_time, self.mu,
                                    self.sigma, level, self.unit, self.model_id)

    def timestamps(self) -> list[datetime]:
        return [self.issue_time + t * HOUR for t in range(len(self.mu))]

    def blob_name(self) -> str:
        return f"{self.series_id}_{self.issue_time.strftime('%Y-%m-%dT%H%M')}.json"

    def to_doc(self) -> dict:
        return {
            "series_id": self.series_id,
            "issue_time": format_rfc3339(self.issue_time),
            "unit": self.unit,
            "model_id": self.model_id,
            "level": self.level,
            "mu": [float(x) for x in self.mu],
            "sigma": [float(x) for x in self.sigma],
            "lower": [float(x) for x in self.lower],
            "upper": [float(x) for x in self.upper],
        }

    def to_bytes(self) -> bytes:
        return json.dumps(self.to_doc(), sort_keys=True, separators=(",", ":")).encode("ascii")

    @classmethod
    def from_doc(cls, doc: dict) -> "ForecastRecord":
        rec = cls.build(doc["series_id"], parse_rfc3339(doc["issue_time"]),
                        np.array(doc["mu"]), np.array(doc["sigma"]),
                        doc["level"], doc.get("unit", "MW"), doc.get("model_id", ""))
        return rec

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ForecastRecord":
        return cls.from_doc(json.loads(raw))


def predict_span(model: TrainedModel, bundle: DatasetBundle, first_day: datetime,
                 n_days: int = 1, level: float = 0.95,
                 store=None) -> list[ForecastRecord]:
    """Day-ahead forecasts for n consecutive days, batched in one pass.

    The bundle must cover 168h of history before `first_day` and covariates
    through the last forecast hour; target-day load values are never read.
    With a store, each record is archived under the forecasts kind.
    """
    hp = model.hyperparams
    enc_all, dec_all, _ = assemble_features(bundle, model.scaler)
    if not hp.use_future_weather:
        dec_all = dec_all[:, len(model.scaler.feature_names) - 1:]
    first_day = ensure_utc(first_day)
    i0 = bundle.load.index_of(first_day)
    idx = [i0 + 24 * d for d in range(n_days)]
    for t0 in idx:
        if t0 < hp.history_horizon or t0 + hp.forecast_horizon > len(bundle):
            raise InsufficientData(
                f"bundle lacks full context or horizon for day at index {t0}")

    net = _CompiledNet(hp, enc_all.shape[1], dec_all.shape[1], model.weights,
                       batch=n_days)
    bindings: dict[str, np.ndarray] = {}
    enc = np.stack([enc_all[t0 - hp.history_horizon:t0] for t0 in idx], axis=1)
    dec = np.stack([dec_all[t0:t0 + hp.forecast_horizon] for t0 in idx], axis=1)
    outside = int(((enc < -1) | (enc > 2)).sum() + ((dec < -1) | (dec > 2)).sum())
    if outside:
        warnings.warn(ScaleWarning(
            f"{outside} scaled input values fall outside [-1, 2]; "
            "inputs may not match the model's scaler"))
    for step in range(hp.history_horizon):
        bindings[f"enc_{step}"] = enc[step]
    for step in range(hp.forecast_horizon):
        bindings[f"dec_{step}"] = dec[step]
        bindings[f"mask_h_{step}"] = np.ones((n_days, hp.lstm_hidden))
    bindings["mask_fc"] = np.ones((n_days * hp.forecast_horizon, hp.lstm_hidden))
    bindings["y"] = np.zeros((n_days * hp.forecast_horizon, 1))
    bindings["w"] = np.zeros((n_days * hp.forecast_horizon, 1))
    net.tape.forward(bindings)

    mu_scaled = net.mu.value.reshape(hp.forecast_horizon, n_days)
    sig2_scaled = net.sigma2.value.reshape(hp.forecast_horizon, n_days)
    span = model.scaler.span("load")
    records = []
    for j, t0 in enumerate(idx):
        mu = model.scaler.inverse_feature("load", mu_scaled[:, j])
        sigma = np.sqrt(sig2_scaled[:, j]) * span
        rec = ForecastRecord.build(
            bundle.load.series_id, bundle.load.timestamp_at(t0), mu, sigma,
            level=level, unit=bundle.load.unit or "MW", model_id=model.model_id)
        if store is not None:
            store.put_blob("forecasts", rec.blob_name(), rec.to_bytes())
        records.append(rec)
    return records


def predict_day_ahead(model: TrainedModel, bundle: DatasetBundle, day_start: datetime,
                      level: float = 0.95, store=None) -> ForecastRecord:
    """Single-day convenience wrapper around predict_span."""
    return predict_span(model, bundle, day_start, n_days=1, level=level, store=store)[0]
