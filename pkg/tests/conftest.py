"""Shared fixtures.

The expensive pieces (full-size models on the 120-day scenario) are built
once per session and shared by the learning, calibration, and cycle tests;
everything else uses deliberately tiny configurations.
"""
import time
from dataclasses import dataclass, field

import numpy as np
import pytest

from gridcast.active_learning import ALEngine, EngineConfig
from gridcast.datastore import Store
from gridcast.forecaster import Hyperparams, TrainedModel, train_on_bundle
from gridcast.synthetic import (SyntheticConfig, generate_synthetic,
                                load_bundle_into_store)
from gridcast.timeseries import DatasetBundle

TINY_HP = dict(lstm_hidden=8, max_epochs=2, train_stride_hours=24, seed=3)


def slice_days(bundle: DatasetBundle, d0: int, d1: int) -> DatasetBundle:
    s = bundle.load.timestamp_at(d0 * 24)
    e = bundle.load.timestamp_at(d1 * 24) if d1 * 24 < len(bundle) else bundle.load.end
    return DatasetBundle(load=bundle.load.slice(s, e),
                         covariates={k: v.slice(s, e)
                                     for k, v in bundle.covariates.items()},
                         calendar_origin=bundle.calendar_origin,
                         provenance=bundle.provenance)


@pytest.fixture()
def tmp_store(tmp_path):
    return Store(tmp_path / "store")


@pytest.fixture(scope="session")
def tiny_bundle():
    return generate_synthetic(SyntheticConfig(n_days=30, seed=7))


@pytest.fixture(scope="session")
def tiny_hp():
    return Hyperparams(**TINY_HP)


@pytest.fixture(scope="session")
def tiny_model(tiny_bundle, tiny_hp):
    """Small model over the first 20 days of the 30-day bundle."""
    return train_on_bundle(slice_days(tiny_bundle, 0, 20), tiny_hp)


def make_tiny_engine(tmp_path, bundle, seed=3) -> ALEngine:
    store = Store(tmp_path / "engine-store")
    load_bundle_into_store(store, bundle)
    hp = Hyperparams(**{**TINY_HP, "seed": seed})
    return ALEngine(store, EngineConfig(train_days=20, query_days=4, eval_days=4,
                                        hyperparams=hp))


@pytest.fixture()
def tiny_engine(tmp_path, tiny_bundle):
    return make_tiny_engine(tmp_path, tiny_bundle)


# --- full-size scenario (shared across the heavyweight checks) ---


@dataclass
class Scenario:
    seed: int
    bundle: DatasetBundle
    engine: ALEngine
    model: TrainedModel
    train_seconds: float
    extras: dict = field(default_factory=dict)


SCENARIO_SEEDS = (1, 2, 3)


@pytest.fixture(scope="session")
def scenarios(tmp_path_factory):
    """One 120-day dataset + trained full-size model per seed."""
    out = {}
    for seed in SCENARIO_SEEDS:
        bundle = generate_synthetic(SyntheticConfig(n_days=120, seed=seed))
        store = Store(tmp_path_factory.mktemp(f"scenario-{seed}") / "store")
        load_bundle_into_store(store, bundle)
        engine = ALEngine(store, EngineConfig(hyperparams=Hyperparams(seed=seed)))
        t0 = time.perf_counter()
        model = engine.train_initial()
        out[seed] = Scenario(seed=seed, bundle=bundle, engine=engine, model=model,
                             train_seconds=time.perf_counter() - t0)
    return out


def median(values):
    return float(np.median(np.asarray(values, dtype=np.float64)))
