"""Day-ahead probabilistic load forecasting with operator-steered active learning."""

from .active_learning import (ALCycleReport, ALEngine, EngineConfig, QuerySet,
                              ThresholdPolicy, acquire_actuals,
                              augment_and_retrain, select_queries,
                              update_threshold)
from .baselines import ARModel, fit_ar, forecast_ar, seasonal_naive
from .datastore import Store
from .forecaster import (ForecastRecord, Hyperparams, TrainedModel, gnll_loss,
                         predict_day_ahead, predict_span, prediction_interval,
                         train, train_on_bundle)
from .metrics import (IntervalSet, MetricsReport, evaluate_records, picp,
                      pinball, point_metrics, sharpness)
from .synthetic import SyntheticConfig, bundle_from_store, generate_synthetic
from .timeseries import DatasetBundle, TimeSeries

__version__ = "0.1.0"

__all__ = [
    "ALCycleReport", "ALEngine", "ARModel", "DatasetBundle", "EngineConfig",
    "ForecastRecord", "Hyperparams", "IntervalSet", "MetricsReport", "QuerySet",
    "Store", "SyntheticConfig", "ThresholdPolicy", "TimeSeries", "TrainedModel",
    "acquire_actuals", "augment_and_retrain", "bundle_from_store",
    "evaluate_records", "fit_ar", "forecast_ar", "generate_synthetic",
    "gnll_loss", "picp", "pinball", "point_metrics", "predict_day_ahead",
    "predict_span", "prediction_interval", "seasonal_naive", "select_queries",
    "sharpness", "train", "train_on_bundle", "update_threshold",
]
