"""Frequency-conditioned VAE anomaly detection for univariate time series.

Typical flow:

    from fcvae import data, synth, trainer, detector, evaluator

    curves = synth.generate_dataset(n_curves=5, length=5000, anomaly_rate=0.01, seed=0)
    prepped = [data.preprocess_curve(c)[0] for c in curves]
    model, history = trainer.train(prepped, model.FCVAEConfig(), trainer.TrainConfig())
    scores = [detector.score_series(c, model) for c in prepped]
    report = evaluator.evaluate(scores, delay=7)
"""

from .data import (PreprocessConfig, TimeSeries, WindowBatch, augment, augment_pattern,
                   augment_value, fill_missing, inject_missing, load_csv, load_dataset,
                   make_windows, pool_windows, preprocess_curve, standardize, write_csv)
from .detector import ScoreSeries, anomaly_score, mcmc_impute, score_series
from .errors import (ConfigError, DataError, FCVAEError, NumericError, ParseError,
                     ShapeError)
from .evaluator import (EvalResult, best_f1, delay_point_adjust, evaluate, point_adjust,
                        prf)
from .model import FCVAE, ConditionVector, FCVAEConfig, GaussianParams
from .spectral import Spectrum, amplitude_features, dft, mask_last, sliding_small_windows
from .synth import generate_curve, generate_dataset, write_dataset
from .trainer import TrainConfig, TrainHistory, train

__version__ = "0.1.0"

__all__ = [
    "ConditionVector", "ConfigError", "DataError", "EvalResult", "FCVAE", "FCVAEConfig",
    "FCVAEError", "GaussianParams", "NumericError", "ParseError", "PreprocessConfig",
    "ScoreSeries", "ShapeError", "Spectrum", "TimeSeries", "TrainConfig", "TrainHistory",
    "WindowBatch", "amplitude_features", "anomaly_score", "augment", "augment_pattern",
    "augment_value", "best_f1", "delay_point_adjust", "dft", "evaluate", "fill_missing",
    "generate_curve", "generate_dataset", "inject_missing", "load_csv", "load_dataset",
    "make_windows", "mask_last", "mcmc_impute", "point_adjust", "pool_windows",
    "preprocess_curve", "prf", "score_series", "sliding_small_windows", "standardize",
    "train", "write_csv", "write_dataset",
]
