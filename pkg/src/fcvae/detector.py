"""Test-time scoring: impute the last point, then measure surprise.

For each window the last point is zeroed and refined by a few
encode-decode iterations (MCMC-style imputation); conditions are
computed from the masked window, so they are identical no matter what
the last point was. The anomaly score is the negative mean
log-likelihood of the ORIGINAL last value under the decoder's Gaussian,
averaged over latent draws: high score = the observation is hard to
explain as normal.

Scoring is causal (a window sees only its own past) and every window
draws from its own generator seeded by (seed, window_end_index), so
batched, sequential, and truncated runs produce bit-identical scores.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .data import TimeSeries
from .errors import DataError, ParseError
from .model import FCVAE
from .nn import Tensor

log = logging.getLogger(__name__)

SCORE_HEADER = ["timestamp", "score", "label"]


@dataclass
class ScoreSeries:
    """Per-timestamp anomaly scores; NaN marks the undefined warm-up head."""

    curve_id: str
    timestamps: np.ndarray  # int64
    scores: np.ndarray      # float64, NaN where undefined
    labels: np.ndarray      # int8

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if not (len(self.timestamps) == len(self.scores) == len(self.labels)):
            raise DataError(f"curve {self.curve_id!r}: field lengths differ")

    def __len__(self) -> int:
        return len(self.scores)

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.scores)


def _impute_batch(windows: np.ndarray, model: FCVAE, n_iters: int,
                  rngs: list[np.random.Generator]) -> tuple[np.ndarray, Tensor, Tensor]:
    """Shared MCMC core; returns imputed windows plus final conditions."""
    cfg = model.config
    work = windows.copy()
    work[:, -1] = 0.0
    with nn.no_grad():
        # with last-point masking the conditions cannot depend on the one
        # position MCMC rewrites, so one computation serves all iterations
        if cfg.mask_last:
            f_local, f_global = model.conditions(work)
        for _ in range(n_iters):
            if not cfg.mask_last:
                f_local, f_global = model.conditions(work)
            mu, std = model.encode_batch(Tensor(work), f_local, f_global)
            eps = np.stack([r.standard_normal(cfg.latent_dim) for r in rngs])
            z = mu.data + std.data * eps
            mu_x, _ = model.decode_batch(Tensor(z), f_local, f_global)
            work[:, -1] = mu_x.data[:, -1]
        if not cfg.mask_last:
            f_local, f_global = model.conditions(work)
    return work, f_local, f_global


def _log_normal(x: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return -0.5 * nn.LOG_2PI - np.log(std) - (x - mean) ** 2 / (2.0 * std * std)


def _score_batch(windows: np.ndarray, model: FCVAE, n_iters: int, n_samples: int,
                 rngs: list[np.random.Generator], return_detail: bool = False):
    """Scores for a (batch, W) array, one generator per window."""
    cfg = model.config
    imputed, f_local, f_global = _impute_batch(windows, model, n_iters, rngs)
    original_last = windows[:, -1]
    b = windows.shape[0]
    mu_last = np.empty((b, n_samples))
    std_last = np.empty((b, n_samples))
    with nn.no_grad():
        mu, std = model.encode_batch(Tensor(imputed), f_local, f_global)
        for l in range(n_samples):
            eps = np.stack([r.standard_normal(cfg.latent_dim) for r in rngs])
            z = mu.data + std.data * eps
            mu_x, std_x = model.decode_batch(Tensor(z), f_local, f_global)
            mu_last[:, l] = mu_x.data[:, -1]
            std_last[:, l] = std_x.data[:, -1]
    loglik = _log_normal(original_last[:, None], mu_last, std_last)
    scores = -loglik.mean(axis=1)
    if return_detail:
        return scores, mu_last, std_last
    return scores


def mcmc_impute(x: np.ndarray, model: FCVAE, n_iters: int = 10,
                rng: np.random.Generator | None = None) -> np.ndarray:
    """Replace the last point with an iteratively refined normal value.

    n_iters=0 returns x with the last point zeroed. Positions other than
    the last are never modified.
    """
    if n_iters < 0:
        raise ValueError(f"n_iters must be >= 0, got {n_iters}")
    x = np.asarray(x, dtype=np.float64)
    rng = rng if rng is not None else np.random.default_rng(0)
    imputed, _, _ = _impute_batch(x[None, :], model, n_iters, [rng])
    return imputed[0]


def anomaly_score(x: np.ndarray, model: FCVAE, n_iters: int = 10,
                  n_samples: int = 32, rng: np.random.Generator | None = None) -> float:
    """Negative mean reconstruction log-likelihood of the last point."""
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    x = np.asarray(x, dtype=np.float64)
    rng = rng if rng is not None else np.random.default_rng(0)
    return float(_score_batch(x[None, :], model, n_iters, n_samples, [rng])[0])


def score_series(ts: TimeSeries, model: FCVAE, n_iters: int = 10, n_samples: int = 32,
                 seed: int = 0, batch_size: int = 1024) -> ScoreSeries:
    """Score every index >= W-1 of a preprocessed series.

    The series must already be standardized with the training statistics
    and missing-filled. The first W-1 positions have no window and stay
    undefined (NaN).
    """
    w = model.config.window
    length = len(ts)
    scores = np.full(length, np.nan)
    if length < w:
        log.warning("curve %s: length %d < window %d, all scores undefined",
                    ts.curve_id, length, w)
        return ScoreSeries(ts.curve_id, ts.timestamps, scores, ts.labels)
    view = np.lib.stride_tricks.sliding_window_view(ts.values, w)  # row i ends at i+w-1
    n = view.shape[0]
    for lo in range(0, n, batch_size):
        hi = min(lo + batch_size, n)
        ends = np.arange(lo, hi) + w - 1
        rngs = [np.random.default_rng([seed, int(e)]) for e in ends]
        scores[ends] = _score_batch(np.ascontiguousarray(view[lo:hi]), model,
                                    n_iters, n_samples, rngs)
    return ScoreSeries(ts.curve_id, ts.timestamps, scores, ts.labels)


def write_score_csv(ss: ScoreSeries, path: str | Path) -> None:
    """`timestamp,score,label` rows; empty score field when undefined."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCORE_HEADER)
        for t, s, lab in zip(ss.timestamps, ss.scores, ss.labels):
            writer.writerow([int(t), "" if math.isnan(s) else repr(float(s)), int(lab)])


def load_score_csv(path: str | Path) -> ScoreSeries:
    path = Path(path)
    timestamps, scores, labels = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != SCORE_HEADER:
            raise ParseError(f"{path}:1: expected header {','.join(SCORE_HEADER)!r}, got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and row[0].strip() == ""):
                continue
            if len(row) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                timestamps.append(int(row[0]))
                scores.append(math.nan if row[1].strip() == "" else float(row[1]))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad timestamp or score") from None
            if row[2].strip() not in ("0", "1"):
                raise ParseError(f"{path}:{lineno}: bad label {row[2]!r}")
            labels.append(int(row[2]))
    if not timestamps:
        raise DataError(f"{path}: no data rows")
    return ScoreSeries(path.stem, np.asarray(timestamps), np.asarray(scores),
                       np.asarray(labels))
