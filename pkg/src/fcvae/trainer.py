"""Training loop: one model per dataset, minimizing the masked ELBO.

Each epoch reshuffles the pooled windows of all curves, synthesizes
fresh augmented anomalies, injects fresh missing points, and runs Adam
over mini-batches. All randomness is derived from (seed, stream, epoch)
tuples, so runs are exactly reproducible and augmentation differs from
epoch to epoch by construction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .data import TimeSeries, WindowBatch, augment, inject_missing, make_windows, pool_windows
from .errors import ConfigError, DataError, NumericError
from .model import FCVAE, FCVAEConfig

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 256
    lr: float = 1e-3
    missing_rate: float = 0.05
    augment_rate: float = 0.1
    seed: int = 0
    valid_fraction: float = 0.0

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0.0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ConfigError(f"missing_rate must be in [0, 1), got {self.missing_rate}")
        if not 0.0 <= self.augment_rate < 1.0:
            raise ConfigError(f"augment_rate must be in [0, 1), got {self.augment_rate}")
        if not 0.0 <= self.valid_fraction <= 0.5:
            raise ConfigError(f"valid_fraction must be in [0, 0.5], got {self.valid_fraction}")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    valid_loss: list = field(default_factory=list)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,train_loss,valid_loss\n")
            for i, tl in enumerate(self.train_loss):
                vl = repr(self.valid_loss[i]) if self.valid_loss else ""
                fh.write(f"{i},{tl!r},{vl}\n")


def _split_validation(batches: list[WindowBatch], fraction: float) -> tuple[WindowBatch, WindowBatch | None]:
    """Hold out the tail windows of each curve (no shuffling, no leakage)."""
    train_parts, valid_parts = [], []
    for b in batches:
        if b.n == 0:
            continue
        held = math.ceil(fraction * b.n) if fraction > 0 else 0
        held = min(held, b.n - 1) if b.n > 1 else 0
        cut = b.n - held
        train_parts.append(WindowBatch(b.windows[:cut], b.alpha[:cut], b.last_index[:cut]))
        if held:
            valid_parts.append(WindowBatch(b.windows[cut:], b.alpha[cut:], b.last_index[cut:]))
    if not train_parts or all(p.n == 0 for p in train_parts):
        raise DataError("no training windows: every curve is shorter than the window")
    train = pool_windows(train_parts)
    valid = pool_windows(valid_parts) if valid_parts else None
    return train, valid


def _batched_loss(model: FCVAE, batch: WindowBatch, batch_size: int,
                  rng: np.random.Generator) -> float:
    """Mean loss over a batch in eval mode (no dropout, no optimizer)."""
    total = 0.0
    with nn.no_grad():
        for lo in range(0, batch.n, batch_size):
            hi = min(lo + batch_size, batch.n)
            loss = model.loss_batch(batch.windows[lo:hi], batch.alpha[lo:hi], rng, training=False)
            total += loss.item() * (hi - lo)
    return total / batch.n


def train(dataset: list[TimeSeries], model_cfg: FCVAEConfig,
          train_cfg: TrainConfig) -> tuple[FCVAE, TrainHistory]:
    """Train one model on the pooled windows of all curves.

    dataset must already be preprocessed (filled, standardized). Returns
    the trained model (parameters in model.params) and per-epoch history.
    """
    model_cfg.validate()
    train_cfg.validate()
    if not dataset:
        raise ConfigError("empty dataset: nothing to train on")

    w = model_cfg.window
    per_curve = [make_windows(ts, w, stride=1) for ts in dataset]
    pooled = pool_windows(per_curve)
    if pooled.n == 0:
        raise DataError(f"no training windows: all curves shorter than window {w}")
    train_pool, valid_pool = _split_validation(per_curve, train_cfg.valid_fraction)
    log.info("training on %d windows from %d curves (%d held out)",
             train_pool.n, len(dataset), valid_pool.n if valid_pool else 0)

    seed = train_cfg.seed
    model = FCVAE(model_cfg, seed=seed)
    opt = nn.Adam(model.params, lr=train_cfg.lr)
    history = TrainHistory()

    for epoch in range(train_cfg.epochs):
        perm = np.random.default_rng([seed, 3, epoch]).permutation(train_pool.n)
        work = WindowBatch(train_pool.windows[perm], train_pool.alpha[perm],
                           train_pool.last_index[perm], train_pool.curve_index[perm])
        work = augment(work, train_cfg.augment_rate, dataset,
                       np.random.default_rng([seed, 1, epoch]))
        work = inject_missing(work, train_cfg.missing_rate,
                              np.random.default_rng([seed, 2, epoch]))

        loss_rng = np.random.default_rng([seed, 4, epoch])
        total = 0.0
        for bi, lo in enumerate(range(0, work.n, train_cfg.batch_size)):
            hi = min(lo + train_cfg.batch_size, work.n)
            loss = model.loss_batch(work.windows[lo:hi], work.alpha[lo:hi],
                                    loss_rng, training=True)
            value = loss.item()
            if not math.isfinite(value):
                raise NumericError(f"non-finite loss {value} at epoch {epoch}, batch {bi}")
            model.params.zero_grad()
            nn.backward(loss)
            opt.step()
            total += value * (hi - lo)
        history.train_loss.append(total / work.n)

        if valid_pool is not None:
            vloss = _batched_loss(model, valid_pool, train_cfg.batch_size,
                                  np.random.default_rng([seed, 5, epoch]))
            history.valid_loss.append(vloss)
            log.info("epoch %d/%d: train loss %.4f, valid loss %.4f",
                     epoch + 1, train_cfg.epochs, history.train_loss[-1], vloss)
        else:
            log.info("epoch %d/%d: train loss %.4f",
                     epoch + 1, train_cfg.epochs, history.train_loss[-1])

    return model, history
