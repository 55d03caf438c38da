"""Synthetic benchmark curves with labeled injected anomalies.

Each curve mixes a base sinusoid and its harmonics with a few faster
detail oscillations whose amplitudes drift slowly over time, plus
Gaussian noise. The slow drift matters: every window has a slightly
different fine-frequency profile, so a model that compresses the whole
window through a small latent code loses that detail, while a model
that is handed the window's spectrum can track it. A dataset of
several such curves with different base periods is heterogeneous on
top of that. Two anomaly archetypes are injected into non-overlapping
segments:

- value anomalies: short spikes (1-3 points) offset vertically;
- pattern anomalies: longer segments (12-40 points) whose waveform
  changes. Phase flips and frequency shifts keep the level envelope,
  so a detector has to notice the shape change itself; amplitude
  changes and flatlines also carry a level offset, so their onset is
  visible immediately.

The leading `clean_prefix` points are kept anomaly-free so detectors
with a warm-up window see only normal data there.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .data import TimeSeries, write_csv
from .errors import ConfigError

log = logging.getLogger(__name__)

BASE_PERIODS = [24, 30, 40, 48, 60, 80, 96, 120]


def _waveform(t: np.ndarray, components: list[tuple[float, float, float]]) -> np.ndarray:
    """Sum of (amplitude, period, phase) sinusoids evaluated at t."""
    out = np.zeros_like(t, dtype=np.float64)
    for amp, period, phase in components:
        out += amp * np.sin(2.0 * np.pi * t / period + phase)
    return out


def generate_curve(curve_id: str, length: int, anomaly_rate: float,
                   rng: np.random.Generator, interval: int = 60,
                   clean_prefix: int = 150,
                   base_period: float | None = None) -> TimeSeries:
    """One labeled curve; anomalous points total ~ anomaly_rate * length."""
    if length < 2:
        raise ConfigError(f"length must be >= 2, got {length}")
    if not 0.0 <= anomaly_rate < 0.5:
        raise ConfigError(f"anomaly_rate must be in [0, 0.5), got {anomaly_rate}")

    t = np.arange(length, dtype=np.float64)
    if base_period is None:
        base_period = float(BASE_PERIODS[rng.integers(len(BASE_PERIODS))])
    components = [(rng.uniform(0.9, 1.2), base_period, rng.uniform(0, 2 * np.pi)),
                  (rng.uniform(0.35, 0.6), base_period / 2, rng.uniform(0, 2 * np.pi)),
                  (rng.uniform(0.2, 0.45), base_period / 3, rng.uniform(0, 2 * np.pi))]
    if rng.random() < 0.5:
        components.append((rng.uniform(0.15, 0.3), base_period / 5, rng.uniform(0, 2 * np.pi)))
    noise_std = rng.uniform(0.04, 0.08)
    values = _waveform(t, components)
    # detail oscillations with slowly drifting amplitudes: their share of
    # the spectrum differs from window to window, which is what separates
    # frequency-aware models from a plain latent bottleneck
    for _ in range(int(rng.integers(2, 4))):
        period = rng.uniform(7.0, 35.0)
        amp = rng.uniform(0.15, 0.35)
        mod_period = rng.uniform(700.0, 1500.0)
        envelope = 1.0 + 0.6 * np.sin(2.0 * np.pi * t / mod_period + rng.uniform(0, 2 * np.pi))
        values += amp * envelope * np.sin(2.0 * np.pi * t / period + rng.uniform(0, 2 * np.pi))
    values += rng.normal(0.0, noise_std, length)
    labels = np.zeros(length, dtype=np.int8)

    budget = int(round(anomaly_rate * length))
    blocked = np.zeros(length, dtype=bool)  # anomaly segments plus spacing
    blocked[: min(clean_prefix, length)] = True
    signal_scale = float(np.std(values))

    seg_index = 0
    remaining = budget
    while remaining > 0:
        want_pattern = seg_index % 2 == 0 and remaining >= 12
        if want_pattern:
            seg_len = int(min(remaining, rng.integers(12, 41)))
        else:
            seg_len = int(min(remaining, rng.integers(1, 4)))
        placed = False
        for _ in range(200):
            start = int(rng.integers(clean_prefix, length - seg_len + 1))
            if not blocked[start : start + seg_len].any():
                placed = True
                break
        if not placed:
            log.warning("curve %s: could not place all anomaly segments (%d points left)",
                        curve_id, remaining)
            break
        end = start + seg_len
        if want_pattern:
            kind = int(rng.integers(4))
            seg_t = t[start:end]
            if kind == 0:    # phase flip
                flipped = [(a, p, ph + np.pi) for a, p, ph in components]
                values[start:end] = _waveform(seg_t, flipped) + rng.normal(0, noise_std, seg_len)
            elif kind == 1:  # frequency shift
                shifted = [(a, p / rng.uniform(1.4, 1.8), ph) for a, p, ph in components]
                values[start:end] = _waveform(seg_t, shifted) + rng.normal(0, noise_std, seg_len)
            elif kind == 2:  # amplitude change plus level offset
                factor = rng.uniform(1.7, 2.4)
                sign = 1.0 if rng.random() < 0.5 else -1.0
                shift = sign * rng.uniform(0.8, 1.5) * signal_scale
                values[start:end] = values[start:end] * factor + shift
            else:            # flatline at a shifted level
                sign = 1.0 if rng.random() < 0.5 else -1.0
                shift = sign * rng.uniform(0.8, 1.5) * signal_scale
                values[start:end] = values[start] + shift + rng.normal(0, noise_std * 0.5, seg_len)
        else:
            sign = 1.0 if rng.random() < 0.5 else -1.0
            values[start:end] += sign * rng.uniform(1.5, 2.5) * signal_scale
        labels[start:end] = 1
        lo = max(0, start - 25)
        hi = min(length, end + 25)
        blocked[lo:hi] = True
        remaining -= seg_len
        seg_index += 1

    timestamps = np.arange(length, dtype=np.int64) * interval
    return TimeSeries(curve_id, timestamps, values, labels,
                      np.zeros(length, dtype=bool))


def generate_dataset(n_curves: int = 5, length: int = 5000, anomaly_rate: float = 0.01,
                     seed: int = 0) -> list[TimeSeries]:
    """The benchmark: heterogeneous curves with ~anomaly_rate labeled points."""
    if n_curves < 1:
        raise ConfigError(f"n_curves must be >= 1, got {n_curves}")
    curves = []
    for i in range(n_curves):
        rng = np.random.default_rng([seed, i])
        # spread base periods across curves so the dataset is heterogeneous
        period = float(BASE_PERIODS[(i * 3) % len(BASE_PERIODS)])
        curves.append(generate_curve(f"curve_{i:02d}", length, anomaly_rate, rng,
                                     base_period=period))
    return curves


def write_dataset(curves: list[TimeSeries], out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for ts in curves:
        path = out_dir / f"{ts.curve_id}.csv"
        write_csv(ts, path)
        paths.append(path)
    return paths
