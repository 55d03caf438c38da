"""Frequency-domain helpers for window conditioning.

All functions operate on 1-D float windows. The transform itself is
numpy's FFT; everything downstream only consumes one-sided amplitude
spectra, normalized by window length so feature scale is independent
of window size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass
class Spectrum:
    """One-sided amplitude spectrum of a real window."""

    amplitudes: np.ndarray  # shape (floor(n/2)+1,)
    source_length: int


def dft(x: np.ndarray) -> np.ndarray:
    """Full complex DFT of a real or complex vector.

    Thin wrapper over np.fft.fft so every transform in the package goes
    through one place; accuracy against the direct O(n^2) sum is pinned
    by tests.
    """
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError(f"dft expects a 1-D vector, got shape {x.shape}")
    if x.size == 0:
        raise ValueError("dft of an empty vector is undefined")
    return np.fft.fft(x)


def amplitude_features(x: np.ndarray) -> Spectrum:
    """Length-normalized one-sided amplitude spectrum |X[f]| / n.

    Returns floor(n/2)+1 values, bin 0 being |mean| (DC amplitude equals
    the absolute mean of the window).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError(f"amplitude_features needs a 1-D vector of length >= 2, got shape {x.shape}")
    amps = np.abs(np.fft.rfft(x)) / x.size
    return Spectrum(amplitudes=amps, source_length=x.size)


def amplitude_matrix(x: np.ndarray) -> np.ndarray:
    """Row-wise amplitude features for a 2-D batch (rows are windows)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError(f"amplitude_matrix needs a 2-D batch with row length >= 2, got shape {x.shape}")
    return np.abs(np.fft.rfft(x, axis=1)) / x.shape[1]


def sliding_small_windows(x: np.ndarray, k: int, s: int) -> np.ndarray:
    """Slice a window into n = (len(x) - k) / s + 1 sub-windows of length k.

    Stride s must tile the window exactly: (len(x) - k) % s == 0, so the
    last sub-window ends at the last point. Returns an (n, k) matrix.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"sliding_small_windows expects a 1-D vector, got shape {x.shape}")
    w = x.size
    if not 1 <= k <= w:
        raise ConfigError(f"small window k={k} must satisfy 1 <= k <= {w}")
    if s < 1:
        raise ConfigError(f"small window stride s={s} must be >= 1")
    if (w - k) % s != 0:
        raise ConfigError(f"stride s={s} does not tile window: ({w} - {k}) % {s} != 0")
    n = (w - k) // s + 1
    out = np.empty((n, k), dtype=np.float64)
    for j in range(n):
        out[j] = x[j * s : j * s + k]
    return out


def mask_last(x: np.ndarray) -> np.ndarray:
    """Copy of x with the final element replaced by zero."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"mask_last expects a nonempty 1-D vector, got shape {x.shape}")
    out = x.copy()
    out[-1] = 0.0
    return out
