"""Time-series ingestion and window construction.

Pipeline for one curve: load_csv -> fill_missing -> standardize ->
make_windows. Training additionally applies augment (anomalous-window
synthesis) and inject_missing per epoch. Every point carries an alpha
flag downstream: alpha=0 marks points that are missing, labeled
anomalous, injected-missing, or augmentation-mutated, and the training
objective down-weights exactly those points.

CSV format: header ``timestamp,value,label``; timestamp = integer epoch
seconds; value = decimal or empty (missing); label in {0,1}. One file
per curve; a dataset is a directory of such files; curve_id = file stem.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, ParseError

log = logging.getLogger(__name__)

CSV_HEADER = ["timestamp", "value", "label"]


@dataclass
class TimeSeries:
    """One univariate curve with per-point labels and missing flags."""

    curve_id: str
    timestamps: np.ndarray  # int64, strictly increasing
    values: np.ndarray      # float64
    labels: np.ndarray      # int8 in {0,1}
    missing: np.ndarray     # bool

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        self.missing = np.asarray(self.missing, dtype=bool)
        n = len(self.timestamps)
        if not (len(self.values) == len(self.labels) == len(self.missing) == n):
            raise DataError(f"curve {self.curve_id!r}: field lengths differ")

    def __len__(self) -> int:
        return len(self.values)

    def copy(self) -> "TimeSeries":
        return TimeSeries(self.curve_id, self.timestamps.copy(), self.values.copy(),
                          self.labels.copy(), self.missing.copy())


@dataclass
class PreprocessConfig:
    """Windowing and per-epoch corruption knobs."""

    window: int = 120
    stride: int = 1
    missing_rate: float = 0.05
    augment_rate: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.window < 8:
            raise ConfigError(f"window must be >= 8, got {self.window}")
        if not 0 < self.stride <= self.window:
            raise ConfigError(f"stride must be in [1, window], got {self.stride}")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ConfigError(f"missing_rate must be in [0, 1), got {self.missing_rate}")
        if not 0.0 <= self.augment_rate < 1.0:
            raise ConfigError(f"augment_rate must be in [0, 1), got {self.augment_rate}")


@dataclass
class WindowBatch:
    """Stacked sliding windows with alpha masks and provenance."""

    windows: np.ndarray      # (n, W) float64
    alpha: np.ndarray        # (n, W) float64 in {0,1}
    last_index: np.ndarray   # (n,) int64, window-end position in source series
    curve_index: np.ndarray = field(default=None)  # (n,) int64, position in curve list

    def __post_init__(self):
        self.windows = np.asarray(self.windows, dtype=np.float64)
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.last_index = np.asarray(self.last_index, dtype=np.int64)
        if self.curve_index is None:
            self.curve_index = np.zeros(len(self.windows), dtype=np.int64)
        else:
            self.curve_index = np.asarray(self.curve_index, dtype=np.int64)

    @property
    def n(self) -> int:
        return self.windows.shape[0]

    @property
    def width(self) -> int:
        return self.windows.shape[1]

    def copy(self) -> "WindowBatch":
        return WindowBatch(self.windows.copy(), self.alpha.copy(),
                           self.last_index.copy(), self.curve_index.copy())


def load_csv(path: str | Path) -> TimeSeries:
    """Parse one curve file; sorts rows, rejects duplicate timestamps."""
    path = Path(path)
    timestamps: list[int] = []
    values: list[float] = []
    labels: list[int] = []
    missing: list[bool] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CSV_HEADER:
            raise ParseError(f"{path}:1: expected header {','.join(CSV_HEADER)!r}, got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and row[0].strip() == ""):
                continue  # blank line
            if len(row) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            ts_str, val_str, lab_str = (f.strip() for f in row)
            try:
                ts = int(ts_str)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad timestamp {ts_str!r}") from None
            if val_str == "":
                val, miss = math.nan, True
            else:
                try:
                    val = float(val_str)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: bad value {val_str!r}") from None
                miss = not math.isfinite(val)
            if lab_str not in ("0", "1"):
                raise ParseError(f"{path}:{lineno}: bad label {lab_str!r} (want 0 or 1)")
            timestamps.append(ts)
            values.append(val)
            labels.append(int(lab_str))
            missing.append(miss)
    if not timestamps:
        raise DataError(f"{path}: no data rows")
    order = np.argsort(np.asarray(timestamps, dtype=np.int64), kind="stable")
    ts_arr = np.asarray(timestamps, dtype=np.int64)[order]
    dup = np.flatnonzero(np.diff(ts_arr) == 0)
    if dup.size:
        raise DataError(f"{path}: duplicate timestamp {ts_arr[dup[0]]}")
    return TimeSeries(
        curve_id=path.stem,
        timestamps=ts_arr,
        values=np.asarray(values, dtype=np.float64)[order],
        labels=np.asarray(labels, dtype=np.int8)[order],
        missing=np.asarray(missing, dtype=bool)[order],
    )


def write_csv(ts: TimeSeries, path: str | Path) -> None:
    """Inverse of load_csv; missing points get an empty value field."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for t, v, lab, miss in zip(ts.timestamps, ts.values, ts.labels, ts.missing):
            writer.writerow([int(t), "" if miss else repr(float(v)), int(lab)])


def load_dataset(data_dir: str | Path) -> list[TimeSeries]:
    """All curve CSVs in a directory, sorted by curve_id."""
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataError(f"data directory not found: {data_dir}")
    files = sorted(data_dir.glob("*.csv"))
    if not files:
        raise DataError(f"no CSV files in {data_dir}")
    return [load_csv(p) for p in files]


def fill_missing(ts: TimeSeries, use_labels: bool = True) -> TimeSeries:
    """Complete the timestamp grid and fill untrusted values.

    Gaps (multiples of the modal interval) are inserted as missing
    points. Values at missing points, and at labeled-anomalous points
    when use_labels is true, are replaced by linear interpolation
    between the nearest trusted neighbors; edge gaps take the nearest
    trusted value. Labels and missing flags are preserved. Idempotent.

    use_labels=False is the scoring-time mode: anomalous values must
    reach the detector unaltered, so only missing points are filled.
    """
    if len(ts) < 2:
        raise DataError(f"curve {ts.curve_id!r}: need at least 2 points to fill")
    diffs = np.diff(ts.timestamps)
    intervals, counts = np.unique(diffs, return_counts=True)
    interval = int(intervals[np.argmax(counts)])
    if interval <= 0:
        raise DataError(f"curve {ts.curve_id!r}: nonpositive modal interval {interval}")
    off_grid = np.flatnonzero(diffs % interval != 0)
    if off_grid.size:
        t_bad = int(ts.timestamps[off_grid[0] + 1])
        raise DataError(f"curve {ts.curve_id!r}: timestamp {t_bad} not aligned to interval {interval}")

    n_out = (int(ts.timestamps[-1]) - int(ts.timestamps[0])) // interval + 1
    grid = ts.timestamps[0] + interval * np.arange(n_out, dtype=np.int64)
    pos = (ts.timestamps - ts.timestamps[0]) // interval

    values = np.full(n_out, np.nan)
    labels = np.zeros(n_out, dtype=np.int8)
    missing = np.ones(n_out, dtype=bool)
    values[pos] = ts.values
    labels[pos] = ts.labels
    missing[pos] = ts.missing

    trusted = ~missing
    if use_labels:
        trusted &= labels == 0
    idx = np.flatnonzero(trusted)
    if idx.size == 0:
        raise DataError(f"curve {ts.curve_id!r}: no normal points to interpolate from")
    filled = np.interp(np.arange(n_out), idx, values[idx])
    values = np.where(trusted, values, filled)
    return TimeSeries(ts.curve_id, grid, values, labels, missing)


def standardize(ts: TimeSeries) -> tuple[TimeSeries, float, float]:
    """Z-score all values using stats of normal (unlabeled, present) points."""
    if len(ts) < 2:
        raise DataError(f"curve {ts.curve_id!r}: need at least 2 points to standardize")
    normal = ~ts.missing & (ts.labels == 0)
    if not normal.any():
        raise DataError(f"curve {ts.curve_id!r}: no normal points for statistics")
    mean = float(ts.values[normal].mean())
    std = float(ts.values[normal].std())
    if std < 1e-8:
        std = 1.0  # constant series
    out = ts.copy()
    out.values = (ts.values - mean) / std
    return out, mean, std


def apply_standardization(ts: TimeSeries, mean: float, std: float) -> TimeSeries:
    """Z-score with externally supplied (training) statistics."""
    out = ts.copy()
    out.values = (ts.values - mean) / std
    return out


def make_windows(ts: TimeSeries, window: int, stride: int = 1) -> WindowBatch:
    """Sliding windows ending at W-1, W-1+stride, ...; alpha from flags."""
    if window < 1 or stride < 1:
        raise ConfigError(f"window and stride must be >= 1, got {window}, {stride}")
    length = len(ts)
    if length < window:
        log.warning("curve %s: length %d < window %d, producing no windows",
                    ts.curve_id, length, window)
        return WindowBatch(np.empty((0, window)), np.empty((0, window)),
                           np.empty((0,), dtype=np.int64))
    n = (length - window) // stride + 1
    good = (~ts.missing & (ts.labels == 0)).astype(np.float64)
    windows = np.empty((n, window))
    alpha = np.empty((n, window))
    last = np.empty(n, dtype=np.int64)
    for i in range(n):
        end = window - 1 + i * stride
        windows[i] = ts.values[end - window + 1 : end + 1]
        alpha[i] = good[end - window + 1 : end + 1]
        last[i] = end
    return WindowBatch(windows, alpha, last)


def pool_windows(batches: list[WindowBatch]) -> WindowBatch:
    """Concatenate per-curve batches, recording each window's curve index."""
    if not batches:
        raise ConfigError("pool_windows needs at least one batch")
    widths = {b.width for b in batches}
    if len(widths) != 1:
        raise ConfigError(f"cannot pool batches with different window lengths: {sorted(widths)}")
    parts = []
    for ci, b in enumerate(batches):
        parts.append(np.full(b.n, ci, dtype=np.int64))
    return WindowBatch(
        np.concatenate([b.windows for b in batches], axis=0),
        np.concatenate([b.alpha for b in batches], axis=0),
        np.concatenate([b.last_index for b in batches], axis=0),
        np.concatenate(parts),
    )


def inject_missing(batch: WindowBatch, rate: float, rng: np.random.Generator) -> WindowBatch:
    """Independently zero each window point with probability rate.

    Injected points get value 0 (the fill value of standardized data)
    and alpha 0. Original batch is unmodified.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"missing rate must be in [0, 1), got {rate}")
    out = batch.copy()
    if rate == 0.0:
        return out
    hit = rng.random(out.windows.shape) < rate
    out.windows[hit] = 0.0
    out.alpha[hit] = 0.0
    return out


def _pattern_cut(window_a: np.ndarray, window_b: np.ndarray,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, int]:
    w = window_a.size
    j = int(rng.integers(1, w))
    out = np.concatenate([window_a[:j], window_b[j:]])
    alpha = np.ones(w)
    alpha[j : min(j + 4, w)] = 0.0  # junction neighborhood, at most 4 points
    return out, alpha, j


def augment_pattern(window_a: np.ndarray, window_b: np.ndarray,
                    rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Splice a random prefix of one window onto another's suffix.

    The junction is a synthetic pattern anomaly: alpha is zeroed at the
    cut point and up to 3 following points.
    """
    window_a = np.asarray(window_a, dtype=np.float64)
    window_b = np.asarray(window_b, dtype=np.float64)
    if window_a.shape != window_b.shape or window_a.ndim != 1:
        raise ConfigError(f"augment_pattern needs equal-length vectors, got {window_a.shape} and {window_b.shape}")
    if window_a.size < 2:
        raise ConfigError("augment_pattern needs windows of length >= 2")
    out, alpha, _ = _pattern_cut(window_a, window_b, rng)
    return out, alpha


def augment_value(window: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Replace a few points with values drawn from a widened range.

    m in [1, max(1, floor(0.05 W))] points move to uniform(mean +/- 3*span)
    where span = max(window range, 1.0); the floor keeps mutations nonzero
    on degenerate (constant) windows. Mutated points get alpha 0.
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 1 or window.size < 1:
        raise ConfigError(f"augment_value needs a nonempty vector, got shape {window.shape}")
    w = window.size
    m_max = max(1, w // 20)
    m = int(rng.integers(1, m_max + 1))
    pos = rng.choice(w, size=m, replace=False)
    mean = float(window.mean())
    span = max(float(window.max() - window.min()), 1.0)
    draws = rng.uniform(mean - 3.0 * span, mean + 3.0 * span, size=m)
    same = draws == window[pos]
    draws[same] += span  # mutation must change the value
    out = window.copy()
    out[pos] = draws
    alpha = np.ones(w)
    alpha[pos] = 0.0
    return out, alpha


def augment(batch: WindowBatch, rate: float, curves: list[TimeSeries],
            rng: np.random.Generator) -> WindowBatch:
    """Replace a fraction of windows with synthetic anomalous ones.

    Half (rounded down) of the replacements are pattern splices with a
    donor slice from a different curve, the rest are value mutations.
    Pattern replacements fall back to value mutation when no other curve
    is long enough. Replaced windows keep their batch position. The
    resulting alpha is the op's alpha ANDed with the flags of whatever
    content the output window retains, so carried-over bad points stay
    masked.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"augment rate must be in [0, 1), got {rate}")
    out = batch.copy()
    n_rep = int(round(rate * batch.n))
    if n_rep == 0:
        return out
    w = batch.width
    chosen = rng.choice(batch.n, size=n_rep, replace=False)
    n_pattern = n_rep // 2

    curve_good = []
    for c in curves:
        curve_good.append((~c.missing & (c.labels == 0)).astype(np.float64))

    for slot, i in enumerate(chosen):
        pattern = slot < n_pattern
        if pattern:
            ci = int(batch.curve_index[i])
            donors = [d for d in range(len(curves)) if d != ci and len(curves[d]) >= w]
            if not donors:
                pattern = False
        if pattern:
            d = donors[int(rng.integers(len(donors)))]
            start = int(rng.integers(0, len(curves[d]) - w + 1))
            donor_vals = curves[d].values[start : start + w]
            donor_alpha = curve_good[d][start : start + w]
            spliced, a_op, j = _pattern_cut(batch.windows[i], donor_vals, rng)
            alpha = a_op.copy()
            alpha[:j] = np.minimum(alpha[:j], batch.alpha[i][:j])
            alpha[j:] = np.minimum(alpha[j:], donor_alpha[j:])
            out.windows[i] = spliced
            out.alpha[i] = alpha
        else:
            mutated, a_op = augment_value(batch.windows[i], rng)
            out.windows[i] = mutated
            out.alpha[i] = np.minimum(a_op, batch.alpha[i])
    return out


def preprocess_curve(ts: TimeSeries, use_labels: bool = True) -> tuple[TimeSeries, float, float]:
    """fill_missing then standardize; the standard per-curve pipeline."""
    filled = fill_missing(ts, use_labels=use_labels)
    return standardize(filled)
