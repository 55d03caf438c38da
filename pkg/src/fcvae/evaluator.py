"""Best-F1 evaluation under point adjustment and delayed point adjustment.

Point adjustment credits a whole ground-truth anomaly run once any of
its points is predicted; the delayed variant only credits a run if the
first detection falls within `delay` points of the run start, and
erases the run's predictions entirely otherwise. Best F1 traverses
every distinct defined score as a threshold.

The sweep is incremental: walking thresholds from high to low, each
newly positive position either becomes a false positive (label 0) or
possibly detects its run (first eligible hit), so every threshold's
confusion matrix is maintained in O(1) per position. Counting excludes
the undefined warm-up positions, which can never be predicted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .detector import ScoreSeries
from .errors import DataError

log = logging.getLogger(__name__)


@dataclass
class EvalResult:
    precision: float
    recall: float
    f1: float
    threshold: float
    delay: int | None = None

    def to_dict(self) -> dict:
        d = {"precision": self.precision, "recall": self.recall,
             "f1": self.f1, "threshold": self.threshold}
        if self.delay is not None:
            d["delay"] = self.delay
        return d


def label_runs(labels: np.ndarray) -> list[tuple[int, int]]:
    """Maximal contiguous runs of labels=1 as inclusive (start, end) pairs."""
    labels = np.asarray(labels).astype(bool)
    if labels.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {labels.shape}")
    padded = np.concatenate([[False], labels, [False]]).astype(np.int8)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def point_adjust(pred: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Mark a whole label run predicted if any of its points is."""
    pred = np.asarray(pred).astype(np.int8)
    labels = np.asarray(labels).astype(np.int8)
    if pred.shape != labels.shape:
        raise ValueError(f"pred shape {pred.shape} != labels shape {labels.shape}")
    out = pred.copy()
    for s, e in label_runs(labels):
        if out[s : e + 1].any():
            out[s : e + 1] = 1
    return out


def delay_point_adjust(pred: np.ndarray, labels: np.ndarray, delay: int) -> np.ndarray:
    """Like point_adjust, but a run not detected within `delay` points of
    its start is erased (all its predictions set to 0)."""
    if delay < 0:
        raise ValueError(f"delay must be >= 0, got {delay}")
    pred = np.asarray(pred).astype(np.int8)
    labels = np.asarray(labels).astype(np.int8)
    if pred.shape != labels.shape:
        raise ValueError(f"pred shape {pred.shape} != labels shape {labels.shape}")
    out = pred.copy()
    for s, e in label_runs(labels):
        cutoff = min(e, s + delay)
        out[s : e + 1] = 1 if pred[s : cutoff + 1].any() else 0
    return out


def prf(pred: np.ndarray, labels: np.ndarray) -> tuple[float, float, float]:
    """Pointwise precision/recall/F1 with the degenerate-case conventions:
    no predicted positives -> P=0 if anomalies exist else 1; no true
    anomalies -> R=1; F1=0 when P+R=0."""
    pred = np.asarray(pred).astype(bool)
    labels = np.asarray(labels).astype(bool)
    if pred.shape != labels.shape:
        raise ValueError(f"pred shape {pred.shape} != labels shape {labels.shape}")
    tp = int(np.sum(pred & labels))
    fp = int(np.sum(pred & ~labels))
    fn = int(np.sum(~pred & labels))
    return _prf_from_counts(tp, fp, fn)


def _prf_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    if tp + fp == 0:
        p = 1.0 if tp + fn == 0 else 0.0
    else:
        p = tp / (tp + fp)
    r = 1.0 if tp + fn == 0 else tp / (tp + fn)
    f1 = 0.0 if p + r == 0.0 else 2.0 * p * r / (p + r)
    return p, r, f1


def _sweep(series: list[ScoreSeries], delay: int | None) -> EvalResult:
    """Exhaustive threshold traversal, high to low, ties toward larger."""
    score_vals: list[np.ndarray] = []
    run_of: list[np.ndarray] = []       # per defined position: run id or -1
    eligible: list[np.ndarray] = []     # per defined position: detection counts
    run_sizes: list[int] = []           # defined positions per run

    for ss in series:
        defined = ss.defined
        idx = np.flatnonzero(defined)
        if idx.size == 0:
            continue
        runs = label_runs(ss.labels)
        pos_run = np.full(len(ss), -1, dtype=np.int64)
        pos_elig = np.zeros(len(ss), dtype=bool)
        for s, e in runs:
            rid = len(run_sizes)
            pos_run[s : e + 1] = rid
            cutoff = e if delay is None else min(e, s + delay)
            pos_elig[s : cutoff + 1] = True
            run_sizes.append(int(defined[s : e + 1].sum()))
        score_vals.append(ss.scores[idx])
        run_of.append(pos_run[idx])
        eligible.append(pos_elig[idx])

    if not score_vals:
        raise DataError("best_f1 needs at least one defined score")

    scores = np.concatenate(score_vals)
    runs_flat = np.concatenate(run_of)
    elig_flat = np.concatenate(eligible)
    total_anomalous = int(sum(run_sizes))

    if total_anomalous == 0:
        # no observable positive class: report zeros at the max threshold
        return EvalResult(0.0, 0.0, 0.0, float(scores.max()), delay)

    order = np.argsort(scores, kind="stable")[::-1]
    detected = np.zeros(len(run_sizes), dtype=bool)
    tp = fp = 0
    best: EvalResult | None = None
    i = 0
    n = scores.size
    while i < n:
        j = i
        threshold = scores[order[i]]
        while j < n and scores[order[j]] == threshold:
            k = order[j]
            rid = runs_flat[k]
            if rid < 0:
                fp += 1
            elif elig_flat[k] and not detected[rid]:
                detected[rid] = True
                tp += run_sizes[rid]
            j += 1
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / total_anomalous
        f1 = 0.0 if p + r == 0.0 else 2.0 * p * r / (p + r)
        if best is None or f1 > best.f1:
            best = EvalResult(p, r, f1, float(threshold), delay)
        i = j
    return best


def best_f1(scores: ScoreSeries | list[ScoreSeries], delay: int | None = None) -> EvalResult:
    """Maximum (delay-)adjusted F1 over all candidate thresholds.

    Accepts one ScoreSeries or a list (scores pooled, one global
    threshold; label runs never cross curve boundaries).
    """
    series = [scores] if isinstance(scores, ScoreSeries) else list(scores)
    if not series:
        raise DataError("best_f1 needs at least one score series")
    return _sweep(series, delay)


def evaluate(series: list[ScoreSeries], delay: int = 7,
             per_curve: bool = True) -> dict:
    """Full report: pooled dataset result plus per-curve results."""
    usable = []
    for ss in series:
        if ss.defined.any():
            usable.append(ss)
        else:
            log.warning("curve %s has no defined scores; excluded from evaluation", ss.curve_id)
    if not usable:
        raise DataError("no curve has any defined scores")
    report = {
        "delay": delay,
        "dataset": {
            "best_f1": best_f1(usable, None).to_dict(),
            "delay_f1": best_f1(usable, delay).to_dict(),
        },
        "curves": {},
    }
    if per_curve:
        report["curves"] = {
            ss.curve_id: {
                "best_f1": best_f1(ss, None).to_dict(),
                "delay_f1": best_f1(ss, delay).to_dict(),
            }
            for ss in usable
        }
    return report
