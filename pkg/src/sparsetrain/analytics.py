"""Trajectory diagnostics: active/inactive sets, search distance, decorrelation.

A weight is *active* at a snapshot if its magnitude stays at or above the
threshold from that snapshot to the end of the log, *inactive* if it stays
below throughout, and undecided otherwise.  Search distance is the running
sum of absolute per-snapshot increments.  The decorrelation time of a weight
series is the smallest lag at which its windowed autocorrelation reaches
zero, as a fraction of total training steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ZeroVarianceError
from .trajectory import TrajectoryLog


@dataclass
class SetEvolution:
    steps: np.ndarray
    active_fraction: np.ndarray
    inactive_fraction: np.ndarray
    undecided_fraction: np.ndarray


@dataclass
class DeltaProfile:
    """Per-magnitude-bin median decorrelation time for one layer."""

    bin_edges: np.ndarray  # n_bins + 1 quantile edges over final |w|
    median_delta: np.ndarray  # nan where a bin is empty
    counts: np.ndarray
    excluded: np.ndarray  # zero-variance series per bin, not in the median
    layer: int


def inference_threshold(final_weights, d: float) -> float:
    """Magnitude tau such that the ceil(d*N) largest final weights have |w| >= tau."""
    if isinstance(final_weights, np.ndarray):
        final_weights = [final_weights]
    mags = np.concatenate([np.abs(np.asarray(w, dtype=np.float64)).ravel() for w in final_weights])
    if mags.size == 0:
        raise ValueError("no weights given")
    if not 0.0 < d <= 1.0:
        raise ValueError(f"d must be in (0, 1], got {d}")
    k = math.ceil(d * mags.size)
    return float(np.partition(mags, mags.size - k)[mags.size - k])


def _stacked_series(log: TrajectoryLog) -> np.ndarray:
    if log.snapshot_count == 0:
        raise ValueError("log has no snapshots")
    return np.hstack([log.layer_series(i) for i in range(len(log.layers))])


def classify_sets(log: TrajectoryLog, threshold: float) -> SetEvolution:
    """Suffix classification of every tracked weight at every snapshot."""
    series = np.abs(_stacked_series(log))  # (T, N)
    above = series >= threshold
    active = np.logical_and.accumulate(above[::-1], axis=0)[::-1]
    inactive = np.logical_and.accumulate(~above[::-1], axis=0)[::-1]
    af = active.mean(axis=1)
    inf_ = inactive.mean(axis=1)
    return SetEvolution(
        steps=np.asarray(log.steps),
        active_fraction=af,
        inactive_fraction=inf_,
        undecided_fraction=1.0 - af - inf_,
    )


def cumulative_distance(log: TrajectoryLog, normalize: bool = False) -> np.ndarray:
    """Partial sums of sum_w |w(t+1) - w(t)| over snapshot transitions."""
    series = _stacked_series(log).astype(np.float64)
    if series.shape[0] < 2:
        raise ValueError("need at least 2 snapshots")
    increments = np.abs(np.diff(series, axis=0)).sum(axis=1)
    dist = np.cumsum(increments)
    if normalize and dist[-1] > 0:
        dist = dist / dist[-1]
    return dist


def pearson(x, y) -> float:
    """Pearson correlation; raises ZeroVarianceError when undefined."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("need at least 2 points")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(np.mean(xc * xc)))
    sy = math.sqrt(float(np.mean(yc * yc)))
    if sx == 0.0 or sy == 0.0:
        raise ZeroVarianceError("correlation undefined for a constant series")
    return float(np.mean(xc * yc)) / (sx * sy)


def autocorrelation_at_lag(series, tau: int) -> float:
    """Pearson correlation between the series and itself shifted by tau."""
    s = np.asarray(series, dtype=np.float64).ravel()
    if not 0 <= tau < s.size:
        raise ValueError(f"lag {tau} out of range for series of length {s.size}")
    if s.size - tau < 2:
        raise ValueError(f"lag {tau} leaves a window shorter than 2")
    return pearson(s[: s.size - tau], s[tau:])


def decorrelation_time(series, total_steps: int, step_stride: int = 1) -> float:
    """Fraction of training after which the series stops correlating with itself.

    Scans lags upward for the first autocorrelation <= 0 and linearly
    interpolates between the bracketing lags; lags convert to steps via
    ``step_stride``.  Returns 1.0 if the correlation never reaches zero.
    Raises ZeroVarianceError for a constant series (excluded-weight signal).
    """
    s = np.asarray(series, dtype=np.float64).ravel()
    if s.size < 3:
        raise ValueError("need a series of length >= 3")
    if total_steps <= 0:
        raise ValueError("total_steps must be > 0")
    prev_lag, prev_rho = 0, autocorrelation_at_lag(s, 0)  # raises if constant
    for lag in range(1, s.size - 1):
        try:
            rho = autocorrelation_at_lag(s, lag)
        except ZeroVarianceError:
            continue  # window degenerate at this lag; keep scanning
        if rho <= 0.0:
            tau = prev_lag + prev_rho / (prev_rho - rho) * (lag - prev_lag)
            return min(1.0, tau * step_stride / total_steps)
        prev_lag, prev_rho = lag, rho
    return 1.0


def delta_by_magnitude_bins(
    log: TrajectoryLog,
    n_bins: int,
    total_steps: int | None = None,
    layer: int | None = None,
) -> DeltaProfile:
    """Median decorrelation time per final-magnitude quantile bin of one layer.

    ``layer`` defaults to the layer with the most tracked weights;
    ``total_steps`` defaults to the last recorded step.  Constant series are
    excluded from medians and counted separately.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if log.snapshot_count == 0:
        raise ValueError("log has no snapshots")
    if layer is None:
        layer = int(np.argmax([t.indices.size for t in log.layers]))
    if total_steps is None:
        total_steps = log.steps[-1]
    series = log.layer_series(layer)  # (T, n)
    finals = np.abs(series[-1].astype(np.float64))
    edges = np.quantile(finals, np.linspace(0.0, 1.0, n_bins + 1))
    which = np.clip(np.searchsorted(edges[1:-1], finals, side="right"), 0, n_bins - 1)
    per_bin: list[list[float]] = [[] for _ in range(n_bins)]
    excluded = np.zeros(n_bins, dtype=int)
    for w in range(series.shape[1]):
        b = int(which[w])
        try:
            per_bin[b].append(
                decorrelation_time(series[:, w], total_steps, step_stride=log.stride)
            )
        except ZeroVarianceError:
            excluded[b] += 1
    medians = np.array([np.median(v) if v else np.nan for v in per_bin])
    counts = np.array([len(v) for v in per_bin])
    return DeltaProfile(
        bin_edges=edges, median_delta=medians, counts=counts, excluded=excluded, layer=layer
    )


def search_capacity(regular: float, search: float, reduce: float) -> float:
    """(regular - search) / (regular - reduce), the raw capacity-for-search ratio.

    By this formula 0 means the sparse run matched the free-search baseline
    and 1 means it only matched the reduced model; reports surface both the
    raw value and 1 - raw.
    """
    if regular == reduce:
        raise ValueError("degenerate baselines: regular == reduce")
    return (regular - search) / (regular - reduce)
