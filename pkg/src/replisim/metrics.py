"""Latency percentiles, empirical CDFs and queue-estimation error."""

import math
from typing import NamedTuple, Optional

import numpy as np


class TraceRow(NamedTuple):
    """One scoring of the traced server by some client."""
    time: int              # us
    client: int
    true_queue: int        # wait-queue length at the server right now
    estimate: float        # queue estimate used by the ranking strategy
    q_feedback: float      # last feedback queue length (nan if none)
    outstanding: int
    tau_w: Optional[int]   # us since that feedback arrived; None if none yet
    c3_estimate: float     # 1 + EWMA of feedback queue lengths
    extrapolated: float    # feedback queue + (lambda - mu) * delay (nan if none)


def percentile(samples, p: float) -> float:
    """Nearest-rank percentile: the ``ceil(p * N)``-th smallest sample."""
    values = np.sort(np.asarray(samples))
    n = len(values)
    if n == 0:
        raise ValueError("percentile of an empty sample set")
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    rank = math.ceil(round(p * n, 9))
    return values[min(max(rank, 1), n) - 1].item()


def percentiles(samples, ps=(0.5, 0.95, 0.99, 0.999)):
    values = np.sort(np.asarray(samples))
    return {p: percentile(values, p) for p in ps}


def ecdf(samples):
    """Empirical CDF as ``(values, cumulative_probability)`` arrays."""
    values = np.sort(np.asarray(samples))
    if len(values) == 0:
        return values, np.zeros(0)
    uniq, idx = np.unique(values, return_index=True)
    counts_below = np.append(idx[1:], len(values))
    return uniq, counts_below / len(values)


def downsample(xs, ps, fraction: float):
    """Keep roughly ``fraction`` of CDF points, always including the last."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    n = len(xs)
    if n == 0:
        return xs, ps
    step = max(1, int(round(1 / fraction)))
    keep = np.arange(0, n, step)
    if keep[-1] != n - 1:
        keep = np.append(keep, n - 1)
    return np.asarray(xs)[keep], np.asarray(ps)[keep]


def tail_fraction(samples, threshold) -> float:
    """P(sample > threshold)."""
    values = np.asarray(samples)
    if len(values) == 0:
        return math.nan
    return float(np.count_nonzero(values > threshold)) / len(values)


def estimation_error(trace, threshold: int = 100_000) -> dict:
    """Mean absolute queue-estimation error, split by feedback age.

    Rows with no feedback yet count as stale. The replay entries compare two
    estimators on the fresh rows only: the extrapolated feedback queue and
    ``1 + EWMA``, both without the outstanding-key term.
    """
    fresh, stale, replay_ex, replay_c3 = [], [], [], []
    for row in trace:
        err = abs(row.estimate - row.true_queue)
        if row.tau_w is not None and row.tau_w <= threshold:
            fresh.append(err)
            replay_ex.append(abs(max(row.extrapolated, 0.0) - row.true_queue))
            replay_c3.append(abs(row.c3_estimate - row.true_queue))
        else:
            stale.append(err)

    def mae(errs):
        return float(np.mean(errs)) if errs else math.nan

    return {
        "mae_fresh": mae(fresh),
        "mae_stale": mae(stale),
        "n_fresh": len(fresh),
        "n_stale": len(stale),
        "replay_extrapolated": mae(replay_ex),
        "replay_c3": mae(replay_c3),
    }
