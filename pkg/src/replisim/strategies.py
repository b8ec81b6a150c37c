"""Replica scoring. Lower scores are better; scores are in milliseconds.

Each ``score_*`` function returns ``(score, queue_estimate)`` so callers can
trace the queue estimate behind a ranking. They read a replica view without
modifying it.
"""

import math
from typing import NamedTuple

# strategy id -> (ranking method, rate control mode)
STRATEGIES = {
    "c3": ("c3", "c3"),
    "tars": ("tars", "tars"),
    "trr": ("tars", "c3"),
    "oracle_c3rc": ("oracle", "c3"),
    "oracle_tarsrc": ("oracle", "tars"),
    "random": ("random", "c3"),
    "lor": ("lor", "c3"),
}

TIE_BREAKS = ("id", "random")

# Branches of the timeliness-aware scorer.
IDLE = "idle"          # stale feedback, nothing outstanding, never skipped
SKIPPED = "skipped"    # stale feedback, nothing outstanding, skipped often
FALLBACK = "fallback"  # stale feedback otherwise: cubic estimate
FRESH = "fresh"        # feedback young enough to extrapolate the queue


class TarsScore(NamedTuple):
    score: float
    queue_estimate: float
    branch: str


def c3_queue_estimate(q_ewma: float, outstanding: int, n: int) -> float:
    return 1.0 + q_ewma + n * outstanding


def c3_score(r_ewma: float, t_ewma: float, queue_estimate: float) -> float:
    return r_ewma - t_ewma + queue_estimate ** 3 * t_ewma


def score_c3(view, n: int):
    qbar = c3_queue_estimate(view.q_ewma, view.outstanding, n)
    return c3_score(view.r_ewma, view.t_ewma, qbar), qbar


def tars_queue_estimate(q_feedback: float, lam: float, mu: float, delay: float,
                        outstanding: int, n: int) -> float:
    """Feedback queue length extrapolated across the network delay, plus
    the outstanding-key penalty. Not clamped."""
    return q_feedback + (lam - mu) * delay + n * outstanding


def tars_score(delay: float, queue_estimate: float, mu: float) -> float:
    q = max(queue_estimate, 0.0)
    return delay + q ** 3 / mu


def tars_branch(tau_w: float, outstanding: int, not_selected: int, threshold: float,
                retry_after_skips: int) -> str:
    """Which scoring rule applies. ``tau_w`` may be ``math.inf``."""
    if tau_w > threshold:
        if outstanding == 0 and not_selected == 0:
            return IDLE
        if outstanding == 0 and not_selected > retry_after_skips:
            return SKIPPED
        return FALLBACK
    return FRESH


def score_tars(view, now: int, n: int, threshold: int = 100_000,
               retry_after_skips: int = 6) -> TarsScore:
    """Timeliness-aware score of one replica.

    ``now`` and ``threshold`` are in microseconds. Without usable feedback
    (none yet, or a zero service rate) the replica is scored as if its
    feedback were stale, with ``1 / t_ewma`` standing in for the rate.
    """
    fb = view.feedback
    usable = fb is not None and fb.mu > 0
    if usable:
        tau_w = now - view.feedback_at
        delay = view.response - fb.sojourn
        mu = fb.mu
    else:
        tau_w = math.inf
        if fb is None:
            delay = view.r_ewma - view.t_ewma
        else:
            delay = view.response - fb.sojourn
        mu = 1.0 / view.t_ewma

    branch = tars_branch(tau_w, view.outstanding, view.not_selected, threshold,
                         retry_after_skips)
    if branch == FRESH:
        qbar = tars_queue_estimate(fb.q_feedback, fb.lam, fb.mu, delay, view.outstanding, n)
    elif branch == FALLBACK:
        qbar = c3_queue_estimate(view.q_ewma, view.outstanding, n)
    else:
        qbar = 0.0
    qbar = max(qbar, 0.0)
    return TarsScore(tars_score(delay, qbar, mu), qbar, branch)


def score_oracle(server):
    """True waiting-queue length over true service capacity."""
    q = len(server.wait_queue)
    return q / server.true_rate(), float(q)


def score_least_outstanding(view):
    return float(view.outstanding), float(view.outstanding)


def score_random(rng):
    return rng.random(), math.nan
