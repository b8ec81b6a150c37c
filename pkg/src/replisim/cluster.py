"""Server model: FIFO wait queue in front of parallel service slots.

Service times are exponential around a mean that flips between two regimes
every fluctuation interval. Each completed key carries back a ``Feedback``
record measured at the server.
"""

from collections import deque
from typing import NamedTuple, Optional

FLUCTUATION_MODES = ("faster", "slower")


class Feedback(NamedTuple):
    """Piggybacked on every returned value. Durations in ms, rates in keys/ms."""
    q_feedback: int
    service_time: float
    lam: float
    mu: float
    sojourn: float


def ewma(old: Optional[float], sample: float, weight: float) -> float:
    """``weight * old + (1 - weight) * sample``; the first sample seeds it."""
    if old is None:
        return sample
    return weight * old + (1.0 - weight) * sample


class MeasurementWindow:
    """Counts events over one window and keeps the previous window around
    so an empty window can borrow from it."""

    __slots__ = ("previous",)

    def __init__(self):
        self.previous = None  # (count, length_ms) of the last closed window

    def close(self, count: int, length: float, combine: Optional[bool] = None) -> Optional[float]:
        """Close a window of ``length`` ms holding ``count`` events and return
        its rate in events/ms. Returns None for a zero-length window."""
        if length <= 0:
            return None
        if combine is None:
            combine = count == 0
        prev = self.previous
        self.previous = (count, length)
        if combine and prev is not None:
            return (count + prev[0]) / (length + prev[1])
        return count / length


def measure_rate(meter: MeasurementWindow, count: int, length: float) -> Optional[float]:
    return meter.close(count, length)


class Server:
    __slots__ = (
        "id", "slot_capacity", "base_service_time", "mean_service_time",
        "range_param", "fluctuation_mode", "ewma_weight",
        "wait_queue", "busy_slots", "arrivals", "completions",
        "lambda_meter", "mu_meter", "lam", "mu", "lam_sample", "mu_sample",
    )

    def __init__(self, id: int, slot_capacity: int = 4, base_service_time: int = 4000,
                 range_param: float = 3.0, fluctuation_mode: str = "faster",
                 ewma_weight: float = 0.9):
        if fluctuation_mode not in FLUCTUATION_MODES:
            raise ValueError(f"unknown fluctuation mode {fluctuation_mode!r}")
        self.id = id
        self.slot_capacity = slot_capacity
        self.base_service_time = base_service_time  # us
        self.mean_service_time = float(base_service_time)  # us, current regime
        self.range_param = range_param
        self.fluctuation_mode = fluctuation_mode
        self.ewma_weight = ewma_weight
        self.wait_queue = deque()
        self.busy_slots = 0
        self.arrivals = 0
        self.completions = 0
        self.lambda_meter = MeasurementWindow()
        self.mu_meter = MeasurementWindow()
        self.lam = None  # keys/ms, server-side EWMA
        self.mu = None
        self.lam_sample = None  # raw rates of the last closed window
        self.mu_sample = None

    @property
    def queue_length(self) -> int:
        return len(self.wait_queue)

    def true_rate(self) -> float:
        """Instantaneous service capacity in keys/ms."""
        return self.slot_capacity * 1000.0 / self.mean_service_time

    def regime_means(self):
        base = float(self.base_service_time)
        if self.fluctuation_mode == "faster":
            return base, base / self.range_param
        return base, base * self.range_param

    def enqueue_key(self, key, now: int) -> bool:
        """Accept ``key``. Returns True when a slot is free and the caller
        should start service right away."""
        self.arrivals += 1
        key.arrived_at = now
        if self.busy_slots < self.slot_capacity:
            return True
        self.wait_queue.append(key)
        return False

    def start_service(self, key, now: int, rng) -> int:
        """Occupy a slot with ``key`` and return its service duration."""
        self.busy_slots += 1
        key.service_start = now
        key.window_marks = (self.completions, self.arrivals)
        duration = draw_service_time(self, rng)
        key.service_time = duration
        return duration

    def complete_service(self, key, now: int):
        """Free ``key``'s slot. Returns ``(feedback, next_key)`` where
        ``next_key`` is the queued key that should now start service."""
        self.busy_slots -= 1
        completions0, arrivals0 = key.window_marks
        others_done = self.completions - completions0
        arrived = self.arrivals - arrivals0
        self.completions += 1
        self._measure(others_done, arrived, (now - key.service_start) / 1000.0)

        next_key = self.wait_queue.popleft() if self.wait_queue else None
        feedback = Feedback(
            q_feedback=len(self.wait_queue),
            service_time=key.service_time / 1000.0,
            lam=self.lam if self.lam is not None else 0.0,
            mu=self.mu if self.mu is not None else 0.0,
            sojourn=(now - key.arrived_at) / 1000.0,
        )
        return feedback, next_key

    def _measure(self, done: int, arrived: int, length: float) -> None:
        # Both rates share one interval, so the completion count decides
        # whether the window borrows from the previous one.
        combine = done == 0
        mu_sample = self.mu_meter.close(done, length, combine)
        lam_sample = self.lambda_meter.close(arrived, length, combine)
        if mu_sample is None:
            return
        self.mu_sample, self.lam_sample = mu_sample, lam_sample
        self.mu = ewma(self.mu, mu_sample, self.ewma_weight)
        self.lam = ewma(self.lam, lam_sample, self.ewma_weight)


def draw_service_time(server: Server, rng) -> int:
    """Exponential service time at the current regime mean, in whole ticks."""
    return max(1, int(rng.expovariate(1.0 / server.mean_service_time) + 0.5))


def fluctuate(server: Server, rng) -> None:
    """Pick one of the two regimes with equal probability."""
    base, other = server.regime_means()
    server.mean_service_time = base if rng.random() < 0.5 else other
