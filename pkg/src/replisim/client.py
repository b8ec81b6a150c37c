"""Clients: workload generation, replica ranking, rate limiting, backlog."""

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

from .cluster import ewma
from .core import SimulationError
from .rate_control import RateLimiter
from .strategies import (
    score_c3, score_least_outstanding, score_oracle, score_random, score_tars,
)


class Key:
    __slots__ = (
        "id", "client", "group", "created_at", "server", "sent_at",
        "arrived_at", "service_start", "service_time", "window_marks",
    )

    def __init__(self, id: int, client: int, group: Tuple[int, ...], created_at: int):
        self.id = id
        self.client = client
        self.group = group
        self.created_at = created_at
        self.server = None
        self.sent_at = None
        self.arrived_at = None
        self.service_start = None
        self.service_time = None
        self.window_marks = None


class ReplicaView:
    """What one client knows about one server. Durations in ms."""

    __slots__ = (
        "server_id", "feedback", "feedback_at", "q_ewma", "t_ewma", "r_ewma",
        "response", "outstanding", "not_selected",
    )

    def __init__(self, server_id: int, t_init: float, r_init: float):
        self.server_id = server_id
        self.feedback = None
        self.feedback_at = None  # us; None until the first value returns
        self.q_ewma = 0.0
        self.t_ewma = t_init
        self.r_ewma = r_init
        self.response = r_init
        self.outstanding = 0
        self.not_selected = 0

    def tau_w(self, now: int) -> Optional[int]:
        if self.feedback_at is None:
            return None
        return now - self.feedback_at


class ReplicaGroupMap:
    """Partitions of the keyspace, each replicated on a fixed server list."""

    def __init__(self, groups: List[Tuple[int, ...]]):
        if not groups:
            raise ValueError("need at least one replica group")
        self.groups = [tuple(g) for g in groups]
        for g in self.groups:
            if len(set(g)) != len(g):
                raise ValueError(f"replica group {g} repeats a server")

    @classmethod
    def cyclic(cls, num_servers: int, replication: int = 3) -> "ReplicaGroupMap":
        if replication > num_servers:
            raise ValueError("replication factor exceeds server count")
        return cls([tuple((i + j) % num_servers for j in range(replication))
                    for i in range(num_servers)])

    def __len__(self):
        return len(self.groups)

    def choose(self, rng) -> Tuple[int, ...]:
        return self.groups[rng.randrange(len(self.groups))]

    def servers(self):
        return sorted({s for g in self.groups for s in g})


@dataclass
class WorkloadSpec:
    """Aggregate Poisson demand split across generators and clients.

    ``skew`` is ``(client_fraction, demand_fraction)``, e.g. ``(0.2, 0.8)``
    for 20% of clients producing 80% of keys, or None for uniform demand.
    """
    total_rate: float  # keys/ms
    num_generators: int = 200
    skew: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.total_rate < 0:
            raise ValueError("total_rate must be non-negative")
        if self.num_generators < 1:
            raise ValueError("num_generators must be positive")
        if self.skew is not None:
            clients, demand = self.skew
            if not (0 < clients < 1 and 0 < demand < 1):
                raise ValueError(f"skew fractions must lie in (0, 1): {self.skew}")

    @property
    def generator_rate(self) -> float:
        return self.total_rate / self.num_generators

    def hot_clients(self, num_clients: int) -> int:
        if self.skew is None:
            return num_clients
        return min(num_clients - 1, max(1, round(self.skew[0] * num_clients)))

    def client_chooser(self, num_clients: int) -> Callable:
        """Return ``rng -> client index`` drawing from the demand split."""
        if self.skew is None:
            return lambda rng: rng.randrange(num_clients)
        hot = self.hot_clients(num_clients)
        demand = self.skew[1]

        def choose(rng):
            if rng.random() < demand:
                return rng.randrange(hot)
            return hot + rng.randrange(num_clients - hot)
        return choose

    def next_gap(self, rng) -> int:
        """Exponential inter-arrival gap of one generator, in whole ticks."""
        return max(1, int(rng.expovariate(self.generator_rate / 1000.0) + 0.5))


class Client:
    def __init__(self, id: int, num_servers: int, n: int, ranking: str, rate_mode: str,
                 limiter_kwargs: dict, t_init: float, r_init: float,
                 ewma_weight: float = 0.9, threshold: int = 100_000,
                 retry_after_skips: int = 6, tie_break: str = "id",
                 tie_rng=None, random_rng=None, servers=None):
        self.id = id
        self.n = n
        self.ranking = ranking
        self.rate_mode = rate_mode
        self.ewma_weight = ewma_weight
        self.threshold = threshold
        self.retry_after_skips = retry_after_skips
        self.tie_break = tie_break
        self.tie_rng = tie_rng
        self.random_rng = random_rng
        self.servers = servers
        if ranking == "oracle" and servers is None:
            raise ValueError("oracle ranking needs the true server states")
        self.views = [ReplicaView(s, t_init, r_init) for s in range(num_servers)]
        self.limiters = [RateLimiter(**limiter_kwargs) for _ in range(num_servers)]
        self.backlog = deque()
        self.retry_at = None
        # Optional instrumentation, wired by the simulation.
        self.tau_w_log = None
        self.probe_server = None
        self.probe = None

    def score(self, sid: int, now: int):
        ranking = self.ranking
        if ranking == "tars":
            s = score_tars(self.views[sid], now, self.n, self.threshold, self.retry_after_skips)
            return s.score, s.queue_estimate
        if ranking == "c3":
            return score_c3(self.views[sid], self.n)
        if ranking == "oracle":
            return score_oracle(self.servers[sid])
        if ranking == "lor":
            return score_least_outstanding(self.views[sid])
        if ranking == "random":
            return score_random(self.random_rng)
        raise ValueError(f"unknown ranking {ranking!r}")

    def rank(self, group, now: int):
        """Candidates as ``(score, tie, server, queue_estimate)``, best first."""
        ranked = []
        for sid in group:
            score, qbar = self.score(sid, now)
            tie = sid if self.tie_break == "id" else self.tie_rng.random()
            ranked.append((score, tie, sid, qbar))
        ranked.sort()
        return ranked

    def dispatch_key(self, key: Key, now: int) -> Optional[int]:
        """Send ``key`` to the best-ranked replica whose limiter admits it.

        Returns the chosen server, or None when every limiter is closed and
        the caller should backlog the key.
        """
        limiters = self.limiters
        group = key.group
        if not any(limiters[sid].admits(now) for sid in group):
            return None
        ranked = self.rank(group, now)
        chosen = None
        for _, _, sid, _ in ranked:
            if limiters[sid].admits(now):
                chosen = sid
                break

        views = self.views
        tau_w_log = self.tau_w_log
        for _, _, sid, qbar in ranked:
            view = views[sid]
            if tau_w_log is not None and view.feedback_at is not None:
                tau_w_log.append(now - view.feedback_at)
            if sid == self.probe_server:
                self.probe(self, view, qbar, now)
            if sid != chosen:
                view.not_selected += 1

        views[chosen].outstanding += 1
        limiters[chosen].record_send(now)
        key.server = chosen
        key.sent_at = now
        return chosen

    def on_value(self, key: Key, feedback, now: int) -> None:
        view = self.views[key.server]
        if view.outstanding < 1 or key.sent_at is None:
            raise SimulationError(f"client {self.id} got an unexpected value for key {key.id}")
        w = self.ewma_weight
        view.outstanding -= 1
        response = (now - key.sent_at) / 1000.0
        view.response = response
        view.r_ewma = ewma(view.r_ewma, response, w)
        view.feedback = feedback
        view.feedback_at = now
        view.not_selected = 0
        view.q_ewma = ewma(view.q_ewma, feedback.q_feedback, w)
        view.t_ewma = ewma(view.t_ewma, feedback.service_time, w)
        limiter = self.limiters[key.server]
        limiter.record_receipt(now)
        limiter.on_feedback(feedback.q_feedback, self.rate_mode, now)

    def drain_backlog(self, now: int) -> List[Key]:
        """Retry backlogged keys in FIFO order; return the ones sent."""
        if not self.backlog:
            return []
        sent = []
        remaining = deque()
        blocked = set()
        for key in self.backlog:
            # Sends only ever close limiters, so a blocked group stays
            # blocked for the rest of this pass.
            if key.group in blocked or self.dispatch_key(key, now) is None:
                blocked.add(key.group)
                remaining.append(key)
            else:
                sent.append(key)
        self.backlog = remaining
        return sent

    def next_retry_time(self, now: int) -> Optional[int]:
        if not self.backlog:
            return None
        best = math.inf
        for group in {key.group for key in self.backlog}:
            for sid in group:
                best = min(best, self.limiters[sid].next_free_time(now))
        return int(best)
