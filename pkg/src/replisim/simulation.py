"""One simulated run: servers, clients and workload wired to the event loop."""

import math
from array import array
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .client import Client, Key, ReplicaGroupMap, WorkloadSpec
from .cluster import Server, fluctuate
from .core import EventKind, RngStreams, Simulator, ms
from .metrics import TraceRow
from .strategies import STRATEGIES


@dataclass
class RunReport:
    strategy: str
    seed: int
    latencies: np.ndarray          # ms, one per completed key
    tau_w: np.ndarray              # ms, per candidate replica at each send
    generated: int
    completed: int
    backlogged_at_end: int
    in_flight_at_end: int
    duration: float                # ms until the last value returned
    events: int
    backlog_series: List[tuple] = field(default_factory=list)  # (ms, keys)
    trace: List[TraceRow] = field(default_factory=list)
    audit: List[list] = field(default_factory=list)  # per limiter, non-empty only

    @property
    def throughput(self) -> float:
        return self.completed / self.duration if self.duration > 0 else math.nan


def arrival_rate(scenario) -> float:
    """Aggregate key rate (keys/ms) for the scenario's target utilization,
    taken against the regime-averaged service capacity."""
    server = Server(0, scenario.slot_capacity, ms(scenario.service_time_ms),
                    scenario.range_param, scenario.fluctuation_mode)
    mean_rate = sum(1000.0 / m for m in server.regime_means()) / 2
    return scenario.utilization * scenario.num_servers * scenario.slot_capacity * mean_rate


class Simulation:
    def __init__(self, scenario, seed: int, trace_server: Optional[int] = None,
                 audit: bool = False, record_events: bool = False):
        self.scenario = sc = scenario
        self.seed = seed
        self.rng = RngStreams(seed)
        self.sim = Simulator(record_trace=record_events)
        self.latency = ms(sc.latency_ms)
        self.budget = sc.key_budget
        ranking, self.rate_mode = STRATEGIES[sc.strategy]

        self.servers = [
            Server(i, sc.slot_capacity, ms(sc.service_time_ms), sc.range_param,
                   sc.fluctuation_mode, sc.server_ewma)
            for i in range(sc.num_servers)
        ]
        self.groups = ReplicaGroupMap.cyclic(sc.num_servers, sc.replication)
        self.workload = WorkloadSpec(arrival_rate(sc), sc.num_generators,
                                     tuple(sc.skew) if sc.skew else None)
        self.choose_client = self.workload.client_chooser(sc.num_clients)

        limiter_kwargs = dict(
            delta=ms(sc.delta_ms), beta=sc.beta, gamma=sc.gamma, s_max=sc.s_max,
            queue_threshold=sc.queue_threshold, floor=sc.rate_floor,
            initial_srate=sc.initial_srate, start=0, audit=audit,
        )
        t_init = sc.service_time_ms
        r_init = 2 * sc.latency_ms + t_init
        self.tau_w = array("q")
        self.trace = []
        self.trace_server = trace_server
        self.clients = []
        for c in range(sc.num_clients):
            client = Client(
                c, sc.num_servers, sc.num_clients, ranking, self.rate_mode,
                limiter_kwargs, t_init, r_init, sc.client_ewma,
                ms(sc.timeliness_threshold_ms), sc.retry_after_skips, sc.tie_break,
                tie_rng=self.rng["tiebreak"], random_rng=self.rng["baseline"],
                servers=self.servers,
            )
            client.tau_w_log = self.tau_w
            if trace_server is not None:
                client.probe_server = trace_server
                client.probe = self._probe
            self.clients.append(client)

        self.generated = 0
        self.completed = 0
        self.last_completion = 0
        self.latencies = array("q")
        self.backlog_series = []

        s = self.sim
        s.on(EventKind.KEY_GENERATED, self._on_key_generated)
        s.on(EventKind.KEY_ARRIVES_AT_SERVER, self._on_key_arrives)
        s.on(EventKind.SERVICE_COMPLETES, self._on_service_completes)
        s.on(EventKind.VALUE_ARRIVES_AT_CLIENT, self._on_value_arrives)
        s.on(EventKind.FLUCTUATION_TICK, self._on_fluctuation)
        s.on(EventKind.BACKLOG_RETRY, self._on_backlog_retry)
        s.on(EventKind.MEASUREMENT_TICK, self._on_measurement)

    @property
    def active(self) -> bool:
        return self.generated < self.budget or self.completed < self.generated

    def run(self) -> RunReport:
        s = self.sim
        arrivals = self.rng["arrivals"]
        if self.budget > 0:
            for g in range(self.scenario.num_generators):
                s.schedule(self.workload.next_gap(arrivals), EventKind.KEY_GENERATED, g)
        s.schedule(0, EventKind.FLUCTUATION_TICK)
        s.schedule(0, EventKind.MEASUREMENT_TICK)
        s.run_until()
        return self.report()

    def report(self) -> RunReport:
        backlogged = sum(len(c.backlog) for c in self.clients)
        audit = []
        for c in self.clients:
            for lim in c.limiters:
                if lim.audit:
                    audit.append(lim.audit)
        return RunReport(
            strategy=self.scenario.strategy,
            seed=self.seed,
            latencies=np.frombuffer(self.latencies, dtype=np.int64) / 1000.0,
            tau_w=np.frombuffer(self.tau_w, dtype=np.int64) / 1000.0,
            generated=self.generated,
            completed=self.completed,
            backlogged_at_end=backlogged,
            in_flight_at_end=self.generated - self.completed - backlogged,
            duration=self.last_completion / 1000.0,
            events=self.sim.dispatched,
            backlog_series=self.backlog_series,
            trace=self.trace,
            audit=audit,
        )

    # event handlers

    def _on_key_generated(self, event):
        if self.generated >= self.budget:
            return
        now = event.fire_at
        key = Key(self.generated, self.choose_client(self.rng["clients"]),
                  self.groups.choose(self.rng["groups"]), now)
        self.generated += 1
        if self.generated < self.budget:
            self.sim.schedule(now + self.workload.next_gap(self.rng["arrivals"]),
                              EventKind.KEY_GENERATED, event.payload)
        client = self.clients[key.client]
        if client.dispatch_key(key, now) is None:
            client.backlog.append(key)
            self._arm_retry(client, now)
        else:
            self._send(key, now)

    def _send(self, key, now):
        self.sim.schedule(now + self.latency, EventKind.KEY_ARRIVES_AT_SERVER, key)

    def _start(self, server, key, now):
        duration = server.start_service(key, now, self.rng["service"])
        self.sim.schedule(now + duration, EventKind.SERVICE_COMPLETES, key)

    def _on_key_arrives(self, event):
        key = event.payload
        server = self.servers[key.server]
        if server.enqueue_key(key, event.fire_at):
            self._start(server, key, event.fire_at)

    def _on_service_completes(self, event):
        key = event.payload
        now = event.fire_at
        server = self.servers[key.server]
        feedback, next_key = server.complete_service(key, now)
        if next_key is not None:
            self._start(server, next_key, now)
        self.sim.schedule(now + self.latency, EventKind.VALUE_ARRIVES_AT_CLIENT, (key, feedback))

    def _on_value_arrives(self, event):
        key, feedback = event.payload
        now = event.fire_at
        client = self.clients[key.client]
        client.on_value(key, feedback, now)
        self.completed += 1
        self.last_completion = now
        self.latencies.append(now - key.created_at)
        if client.backlog:
            self._drain(client, now)

    def _drain(self, client, now):
        for key in client.drain_backlog(now):
            self._send(key, now)
        self._arm_retry(client, now)

    def _arm_retry(self, client, now):
        at = client.next_retry_time(now)
        if at is None:
            return
        if client.retry_at is None or at < client.retry_at:
            client.retry_at = at
            self.sim.schedule(at, EventKind.BACKLOG_RETRY, client)

    def _on_backlog_retry(self, event):
        client = event.payload
        now = event.fire_at
        if client.retry_at is not None and client.retry_at <= now:
            client.retry_at = None
        if client.backlog:
            self._drain(client, now)

    def _on_fluctuation(self, event):
        rng = self.rng["fluctuation"]
        for server in self.servers:
            fluctuate(server, rng)
        if self.active:
            self.sim.schedule(event.fire_at + ms(self.scenario.fluctuation_interval_ms),
                              EventKind.FLUCTUATION_TICK)

    def _on_measurement(self, event):
        backlog = sum(len(c.backlog) for c in self.clients)
        self.backlog_series.append((event.fire_at / 1000.0, backlog))
        if self.active:
            self.sim.schedule(event.fire_at + ms(self.scenario.measurement_interval_ms),
                              EventKind.MEASUREMENT_TICK)

    def _probe(self, client, view, estimate, now):
        fb = view.feedback
        if fb is None:
            q_feedback = extrapolated = math.nan
        else:
            q_feedback = fb.q_feedback
            extrapolated = fb.q_feedback + (fb.lam - fb.mu) * (view.response - fb.sojourn)
        self.trace.append(TraceRow(
            time=now,
            client=client.id,
            true_queue=len(self.servers[view.server_id].wait_queue),
            estimate=estimate,
            q_feedback=q_feedback,
            outstanding=view.outstanding,
            tau_w=view.tau_w(now),
            c3_estimate=1.0 + view.q_ewma,
            extrapolated=extrapolated,
        ))
