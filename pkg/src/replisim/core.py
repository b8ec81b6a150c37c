"""Deterministic discrete-event engine.

Time is an integer count of microseconds. Events are ordered by
``(fire_at, sequence)`` where ``sequence`` is a global insertion counter, so
two events scheduled for the same instant fire in the order they were
scheduled.
"""

import enum
import heapq
import itertools
import random
from typing import Any, Callable, NamedTuple, Optional

US_PER_MS = 1000


def ms(value: float) -> int:
    """Convert milliseconds to integer ticks (microseconds)."""
    return int(round(value * US_PER_MS))


class SimulationError(RuntimeError):
    """A logic error inside a run, such as scheduling into the past."""


class EventKind(enum.IntEnum):
    KEY_GENERATED = 0
    KEY_ARRIVES_AT_SERVER = 1
    SERVICE_COMPLETES = 2
    VALUE_ARRIVES_AT_CLIENT = 3
    FLUCTUATION_TICK = 4
    BACKLOG_RETRY = 5
    MEASUREMENT_TICK = 6


class Event(NamedTuple):
    fire_at: int
    sequence: int
    kind: EventKind
    payload: Any = None


class RngStreams:
    """Named, independently seeded random substreams.

    ``random.Random`` seeded with a string hashes it with SHA-512, so a given
    ``(seed, label)`` pair produces the same draws on every platform.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._streams = {}

    def __getitem__(self, label: str) -> random.Random:
        rng = self._streams.get(label)
        if rng is None:
            rng = random.Random(f"{self.seed}/{label}")
            self._streams[label] = rng
        return rng


class Simulator:
    def __init__(self, record_trace: bool = False):
        self.now = 0
        self.dispatched = 0
        self._heap = []
        self._counter = itertools.count()
        self._handlers = {}
        self.trace = [] if record_trace else None

    def on(self, kind: EventKind, handler: Callable[[Event], None]) -> None:
        self._handlers[kind] = handler

    def schedule(self, fire_at: int, kind: EventKind, payload: Any = None) -> Event:
        if fire_at < self.now:
            raise SimulationError(
                f"cannot schedule {kind.name} at t={fire_at} from t={self.now}")
        event = Event(fire_at, next(self._counter), kind, payload)
        heapq.heappush(self._heap, event)
        return event

    def pending(self) -> int:
        return len(self._heap)

    def run_until(self, end: Optional[int] = None,
                  max_events: Optional[int] = None) -> None:
        """Dispatch events until the queue empties, ``end`` passes, or
        ``max_events`` have been dispatched by this call."""
        heap = self._heap
        handlers = self._handlers
        trace = self.trace
        count = 0
        while heap:
            if end is not None and heap[0].fire_at > end:
                break
            if max_events is not None and count >= max_events:
                break
            event = heapq.heappop(heap)
            self.now = event.fire_at
            if trace is not None:
                trace.append((event.fire_at, event.sequence, int(event.kind)))
            handlers[event.kind](event)
            count += 1
        self.dispatched += count
