"""Per-(client, server) rate limiter with cubic growth and multiplicative
decrease.

Rates are in keys per ``delta`` window. Send and receipt counts use a sliding
half-open window ``(now - delta, now]``.
"""

import math
from collections import deque

RATE_MODES = ("c3", "tars")


def cubic_target(elapsed_ms: float, r0: float, beta: float, gamma: float) -> float:
    """Cubic growth curve ``gamma * (dt - cbrt(beta * r0 / gamma))**3 + r0``.

    Equals ``r0 * (1 - beta)`` at ``dt = 0`` and flattens out at ``r0``.
    """
    k = (beta * r0 / gamma) ** (1.0 / 3.0)
    return gamma * (elapsed_ms - k) ** 3 + r0


class RateLimiter:
    __slots__ = (
        "srate", "r0", "t_dec", "t_inc", "delta", "beta", "gamma", "s_max",
        "queue_threshold", "floor", "send_log", "recv_log", "audit",
    )

    def __init__(self, delta: int = 20000, beta: float = 0.2, gamma: float = 4e-6,
                 s_max: float = 10.0, queue_threshold: int = 5, floor: float = 0.01,
                 initial_srate: float = 10.0, start: int = 0, audit: bool = False):
        if delta <= 0:
            raise ValueError("delta must be positive")
        if initial_srate < floor:
            raise ValueError("initial_srate must not be below the floor")
        self.srate = float(initial_srate)
        self.r0 = float(initial_srate)
        self.t_dec = start
        self.t_inc = start
        self.delta = delta
        self.beta = beta
        self.gamma = gamma
        self.s_max = s_max
        self.queue_threshold = queue_threshold
        self.floor = floor
        self.send_log = deque()
        self.recv_log = deque()
        # (time, "dec"|"inc", srate_before, srate_after, r0_before, r0_after)
        self.audit = [] if audit else None

    def _prune(self, log: deque, now: int) -> None:
        cutoff = now - self.delta
        while log and log[0] <= cutoff:
            log.popleft()

    def admits(self, now: int) -> bool:
        # Dropping expired entries leaves every later answer unchanged.
        self._prune(self.send_log, now)
        return len(self.send_log) < self.srate

    def record_send(self, now: int) -> None:
        self.send_log.append(now)
        self._prune(self.send_log, now)

    def record_receipt(self, now: int) -> None:
        self.recv_log.append(now)
        self._prune(self.recv_log, now)

    def rrate(self, now: int) -> int:
        self._prune(self.recv_log, now)
        return len(self.recv_log)

    def next_free_time(self, now: int) -> int:
        """Earliest time at which ``admits`` turns true, assuming no new
        sends and no change of ``srate``."""
        self._prune(self.send_log, now)
        count = len(self.send_log)
        if count < self.srate:
            return now
        # admits needs count - k < srate, i.e. k = count - ceil(srate) + 1
        allowed = math.ceil(self.srate) - 1
        k = count - allowed
        return self.send_log[k - 1] + self.delta

    def on_feedback(self, q_feedback: int, mode: str, now: int) -> None:
        """Adjust ``srate`` on receipt of a returned value.

        Call ``record_receipt`` first so the measured receive rate counts
        this value.
        """
        rrate = self.rrate(now)
        if mode == "tars":
            overloaded = q_feedback > self.queue_threshold
        elif mode == "c3":
            overloaded = self.srate > rrate
        else:
            raise ValueError(f"unknown rate control mode {mode!r}")

        if overloaded and now - self.t_inc > 2 * self.delta:
            before, r0_before = self.srate, self.r0
            decreased = self.beta * self.srate
            if decreased > self.floor:
                self.r0 = self.srate
            self.srate = max(decreased, self.floor)
            self.t_dec = now
            if self.audit is not None:
                self.audit.append((now, "dec", before, self.srate, r0_before, self.r0))
        elif self.srate < rrate:
            before = self.srate
            target = cubic_target((now - self.t_dec) / 1000.0, self.r0, self.beta, self.gamma)
            self.t_inc = now
            # the cubic target dips to r0 * (1 - beta) right after a decrease
            self.srate = max(min(self.srate + self.s_max, target), self.floor)
            if self.audit is not None:
                self.audit.append((now, "inc", before, self.srate, self.r0, self.r0))


def audit_violations(events, delta: int, floor: float = 0.01, beta: float = 0.2):
    """Check a limiter audit log against the rate adjustment guards.

    Returns human-readable violation strings; an empty list means clean.
    """
    problems = []
    last_inc = None
    for now, kind, before, after, r0_before, r0_after in events:
        if after < floor:
            problems.append(f"t={now}: srate {after} below floor {floor}")
        if kind == "dec":
            if beta * before <= floor and r0_after != r0_before:
                problems.append(f"t={now}: R0 overwritten at srate {before}")
            if last_inc is not None and now - last_inc <= 2 * delta:
                problems.append(f"t={now}: decrease {now - last_inc}us after increase")
        else:
            last_inc = now
    return problems
