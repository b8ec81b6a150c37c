import random
from types import SimpleNamespace

import pytest

from replisim.cluster import (
    Feedback, MeasurementWindow, Server, draw_service_time, ewma, fluctuate, measure_rate,
)


class ScriptedRng:
    """Returns fixed service times (in us) in order."""

    def __init__(self, durations):
        self.durations = list(durations)

    def expovariate(self, rate):
        return float(self.durations.pop(0))


def key():
    return SimpleNamespace()


def test_first_key_starts_immediately():
    server = Server(0)
    k = key()
    assert server.enqueue_key(k, 0)
    server.start_service(k, 0, ScriptedRng([4000]))
    assert server.queue_length == 0 and server.busy_slots == 1


def test_full_slots_queue_the_next_key():
    server = Server(0, slot_capacity=4)
    rng = ScriptedRng([4000] * 4)
    for _ in range(4):
        k = key()
        assert server.enqueue_key(k, 0)
        server.start_service(k, 0, rng)
    assert not server.enqueue_key(key(), 0)
    assert server.queue_length == 1


def test_five_simultaneous_keys_at_idle_server():
    # Hand trace: keys 1-4 take the four slots, key 5 waits.
    server = Server(0, slot_capacity=4)
    rng = ScriptedRng([1000] * 5)
    started = []
    for i in range(5):
        k = SimpleNamespace(i=i)
        if server.enqueue_key(k, 0):
            server.start_service(k, 0, rng)
            started.append(i)
    assert started == [0, 1, 2, 3]
    assert server.busy_slots == 4 and server.queue_length == 1


def test_sojourn_is_wait_plus_service():
    server = Server(0, slot_capacity=1)
    rng = ScriptedRng([2000, 4000])
    a, b = key(), key()
    assert server.enqueue_key(a, 0)
    server.start_service(a, 0, rng)
    assert not server.enqueue_key(b, 0)
    _, nxt = server.complete_service(a, 2000)
    assert nxt is b
    server.start_service(b, 2000, rng)
    feedback, _ = server.complete_service(b, 6000)
    assert feedback.sojourn == 6.0
    assert feedback.service_time == 4.0


def test_fifo_service_order():
    server = Server(0, slot_capacity=1)
    rng = ScriptedRng([10] * 6)
    keys = [SimpleNamespace(i=i) for i in range(6)]
    order = []
    current = keys[0]
    server.enqueue_key(current, 0)
    server.start_service(current, 0, rng)
    for k in keys[1:]:
        server.enqueue_key(k, 0)
    t = 0
    while current is not None:
        order.append(current.i)
        t += 10
        _, current = server.complete_service(current, t)
        if current is not None:
            server.start_service(current, t, rng)
    assert order == list(range(6))


def test_mu_counts_other_completions_during_service():
    # Key A is served for 4 ms; three other keys finish inside that window.
    server = Server(0, slot_capacity=4, ewma_weight=0.9)
    rng = ScriptedRng([4000, 1000, 2000, 3000])
    a, others = key(), [key() for _ in range(3)]
    for k in [a] + others:
        server.enqueue_key(k, 0)
        server.start_service(k, 0, rng)
    for t, k in zip((1000, 2000, 3000), others):
        server.complete_service(k, t)
    server.complete_service(a, 4000)
    assert server.mu_meter.previous == (3, 4.0)
    assert server.mu_sample == 0.75
    # EWMA over the four windows: 0 (first, nothing to borrow), 1/2, 2/3, 3/4
    expected = 0.0
    for sample in (0.5, 2 / 3, 0.75):
        expected = 0.9 * expected + 0.1 * sample
    assert server.mu == pytest.approx(expected)


def test_empty_window_borrows_previous():
    server = Server(0, slot_capacity=2, ewma_weight=0.9)
    rng = ScriptedRng([4000, 2000, 1000])
    a, b, c = key(), key(), key()
    for k in (a, b):
        server.enqueue_key(k, 0)
        server.start_service(k, 0, rng)
    server.complete_service(b, 2000)   # nothing else finished, nothing to borrow: 0
    server.complete_service(a, 4000)   # b finished inside (0, 4]: 1 / 4 ms
    server.enqueue_key(c, 4000)
    server.start_service(c, 4000, rng)
    server.complete_service(c, 5000)   # empty window: (0 + 1) / (1 + 4) ms
    samples = [0.0, 0.25, 0.2]
    expected = samples[0]
    for sample in samples[1:]:
        expected = 0.9 * expected + 0.1 * sample
    assert server.mu == pytest.approx(expected)
    # c's own arrival precedes its window; one arrival fell in a's window.
    assert server.lambda_meter.previous == (0, 1.0)


def test_measure_rate_examples():
    meter = MeasurementWindow()
    assert measure_rate(meter, 2, 4.0) == 0.5
    meter = MeasurementWindow()
    meter.close(1, 4.0)
    assert measure_rate(meter, 0, 1.0) == pytest.approx(1 / 5)
    assert measure_rate(MeasurementWindow(), 3, 0.0) is None


def test_idle_rate_decays_to_zero():
    meter = MeasurementWindow()
    rate = None
    meter.close(5, 1.0)
    for _ in range(200):
        rate = ewma(rate, meter.close(0, 1.0), 0.9)
    assert rate < 1e-6


def test_feedback_queue_is_truthful():
    server = Server(0, slot_capacity=1)
    rng = ScriptedRng([100] * 4)
    keys = [key() for _ in range(4)]
    server.enqueue_key(keys[0], 0)
    server.start_service(keys[0], 0, rng)
    for k in keys[1:]:
        server.enqueue_key(k, 0)
    feedback, nxt = server.complete_service(keys[0], 100)
    assert feedback.q_feedback == server.queue_length == 2
    assert isinstance(feedback, Feedback)


def test_service_time_mean_within_one_percent():
    server = Server(0, base_service_time=4000)
    rng = random.Random(11)
    n = 1_000_000
    total = sum(draw_service_time(server, rng) for _ in range(n))
    assert total / n == pytest.approx(4000, rel=0.01)


def test_fast_regime_mean_within_one_percent():
    server = Server(0, base_service_time=4000, range_param=3)
    server.mean_service_time = server.regime_means()[1]
    rng = random.Random(12)
    n = 1_000_000
    total = sum(draw_service_time(server, rng) for _ in range(n))
    assert total / n == pytest.approx(4000 / 3, rel=0.01)


def test_service_time_at_least_one_tick():
    server = Server(0, base_service_time=1)
    rng = random.Random(3)
    assert min(draw_service_time(server, rng) for _ in range(10_000)) >= 1


def test_regimes():
    assert Server(0, base_service_time=4000, range_param=3).regime_means() == (4000.0, 4000 / 3)
    assert Server(0, base_service_time=4000, range_param=3,
                  fluctuation_mode="slower").regime_means() == (4000.0, 12000.0)
    assert Server(0, range_param=1).regime_means() == (4000.0, 4000.0)
    with pytest.raises(ValueError):
        Server(0, fluctuation_mode="sideways")


def test_fluctuation_is_fair_coin():
    server = Server(0, base_service_time=4000, range_param=3)
    rng = random.Random(99)
    slow = 0
    for _ in range(10_000):
        fluctuate(server, rng)
        slow += server.mean_service_time == 4000.0
    assert abs(slow / 10_000 - 0.5) <= 0.02


def test_regime_change_keeps_running_service():
    server = Server(0, base_service_time=4000, range_param=3)
    k = key()
    server.enqueue_key(k, 0)
    server.start_service(k, 0, ScriptedRng([4000]))
    server.mean_service_time = 4000 / 3
    assert k.service_time == 4000
