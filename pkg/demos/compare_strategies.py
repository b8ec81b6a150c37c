# Tail latency of each replica-selection strategy on the same workload.
# 50 servers, 150 clients, 70% load, service rates flip every 500 ms.
# Small key budget so it finishes in well under a minute.

from replisim import desk, run_scenario

strategies = ["random", "lor", "c3", "trr", "tars", "oracle_c3rc", "oracle_tarsrc"]
results = {}
for name in strategies:
    results[name] = run_scenario(desk(strategy=name, key_budget=40_000, repetitions=2))

print(f"{'strategy':<15}{'p50':>8}{'p99':>9}{'p99.9':>9}   (ms, mean over seeds)")
for name, res in results.items():
    print(f"{name:<15}{res.mean('p50'):>8.2f}{res.mean('p99'):>9.2f}{res.mean('p999'):>9.2f}")

# the oracle sees true queue lengths, so it marks the floor for the others
gap = results["c3"].mean("p99") / results["oracle_c3rc"].mean("p99")
print(f"\nc3 p99 is {gap:.1f}x the oracle's")
