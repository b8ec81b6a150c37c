# p99 against the fluctuation interval T at two load levels.
# Pass workers= to run_scenario to spread repetitions over processes.

from replisim import desk, run_scenario
from replisim.harness import summary_csv, sweep

base = desk(key_budget=30_000, repetitions=1)
scenarios = sweep(base, strategies=("c3", "tars"), intervals=(10, 100, 500),
                  clients=(150,), utilizations=(0.70, 0.45))
results = [run_scenario(sc) for sc in scenarios]

print(f"{'scenario':<22}{'strategy':<8}{'p99 ms':>8}")
for res in results:
    print(f"{res.scenario.name:<22}{res.scenario.strategy:<8}{res.mean('p99'):>8.1f}")

with open("sweep_summary.csv", "w") as fh:
    fh.write(summary_csv(results))
