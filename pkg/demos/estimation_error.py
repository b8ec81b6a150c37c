# Queue-size estimation error on one traced server during a c3 run.
# Every time any client scores server 0, the trace records the true wait
# queue next to the estimate, plus how old that client's feedback was.

from replisim import desk, run_scenario
from replisim.metrics import estimation_error

run = run_scenario(desk(strategy="c3", key_budget=40_000, repetitions=1), trace_server=0).runs[0]
err = estimation_error(run.trace)

print(f"{len(run.trace)} scorings of server 0")
print(f"feedback <= 100 ms old: MAE {err['mae_fresh']:.2f} over {err['n_fresh']} rows")
print(f"older or missing:       MAE {err['mae_stale']:.2f} over {err['n_stale']} rows")

# Same fresh snapshots, two estimators without the outstanding-key term:
# the smoothed 1 + q versus the feedback queue pushed forward by (lambda - mu) * delay.
print(f"replay on fresh rows: 1+q {err['replay_c3']:.2f}, "
      f"extrapolated {err['replay_extrapolated']:.2f}")

for row in run.trace[1000:1006]:
    print(f"  t={row.time / 1000:9.3f} ms  true={row.true_queue:2d}  "
          f"c3 estimate={row.estimate:7.1f}  outstanding={row.outstanding}")
