# How old is the feedback a client holds when it picks a replica?
# tau_w is measured per candidate replica at every send. Lower load and
# more clients both mean each client talks to a given server less often.
# Replicas a client has never heard from are left out.

from replisim import desk, run_scenario
from replisim.metrics import ecdf, percentile, tail_fraction

cases = {
    "u=0.70 n=150": desk(strategy="c3", key_budget=40_000, repetitions=1),
    "u=0.45 n=150": desk(strategy="c3", key_budget=40_000, repetitions=1, utilization=0.45),
    "u=0.70 n=300": desk(strategy="c3", key_budget=40_000, repetitions=1, num_clients=300),
}

for label, sc in cases.items():
    tau = run_scenario(sc).pooled_tau_w()
    print(f"{label}: P(tau_w > 100 ms) = {tail_fraction(tau, 100):.3f}, "
          f"median {percentile(tau, 0.5):.0f} ms, p90 {percentile(tau, 0.9):.0f} ms")

# a coarse text CDF of the default case
xs, ps = ecdf(run_scenario(cases["u=0.70 n=150"]).pooled_tau_w())
for edge in (10, 50, 100, 200, 500, 1000):
    below = ps[xs <= edge][-1] if (xs <= edge).any() else 0.0
    print(f"  tau_w <= {edge:>4} ms  {below:5.2f}  " + "#" * int(40 * below))
