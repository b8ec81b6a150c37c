"""Scenario configuration, repeated runs, aggregation and CSV export."""

import csv
import dataclasses
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .cluster import FLUCTUATION_MODES
from .metrics import TraceRow, downsample, ecdf, percentiles
from .simulation import RunReport, Simulation
from .strategies import STRATEGIES, TIE_BREAKS

PERCENTILES = (0.5, 0.95, 0.99, 0.999)
PERCENTILE_COLUMNS = ("p50", "p95", "p99", "p999")
SUMMARY_COLUMNS = ("scenario", "strategy", "seed", "completed") + PERCENTILE_COLUMNS + ("mean",)


class ConfigError(ValueError):
    """Raised for an invalid scenario, before anything runs."""


@dataclass
class Scenario:
    name: str = "default"
    strategy: str = "c3"
    num_servers: int = 50
    num_clients: int = 150
    num_generators: int = 200
    replication: int = 3
    slot_capacity: int = 4
    service_time_ms: float = 4.0
    range_param: float = 3.0
    fluctuation_mode: str = "faster"
    fluctuation_interval_ms: float = 500.0
    utilization: float = 0.70
    skew: Optional[Tuple[float, float]] = None
    key_budget: int = 600_000
    repetitions: int = 5
    base_seed: int = 0
    latency_ms: float = 0.25
    # rate control
    delta_ms: float = 20.0
    beta: float = 0.2
    gamma: float = 0.000004
    s_max: float = 10.0
    queue_threshold: int = 5
    rate_floor: float = 0.01
    initial_srate: float = 10.0
    # ranking
    timeliness_threshold_ms: float = 100.0
    retry_after_skips: int = 6
    tie_break: str = "id"
    client_ewma: float = 0.9
    server_ewma: float = 0.9
    measurement_interval_ms: float = 10.0

    def __post_init__(self):
        if self.skew is not None:
            self.skew = tuple(self.skew)
        self.validate()

    def validate(self):
        problems = []
        for name in ("num_servers", "num_clients", "num_generators", "replication",
                     "slot_capacity", "key_budget", "repetitions"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be positive")
        for name in ("service_time_ms", "fluctuation_interval_ms", "delta_ms", "gamma",
                     "rate_floor", "initial_srate", "measurement_interval_ms", "s_max"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be positive")
        if self.initial_srate < self.rate_floor:
            problems.append("initial_srate must not be below rate_floor")
        if self.latency_ms < 0:
            problems.append("latency_ms must be non-negative")
        if self.replication > self.num_servers:
            problems.append("replication exceeds num_servers")
        if not 0 < self.utilization < 1:
            problems.append("utilization must lie in (0, 1)")
        if self.range_param < 1:
            problems.append("range_param must be >= 1")
        if not 0 < self.beta < 1:
            problems.append("beta must lie in (0, 1)")
        for name in ("client_ewma", "server_ewma"):
            if not 0 <= getattr(self, name) < 1:
                problems.append(f"{name} must lie in [0, 1)")
        if self.strategy not in STRATEGIES:
            problems.append(f"unknown strategy {self.strategy!r}; choose from {sorted(STRATEGIES)}")
        if self.fluctuation_mode not in FLUCTUATION_MODES:
            problems.append(f"fluctuation_mode must be one of {FLUCTUATION_MODES}")
        if self.tie_break not in TIE_BREAKS:
            problems.append(f"tie_break must be one of {TIE_BREAKS}")
        if self.skew is not None:
            if len(self.skew) != 2 or not all(0 < f < 1 for f in self.skew):
                problems.append("skew must be a (client_fraction, demand_fraction) pair in (0, 1)")
        if problems:
            raise ConfigError("; ".join(problems))

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def seeds(self) -> List[int]:
        return [self.base_seed + i for i in range(self.repetitions)]

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path) -> List[Scenario]:
    """Read a JSON config: one scenario object, or ``{"scenarios": [...]}``
    with optional shared ``"defaults"``."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    if "scenarios" not in data:
        return [Scenario.from_dict(data)]
    defaults = data.get("defaults", {})
    extra = sorted(set(data) - {"scenarios", "defaults"})
    if extra:
        raise ConfigError(f"{path}: unknown top-level keys: {', '.join(extra)}")
    return [Scenario.from_dict({**defaults, **item}) for item in data["scenarios"]]


def desk(**changes) -> Scenario:
    """Laptop-sized preset: 100k keys, 3 repetitions."""
    return Scenario(**{"key_budget": 100_000, "repetitions": 3, **changes})


def full(**changes) -> Scenario:
    """Evaluation-sized preset: 600k keys, 5 repetitions."""
    return Scenario(**{"key_budget": 600_000, "repetitions": 5, **changes})


def sweep(base: Scenario, strategies=("c3", "tars", "trr", "oracle_c3rc", "oracle_tarsrc"),
          intervals=(10, 50, 100, 500), clients=(150, 300), utilizations=(0.70, 0.45),
          skews=(None,)) -> List[Scenario]:
    """Cartesian sweep over the figure axes."""
    out = []
    for util in utilizations:
        for n in clients:
            for skew in skews:
                for interval in intervals:
                    for strategy in strategies:
                        tag = "uniform" if skew is None else f"skew{int(skew[0] * 100)}"
                        out.append(base.replace(
                            name=f"u{int(util * 100)}_n{n}_T{interval}_{tag}",
                            strategy=strategy, num_clients=n, utilization=util,
                            fluctuation_interval_ms=interval, skew=skew))
    return out


def run_once(scenario: Scenario, seed: int, trace_server: Optional[int] = None,
             audit: bool = False) -> RunReport:
    return Simulation(scenario, seed, trace_server=trace_server, audit=audit).run()


def _run_job(args):
    return run_once(*args)


@dataclass
class ScenarioResult:
    scenario: Scenario
    runs: List[RunReport]
    rows: List[dict] = field(default_factory=list)

    def mean(self, column: str) -> float:
        return float(np.mean([row[column] for row in self.rows]))

    def pooled_tau_w(self) -> np.ndarray:
        return np.concatenate([r.tau_w for r in self.runs])

    def pooled_latencies(self) -> np.ndarray:
        return np.concatenate([r.latencies for r in self.runs])


def summarize(scenario: Scenario, report: RunReport) -> dict:
    if report.completed == 0:
        raise RuntimeError(f"run {scenario.name}/{report.seed} completed no keys")
    pct = percentiles(report.latencies, PERCENTILES)
    row = {"scenario": scenario.name, "strategy": scenario.strategy, "seed": report.seed,
           "completed": report.completed}
    for p, col in zip(PERCENTILES, PERCENTILE_COLUMNS):
        row[col] = pct[p]
    row["mean"] = float(np.mean(report.latencies))
    return row


def run_scenario(scenario: Scenario, workers: int = 1, trace_server: Optional[int] = None,
                 audit: bool = False, out_dir=None) -> ScenarioResult:
    """Run every repetition (seeds ``base_seed + i``) and aggregate.

    Results are folded in seed order, so ``workers`` never changes the output.
    """
    scenario.validate()
    jobs = [(scenario, seed, trace_server, audit) for seed in scenario.seeds()]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_job, jobs))
    else:
        runs = [_run_job(job) for job in jobs]
    result = ScenarioResult(scenario, runs, [summarize(scenario, r) for r in runs])
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def summary_csv(results: List[ScenarioResult]) -> str:
    """One row per (scenario, strategy, seed) plus a ``mean`` row per scenario."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for result in results:
        for row in result.rows:
            writer.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])
        mean_row = [result.scenario.name, result.scenario.strategy, "mean",
                    sum(r["completed"] for r in result.rows)]
        mean_row += [_fmt(result.mean(c)) for c in PERCENTILE_COLUMNS + ("mean",)]
        writer.writerow(mean_row)
    return buf.getvalue()


def cdf_csv(samples, fraction: float = 1.0, column: str = "value") -> str:
    xs, ps = ecdf(samples)
    xs, ps = downsample(xs, ps, fraction)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([column, "cdf"])
    for x, p in zip(xs.tolist(), ps.tolist()):
        writer.writerow([repr(float(x)), repr(float(p))])
    return buf.getvalue()


def trace_csv(trace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TraceRow._fields)
    for row in trace:
        writer.writerow(["" if v is None else _fmt(v) for v in row])
    return buf.getvalue()


def write_outputs(result: ScenarioResult, out_dir, cdf_fraction: float = 0.05) -> None:
    """Write the summary and long-format CDF/trace files for one scenario.

    CDF files pool samples across all repetitions.
    """
    os.makedirs(out_dir, exist_ok=True)
    stem = f"{result.scenario.name}_{result.scenario.strategy}"
    files = {
        f"{stem}_summary.csv": summary_csv([result]),
        f"{stem}_latency_cdf.csv": cdf_csv(result.pooled_latencies(), cdf_fraction, "latency_ms"),
        f"{stem}_tau_w_cdf.csv": cdf_csv(result.pooled_tau_w(), cdf_fraction, "tau_w_ms"),
    }
    meta = {
        "scenario": dataclasses.asdict(result.scenario),
        "seeds": [run.seed for run in result.runs],
        "cdf_samples": "pooled across all repetitions",
        "cdf_fraction": cdf_fraction,
    }
    files[f"{stem}_meta.json"] = json.dumps(meta, indent=2, sort_keys=True) + "\n"
    for run in result.runs:
        if run.trace:
            files[f"{stem}_seed{run.seed}_trace.csv"] = trace_csv(run.trace)
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            fh.write(text)
