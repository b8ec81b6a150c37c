import csv
import io
import json

import pytest

from replisim import ConfigError, Scenario, desk, full, load_config, run_scenario
from replisim.cli import main
from replisim.harness import ScenarioResult, summary_csv, sweep
from replisim.simulation import Simulation, arrival_rate

TINY = dict(num_servers=6, num_clients=8, num_generators=10, key_budget=2000, repetitions=2)


def test_arrival_rate_at_default_load():
    # 0.7 * 50 servers * 4 slots * mean(1/4, 3/4) keys/ms
    assert arrival_rate(Scenario()) == pytest.approx(70.0)
    assert arrival_rate(Scenario(fluctuation_mode="slower")) == pytest.approx(
        0.7 * 200 * (0.25 + 1 / 12) / 2)


def test_presets():
    assert (desk().key_budget, desk().repetitions) == (100_000, 3)
    assert (full().key_budget, full().repetitions) == (600_000, 5)
    assert desk(key_budget=10).key_budget == 10
    assert Scenario(base_seed=4, repetitions=3).seeds() == [4, 5, 6]


def test_sweep_covers_axes():
    runs = sweep(desk(), strategies=("c3", "tars"), intervals=(10, 500))
    assert len(runs) == 2 * 2 * 2 * 2
    assert {(s.utilization, s.num_clients, s.fluctuation_interval_ms, s.strategy) for s in runs} \
        == {(u, n, t, st) for u in (0.7, 0.45) for n in (150, 300)
            for t in (10, 500) for st in ("c3", "tars")}


@pytest.mark.parametrize("changes", [
    {"strategy": "fastest"}, {"utilization": 1.0}, {"utilization": 0.0},
    {"replication": 60}, {"num_servers": 0}, {"repetitions": 0}, {"key_budget": 0},
    {"fluctuation_mode": "sideways"}, {"tie_break": "coin"}, {"delta_ms": 0},
    {"initial_srate": 0.001}, {"skew": (0.2, 1.5)}, {"latency_ms": -1},
])
def test_invalid_scenarios_rejected(changes):
    with pytest.raises(ConfigError):
        Scenario(**changes).validate()


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        Scenario.from_dict({"strategy": "c3", "clients": 10})


def test_load_single_and_multi(tmp_path):
    single = tmp_path / "one.json"
    single.write_text(json.dumps({"strategy": "tars", "num_clients": 300}))
    [s] = load_config(single)
    assert s.strategy == "tars" and s.num_clients == 300

    multi = tmp_path / "many.json"
    multi.write_text(json.dumps({
        "defaults": {"key_budget": 5000, "utilization": 0.45},
        "scenarios": [{"name": "a", "strategy": "c3"}, {"name": "b", "utilization": 0.7}],
    }))
    a, b = load_config(multi)
    assert (a.key_budget, a.utilization, a.strategy) == (5000, 0.45, "c3")
    assert (b.key_budget, b.utilization) == (5000, 0.7)


def test_load_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text(json.dumps({"scenarios": [], "extra": 1}))
    with pytest.raises(ConfigError):
        load_config(bad)


def test_mean_row_averages_per_seed_percentiles():
    rows = [{"scenario": "s", "strategy": "c3", "seed": i, "completed": 10,
             "p50": 1.0, "p95": 2.0, "p99": float(p99), "p999": 3.0, "mean": 1.0}
            for i, p99 in enumerate(range(10, 15))]
    result = ScenarioResult(Scenario(name="s"), [], rows)
    assert result.mean("p99") == 12.0
    last = list(csv.DictReader(io.StringIO(summary_csv([result]))))[-1]
    assert last["seed"] == "mean" and float(last["p99"]) == 12.0
    assert last["completed"] == "50"


def test_run_conserves_keys():
    for strategy in ("c3", "tars", "oracle_tarsrc", "random", "lor"):
        report = Simulation(desk(strategy=strategy, **TINY), seed=1).run()
        assert report.generated == 2000
        assert report.completed + report.backlogged_at_end + report.in_flight_at_end \
            == report.generated
        assert report.completed == len(report.latencies)
        assert (report.latencies > 0.5).all()


def test_same_seed_same_bytes():
    sc = desk(strategy="tars", **TINY)
    assert summary_csv([run_scenario(sc)]) == summary_csv([run_scenario(sc)])


def test_parallel_workers_do_not_change_output():
    sc = desk(strategy="c3", **TINY)
    assert summary_csv([run_scenario(sc)]) == summary_csv([run_scenario(sc, workers=2)])


def test_different_seeds_differ():
    a = run_scenario(desk(strategy="c3", **TINY))
    b = run_scenario(desk(strategy="c3", base_seed=7, **TINY))
    assert a.rows[0]["mean"] != b.rows[0]["mean"]


def test_cli_run_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"name": "tiny", **TINY}))
    out = tmp_path / "out"
    code = main(["run", "--config", str(cfg), "--strategy", "tars", "--seed", "3",
                 "--reps", "1", "--out", str(out), "--trace-server", "0"])
    assert code == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["summary.csv", "tiny_tars_latency_cdf.csv", "tiny_tars_meta.json",
                     "tiny_tars_seed3_trace.csv", "tiny_tars_summary.csv", "tiny_tars_tau_w_cdf.csv"]
    meta = json.loads((out / "tiny_tars_meta.json").read_text())
    assert meta["seeds"] == [3] and "pooled" in meta["cdf_samples"]
    assert meta["scenario"]["strategy"] == "tars"
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [r["seed"] for r in rows] == ["3", "mean"]
    assert rows[0]["strategy"] == "tars"


@pytest.mark.parametrize("payload", [
    {"strategy": "nope"}, {"utilization": 1.2}, {"bogus": 1},
])
def test_cli_rejects_bad_config(tmp_path, capsys, payload):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(payload))
    assert main(["run", "--config", str(cfg)]) != 0
    assert "config error" in capsys.readouterr().err


def test_cli_missing_file_and_bad_trace_server(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) != 0
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(TINY))
    assert main(["run", "--config", str(cfg), "--trace-server", "99"]) != 0
