import csv
import json

import pytest
import yaml

from src.cli import EXIT_CONFIG, EXIT_OK, main
from src.engine.validator import ScenarioError, build_scenario, validate_scenario
from src.experiments.config import apply_overrides
from src.experiments.export import RESULTS_COLUMNS
from src.experiments.plan import derived_scenario, plan_from_tree
from src.experiments.run_scenarios import run_all_scenarios
from src.experiments.scaling import ScalingSpec, check_spec
from src.experiments.sweeps import SweepSpec, scenario_at
from src.experiments.tables import TableSpec, run_table, scaled_reps

from .scenarios import geo_tree, pair_tree


def small_pair(**changes):
    tree = pair_tree(horizon=300.0, burnin=50.0, policy={"kind": "rjsq_unaware", "chi": 0.1})
    tree.update(changes)
    return tree


def write_yaml(path, tree):
    path.write_text(yaml.safe_dump(tree, sort_keys=False), encoding="utf-8")
    return str(path)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def test_apply_overrides_keeps_types_and_copies():
    tree = small_pair()
    out = apply_overrides(tree, ["policy.chi=0.05", "stations.1.service_rate=2", "sweep.grid=[0.1, 0.2]"])
    assert out["policy"]["chi"] == 0.05
    assert out["stations"][1]["service_rate"] == 2
    assert out["sweep"]["grid"] == [0.1, 0.2]
    assert tree["policy"]["chi"] == 0.1
    with pytest.raises(ValueError):
        apply_overrides(tree, ["policy.chi"])


def test_simulate_writes_results(tmp_path):
    cfg = write_yaml(tmp_path / "pair.yaml", small_pair())
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--reps", "3", "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "results.csv")
    assert rows[0] == list(RESULTS_COLUMNS)
    assert {row[5] for row in rows[1:]} >= {"mtcc", "mean_wait", "imbalance_sup"}
    metrics = json.loads((out / "metrics.json").read_text(encoding="utf-8"))
    assert metrics["reps"] == 3
    assert metrics["metrics"]["mtcc"]["mean"] > 0


def test_rerun_is_byte_identical(tmp_path):
    cfg = write_yaml(tmp_path / "pair.yaml", small_pair())
    for name in ("a", "b"):
        assert main(["simulate", "--config", cfg, "--reps", "2", "--out", str(tmp_path / name)]) == EXIT_OK
    for name in ("results.csv", "metrics.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sampled_trajectories_are_written(tmp_path):
    cfg = write_yaml(tmp_path / "pair.yaml", small_pair())
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--reps", "1", "--sample-dt", "50", "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "trajectory_r0000.csv")
    assert rows[0] == ["t", "Q_1", "Q_2", "W_1", "W_2", "U"]
    assert len(rows) == 1 + 7


def test_invalid_config_exits_with_config_code(tmp_path, capsys):
    cfg = write_yaml(tmp_path / "bad.yaml", small_pair(policy={"kind": "rjsq_unaware", "chi": 0.9}))
    assert main(["simulate", "--config", cfg, "--reps", "1", "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert "exceeds" in capsys.readouterr().err


def test_unknown_key_and_missing_file(tmp_path):
    cfg = write_yaml(tmp_path / "odd.yaml", small_pair(colour="red"))
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["simulate", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    assert main([]) == EXIT_CONFIG


def test_coupled_minimum_delay_pool_needs_per_customer_mode(tmp_path, capsys):
    cfg = write_yaml(tmp_path / "pair.yaml", small_pair(origins=[{"probability": 1.0, "delays": [5.0, 5.0]}]))
    base = ["coupled", "--config", cfg, "--pool", "mdsp", "--out", str(tmp_path / "x")]
    assert main(base + ["--reps", "1"]) == EXIT_CONFIG
    assert "per_customer" in capsys.readouterr().err
    assert main(base + ["--reps", "2", "--set", "service_mode=per_customer"]) == EXIT_OK


def test_one_point_sweep(tmp_path, capsys):
    cfg = write_yaml(tmp_path / "pair.yaml", small_pair())
    out = tmp_path / "sweep"
    code = main(["sweep", "--config", cfg, "--grid", "0.2", "--reps", "2", "--out", str(out)])
    assert code == EXIT_OK
    rows = read_csv(out / "sweep.csv")
    assert rows[0] == ["chi", "mean", "half_width", "reps", "argmin"]
    assert len(rows) == 2 and rows[1][0] == "0.2" and rows[1][4] == "1"
    assert json.loads(capsys.readouterr().out)["argmin"] == 0.2


def test_sweep_spec_grid_and_bad_points():
    spec = SweepSpec.from_tree({**small_pair(), "sweep": {"start": 0.0, "stop": 0.05}})
    assert spec.grid == pytest.approx([0.0, 0.01, 0.02, 0.03, 0.04, 0.05])
    assert "sweep" not in spec.base
    with pytest.raises(ScenarioError):
        scenario_at(spec.base, "chi", 0.9)
    with pytest.raises(ScenarioError):
        scenario_at(spec.base, "speed", 1.0)
    delayed = scenario_at(spec.base, "delay", 7.0)
    assert delayed.origins[0].delays == (7.0, 7.0)


def test_scaling_grid_checks(tmp_path):
    spec = ScalingSpec(base=small_pair(), n_grid=[100.0, 100.0, 400.0])
    with pytest.raises(ScenarioError):
        check_spec(spec)
    with pytest.raises(ScenarioError):
        check_spec(ScalingSpec(base=small_pair(), n_grid=[100.0, 400.0]))
    cfg = write_yaml(tmp_path / "pair.yaml", small_pair())
    code = main(["scaling", "--config", cfg, "--set", "scaling.n_grid=[100, 100, 400]", "--out", str(tmp_path / "s")])
    assert code == EXIT_CONFIG


def test_plan_for_region(tmp_path):
    cfg = write_yaml(tmp_path / "geo.yaml", geo_tree())
    out = tmp_path / "plan"
    assert main(["plan", "--config", cfg, "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "plan.json").read_text(encoding="utf-8"))
    assert report["capacities"] == pytest.approx([1.0, 1.5, 1.5])
    assert report["tau_bar"] == 16.0
    assert report["chi"] == pytest.approx(0.0456, abs=1e-4)
    derived = yaml.safe_load((out / "scenario.yaml").read_text(encoding="utf-8"))
    assert derived["policy"] == {"kind": "tolerance_geo", "tau_bar": 16.0}
    assert validate_scenario(build_scenario(derived)) == []


def test_plan_for_single_origin():
    tree = small_pair(origins=[{"probability": 1.0, "delays": [2.0, 4.0]}])
    report = plan_from_tree(tree)
    assert report.plan.tolist() == pytest.approx([[0.5, 0.5]])
    assert report.gamma_hat == pytest.approx(3.0)
    assert report.chi == pytest.approx(0.4 / 3.0**0.5)
    cfg = build_scenario(derived_scenario(tree, report))
    assert cfg.policy.kind.value == "rjsq_aware"
    assert validate_scenario(cfg) == []


def test_table_replication_counts():
    assert scaled_reps("two_station", None, 7) == 7
    assert scaled_reps("two_station", None, None) == 500
    assert scaled_reps("two_station", 0.01, None) == 200
    assert scaled_reps("geographic", 0.001, None) == 5
    assert scaled_reps("five_station", 1e-6, None) == 2
    with pytest.raises(ScenarioError):
        run_table(TableSpec(table_id="ring", reps=1))


def test_run_all_scenarios_reports_failures(tmp_path):
    scenarios = tmp_path / "scenarios"
    scenarios.mkdir()
    write_yaml(scenarios / "good.yaml", small_pair(scenario_id="good"))
    write_yaml(scenarios / "bad.yaml", small_pair(traffic={"rho": 1.2}))
    summary = run_all_scenarios(str(scenarios), str(tmp_path / "runs"), reps=2, workers=2)
    assert summary["scenarios"] == 2
    assert summary["completed"] == 1
    assert list(summary["failed"]) == ["bad"]
    assert summary["per_scenario"]["good"]["mtcc"] > 0
    assert (tmp_path / "runs" / "summary.json").exists()
    with pytest.raises(FileNotFoundError):
        run_all_scenarios(str(tmp_path / "empty"), str(tmp_path / "runs"))


def test_oscillation_reported_for_sampled_pairs(tmp_path):
    tree = pair_tree(
        horizon=2000.0,
        burnin=200.0,
        origins=[{"probability": 1.0, "delays": [20.0, 20.0]}],
        policy={"kind": "jsq"},
        sample_dt=5.0,
    )
    cfg = write_yaml(tmp_path / "jsq.yaml", tree)
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--reps", "2", "--out", str(out)]) == EXIT_OK
    metrics = json.loads((out / "metrics.json").read_text(encoding="utf-8"))["metrics"]
    assert 0.0 <= metrics["oscillation"]["mean"] <= 1.0
