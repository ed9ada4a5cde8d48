import math

import pytest
from jsonschema.exceptions import ValidationError

from src.engine.types import PolicyKind, ServiceMode
from src.engine.validator import ScenarioError, build_scenario, n_from_rho, validate_scenario

from .scenarios import geo_tree, pair_tree


def test_n_from_rho():
    assert n_from_rho(0.9) == pytest.approx(100.0)
    assert n_from_rho(0.99) == pytest.approx(1e4)
    with pytest.raises(ScenarioError):
        n_from_rho(1.0)


def test_build_pair_scenario(pair):
    cfg = build_scenario(pair)
    assert cfg.traffic.appearance_rate == pytest.approx(1.8)
    assert cfg.traffic.n == pytest.approx(100.0)
    assert cfg.policy.kind is PolicyKind.RJSQ_UNAWARE
    assert cfg.policy.scheme.eps == (0.0, -0.0)
    assert validate_scenario(cfg) == []


def test_appearance_rate_sets_rho():
    tree = pair_tree(traffic={"appearance_rate": 1.5})
    cfg = build_scenario(tree)
    assert cfg.traffic.rho == pytest.approx(0.75)


def test_unknown_key_fails_schema(pair):
    pair["policy"]["colour"] = "red"
    with pytest.raises(ValidationError) as err:
        build_scenario(pair)
    assert "policy" in str(err.value)


def test_schema_errors_name_the_key_path(pair):
    pair["stations"][1]["service_rate"] = "fast"
    pair["policy"]["tau_bar"] = None
    with pytest.raises(ValidationError, match=r"stations\.1\.service_rate"):
        build_scenario(pair)


def test_probabilities_must_sum_to_one():
    tree = pair_tree(origins=[{"probability": 0.5, "delays": [0, 0]}, {"probability": 0.4, "delays": [1, 1]}])
    problems = validate_scenario(build_scenario(tree))
    assert any("sum to" in p for p in problems)


def test_chi_above_maximum_is_reported(pair):
    pair["policy"]["chi"] = 0.6
    cfg = build_scenario(pair)
    assert cfg.policy.scheme is None
    problems = validate_scenario(cfg)
    assert any("exceeds" in p for p in problems)


def test_unstable_traffic_and_window():
    cfg = build_scenario(pair_tree(traffic={"rho": 1.0}, burnin=5000.0))
    problems = validate_scenario(cfg)
    assert any("below 1" in p for p in problems)
    assert any("burnin" in p for p in problems)


def test_delay_row_length_checked():
    cfg = build_scenario(pair_tree(origins=[{"probability": 1.0, "delays": [0.0]}]))
    assert any("1 delays for 2 stations" in p for p in validate_scenario(cfg))


def test_balancing_policy_needs_two_stations():
    tree = pair_tree(stations=[{"service_rate": 1.0}], origins=[{"probability": 1.0, "delays": [0.0]}])
    tree["policy"] = {"kind": "jsq"}
    problems = validate_scenario(build_scenario(tree))
    assert any("at least two stations" in p for p in problems)


def test_per_customer_service_needs_one_distribution(pair):
    pair["service_mode"] = "per_customer"
    pair["stations"][1]["service"] = {"kind": "lognormal", "variance": 3.0}
    cfg = build_scenario(pair)
    assert cfg.service_mode is ServiceMode.PER_CUSTOMER
    assert any("one service distribution" in p for p in validate_scenario(cfg))


def test_geography_plans_capacities(geo):
    cfg = build_scenario(geo)
    assert cfg.mus == pytest.approx([1.0, 1.5, 1.5], abs=1e-6)
    assert cfg.traffic.rho == pytest.approx(0.99)
    assert len(cfg.origins) == 40 * 40
    assert cfg.policy.tau_bar == 16.0
    assert validate_scenario(cfg) == []


def test_null_tolerance_means_unbounded():
    cfg = build_scenario(geo_tree(policy={"kind": "tolerance_geo", "tau_bar": None}))
    assert math.isinf(cfg.policy.tau_bar)


def test_station_outside_region():
    tree = geo_tree(stations=[{"service_rate": 1.0}] * 3)
    tree["geography"]["stations"][2] = [25.0, 5.0]
    problems = validate_scenario(build_scenario(tree))
    assert any("outside the region" in p for p in problems)


def test_lp_plan_for_separated_origins():
    tree = pair_tree(
        origins=[{"probability": 0.5, "delays": [5.0, 30.0]}, {"probability": 0.5, "delays": [30.0, 5.0]}],
        policy={"kind": "rjsq_aware", "chi": 0.05, "plan": "lp"},
    )
    cfg = build_scenario(tree)
    assert cfg.policy.plan.r == pytest.approx([[1.0, 0.0], [0.0, 1.0]])
    assert validate_scenario(cfg) == []


def test_inconsistent_plan_is_reported():
    tree = pair_tree(
        origins=[{"probability": 0.5, "delays": [5.0, 30.0]}, {"probability": 0.5, "delays": [30.0, 5.0]}],
        policy={"kind": "rjsq_aware", "chi": 0.05, "plan": [[1.0, 0.0], [1.0, 0.0]]},
    )
    problems = validate_scenario(build_scenario(tree))
    assert any("heavy-traffic consistent" in p for p in problems)


def test_missing_origins_and_geography(pair):
    del pair["origins"]
    with pytest.raises(ScenarioError):
        build_scenario(pair)
