import math

import numpy as np
import pytest

from src.engine.simulator import SimulationFault, Simulator, run
from src.engine.validator import build_scenario
from src.experiments.runner import run_replications
from src.stochastics.distributions import sampler
from src.stochastics.streams import StreamLabel, open_stream

from .scenarios import pair_tree


def deterministic_pair(**changes):
    # arrivals every 1/0.9 min, service 2 min at each half-rate station: JSQ alternates with no waiting
    tree = pair_tree(
        horizon=50.0,
        burnin=0.0,
        traffic={"appearance_rate": 0.9, "interappearance": {"kind": "deterministic"}},
        stations=[{"service_rate": 0.5, "service": {"kind": "deterministic"}}] * 2,
        policy={"kind": "jsq"},
    )
    tree.update(changes)
    return build_scenario(tree)


def test_deterministic_trace_alternates_without_waiting():
    sim = Simulator(deterministic_pair(), record_customers=True, record_events=True)
    stats = sim.run()
    customers = sim.customers
    assert len(customers) >= 40
    assert [c.destination for c in customers[:6]] == [0, 1, 0, 1, 0, 1]
    assert all(c.wait == pytest.approx(0.0, abs=1e-9) for c in customers)
    assert customers[0].appear_time == pytest.approx(1 / 0.9)
    assert stats.mean_wait == pytest.approx(0.0, abs=1e-9)
    kinds = [e[1] for e in sim.events[:4]]
    assert kinds == ["appear", "arrive", "start", "appear"]


def test_travel_delay_is_added():
    cfg = build_scenario(pair_tree(origins=[{"probability": 1.0, "delays": [5.0, 5.0]}]))
    stats = run(cfg)
    assert stats.mean_travel == pytest.approx(5.0)
    assert stats.mean_time_to_service == pytest.approx(stats.mean_wait + 5.0)


def test_same_seed_same_path():
    cfg = build_scenario(pair_tree(policy={"kind": "rjsq_unaware", "chi": 0.2}))
    a, b = run(cfg, 0), run(cfg, 0)
    assert a.time_avg_total_count == b.time_avg_total_count
    assert a.event_count == b.event_count
    assert run(cfg, 1).time_avg_total_count != a.time_avg_total_count


@pytest.mark.slow
def test_mm1_pair_mean_count():
    cfg = build_scenario(pair_tree(horizon=20000.0, burnin=2000.0))
    runs = run_replications(cfg, 4)
    mean = float(np.mean([s.time_avg_total_count for s in runs]))
    # two M/M/1 queues at rho = 0.9 hold 18 customers on average
    assert 14.0 < mean < 22.0
    util = np.mean([s.utilization for s in runs], axis=0)
    assert util == pytest.approx([0.9, 0.9], abs=0.05)


def test_jsq_balances_better_than_random():
    base = dict(horizon=5000.0, burnin=500.0)
    random = run(build_scenario(pair_tree(**base)))
    jsq = run(build_scenario(pair_tree(policy={"kind": "jsq"}, **base)))
    assert jsq.time_avg_total_count < random.time_avg_total_count
    assert jsq.imbalance_sup < random.imbalance_sup


def test_trajectory_sampling():
    cfg = build_scenario(pair_tree(horizon=100.0, burnin=0.0, sample_dt=10.0))
    stats = run(cfg)
    times = [row[0] for row in stats.trajectory]
    assert times == pytest.approx([10.0 * i for i in range(11)])
    assert all(len(row) == 6 for row in stats.trajectory)
    assert all(w >= 0.0 for row in stats.trajectory for w in row[3:5])


def test_workload_drains_at_station_rate():
    cfg = deterministic_pair(horizon=2.0)
    sim = Simulator(cfg)
    sim.run()
    # one unit of work arrives at 1/0.9 and drains at rate 0.5
    expected = 1.0 - 0.5 * (2.0 - 1 / 0.9)
    assert sim.workloads_at(2.0)[0] == pytest.approx(expected)


def test_emergent_chi_counts_diversions():
    tree = pair_tree(
        origins=[{"probability": 0.5, "delays": [1.0, 3.0]}, {"probability": 0.5, "delays": [3.0, 1.0]}],
        policy={"kind": "random_proportional"},
    )
    stats = run(build_scenario(tree))
    assert stats.emergent_chi == pytest.approx(0.5, abs=0.05)
    nearest = build_scenario({**tree, "policy": {"kind": "tolerance_geo", "tau_bar": 0.0}})
    assert run(nearest).emergent_chi == 0.0


def test_heap_overflow_raises_with_state():
    cfg = build_scenario(pair_tree())
    with pytest.raises(SimulationFault) as err:
        Simulator(cfg, max_pending=0).run()
    assert "counts" in err.value.state
    assert math.isfinite(err.value.state["now"])


def crossing_pair(**changes):
    # each origin sits next to one station, so long trips get overtaken by short ones
    tree = pair_tree(
        origins=[{"probability": 0.5, "delays": [1.0, 12.0]}, {"probability": 0.5, "delays": [12.0, 1.0]}],
        policy={"kind": "rjsq_unaware", "chi": 0.1},
    )
    tree.update(changes)
    return build_scenario(tree)


@pytest.mark.parametrize("mode", ["per_station", "per_customer"])
def test_customers_and_work_are_conserved(mode):
    cfg = crossing_pair(horizon=3000.0, service_mode=mode)
    sim = Simulator(cfg)
    sim.run()
    h = cfg.horizon
    departed = sum(st.departures for st in sim.stations)
    assert sim.total_appeared == departed + sum(sim.counts) + sim.enroute_count
    for k, st in enumerate(sim.stations):
        assert st.arrivals == st.departures + sim.counts[k]
        in_service = st.rate * (h - st.queue[0].start_time) if st.queue else 0.0
        assert st.admitted_work == pytest.approx(st.completed_work + in_service + st.workload_at(h))
    if mode == "per_station":
        assert sim.enroute == 0.0
    else:
        assert sim.enroute >= 0.0


def test_station_requirements_follow_arrival_order():
    cfg = crossing_pair(horizon=500.0, burnin=0.0, policy={"kind": "random_proportional"})
    sim = Simulator(cfg, record_customers=True)
    sim.run()
    for k, station in enumerate(cfg.stations):
        served = [c for c in sim.customers if c.destination == k]
        assert any(a.id > b.id for a, b in zip(served, served[1:]))
        draws = open_stream(cfg.seed, StreamLabel.service(k, 0), sampler(station.service))
        assert [c.service_req for c in served] == [draws() for _ in served]


@pytest.mark.slow
def test_delayed_jsq_oscillates_and_rjsq_does_not():
    def mean_count(policy, delay):
        cfg = build_scenario(pair_tree(
            horizon=40000.0,
            burnin=10000.0,
            traffic={"rho": 0.99},
            origins=[{"probability": 1.0, "delays": [delay, delay]}],
            policy=policy,
        ))
        return float(np.mean([s.time_avg_total_count for s in run_replications(cfg, 4)]))

    jsq = {"kind": "jsq"}
    rjsq = {"kind": "rjsq_unaware", "chi": 0.05}
    assert mean_count(jsq, 100.0) >= 2.5 * mean_count(jsq, 0.0)
    assert mean_count(rjsq, 100.0) <= 1.2 * mean_count(rjsq, 0.0)
