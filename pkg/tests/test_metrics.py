import math

import numpy as np
import pytest

from src.engine.records import ReplicationSummary
from src.engine.simulator import Simulator
from src.engine.validator import build_scenario
from src.experiments.metrics import (
    EstimationError,
    aggregate,
    aggregate_metrics,
    count_path,
    estimate,
    load_imbalance_sup,
    mtcc,
    oscillation_index,
)

from .scenarios import pair_tree


def test_mtcc_of_constant_path():
    assert mtcc([(0.0, 3.0, 2.0), (10.0, 3.0, 2.0)]) == pytest.approx(5.0)


def test_mtcc_weights_pieces_by_duration():
    rows = [(0.0, 1.0, 0.0), (5.0, 3.0, 0.0), (10.0, 3.0, 0.0)]
    assert mtcc(rows) == pytest.approx(2.0)
    assert mtcc(rows, (5.0, 10.0)) == pytest.approx(3.0)
    # trailing workload columns are ignored once the station count is given
    wide = [(t, q1, q2, 9.0, 9.0, 0.0) for t, q1, q2 in rows]
    assert mtcc(wide, stations=2) == pytest.approx(2.0)


def test_empty_window_raises():
    with pytest.raises(EstimationError):
        mtcc([(0.0, 1.0), (10.0, 1.0)], (5.0, 5.0))
    with pytest.raises(EstimationError):
        mtcc([])


def test_load_imbalance_uses_weighted_queues():
    rows = [(0.0, 2.0, 0.0), (1.0, 1.0, 1.0)]
    assert load_imbalance_sup(rows, [1.0, 2.0]) == pytest.approx(2.0)
    assert load_imbalance_sup(rows, [1.0, 2.0], (1.0, 2.0)) == pytest.approx(0.5)
    assert load_imbalance_sup([], [1.0]) == 0.0


def test_imbalance_from_event_log_matches_the_run():
    cfg = build_scenario(pair_tree(
        policy={"kind": "jsq"},
        origins=[{"probability": 1.0, "delays": [3.0, 3.0]}],
        sample_dt=10.0,
    ))
    stats = Simulator(cfg, record_events=True).run()
    path = count_path(stats.events, 2)
    assert load_imbalance_sup(stats, cfg.mus) == stats.imbalance_sup
    assert load_imbalance_sup(path, cfg.mus, stats.window) == pytest.approx(stats.imbalance_sup)
    assert 0.0 <= load_imbalance_sup(stats, cfg.mus, (500.0, 800.0)) <= stats.imbalance_sup
    # fixed-step samples can miss peaks between samples
    assert load_imbalance_sup(stats.trajectory, cfg.mus, stats.window) <= stats.imbalance_sup


def test_count_path_keeps_one_row_per_epoch():
    events = [(1.0, "appear", 0, 0), (1.0, "arrive", 0, 0), (2.0, "arrive", 1, 1), (2.0, "depart", 0, 0), (3.0, "start", 1, 1)]
    assert count_path(events, 2) == [(0.0, 0.0, 0.0), (1.0, 1.0, 0.0), (2.0, 0.0, 1.0)]


def test_custom_imbalance_window_needs_event_log():
    stats = Simulator(build_scenario(pair_tree())).run()
    with pytest.raises(EstimationError):
        load_imbalance_sup(stats, [1.0, 1.0], (500.0, 800.0))


def test_oscillation_index_separates_cycles_from_noise():
    t = np.arange(400)
    wave = 5.0 * np.sin(2 * math.pi * t / 40.0)
    assert oscillation_index(wave, 1.0, 20.0) > 0.9
    noise = np.random.default_rng(11).normal(size=4000)
    assert oscillation_index(noise, 1.0, 20.0) < 0.2
    assert oscillation_index(np.zeros(100), 1.0, 5.0) == 0.0


def test_oscillation_index_needs_enough_samples():
    with pytest.raises(EstimationError):
        oscillation_index(np.ones(10), 1.0, 2.0)
    with pytest.raises(EstimationError):
        oscillation_index(np.ones(100), 1.0, 100.0)


def test_estimate_half_widths():
    same = estimate([4.0, 4.0, 4.0])
    assert same.mean == 4.0 and same.half_width == 0.0
    pair = estimate([1.0, 3.0])
    assert pair.mean == pytest.approx(2.0)
    assert pair.half_width == pytest.approx(12.706, abs=1e-3)
    five = estimate([1.0, 2.0, 3.0, 4.0, 5.0])
    assert five.half_width == pytest.approx(1.963, abs=1e-3)
    assert five.covers(3.5) and not five.covers(5.0)
    assert estimate([1.0, math.nan, 3.0]).count == 2
    with pytest.raises(EstimationError):
        estimate([math.inf])


def test_aggregate_ignores_replication_order():
    rng = np.random.default_rng(2)
    summaries = [
        ReplicationSummary(i, 100, {"mtcc": float(v), "mean_wait": float(v) / 3})
        for i, v in enumerate(rng.gamma(2.0, 5.0, 30))
    ]
    forward = aggregate(summaries)
    backward = aggregate(summaries[::-1])
    assert forward == backward
    assert set(forward) == {"mtcc", "mean_wait"}


def test_aggregate_metrics_shape():
    out = aggregate_metrics({"mtcc": estimate([1.0, 3.0])}, 2, {"policy": "jsq"})
    assert out["policy"] == "jsq"
    assert out["reps"] == 2
    assert out["metrics"]["mtcc"]["mean"] == pytest.approx(2.0)
    with pytest.raises(EstimationError):
        aggregate([])
