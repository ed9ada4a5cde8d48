from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

from ..bounds.pools import CoupledRun, PoolSpec, gap_supremum, run_coupled
from ..engine.records import SampleStats
from ..engine.simulator import Simulator
from ..engine.types import PoolKind, ScenarioConfig
from .export import scenario_delay, write_gap, write_json, write_results, write_trajectory
from .metrics import EstimationError, aggregate, aggregate_metrics, oscillation_index

logger = logging.getLogger(__name__)

T = TypeVar("T")


class ReplicationError(RuntimeError):
    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"replication {index} failed: {cause}")
        self.index = index
        self.cause = cause


def parallel_map(fn: Callable[[int], T], indices: Sequence[int], parallel: int = 1) -> List[T]:
    """Apply `fn` to every replication index; results come back in index order."""
    results: List[T] = []
    if parallel <= 1 or len(indices) <= 1:
        for i in indices:
            try:
                results.append(fn(i))
            except Exception as exc:
                raise ReplicationError(i, exc) from exc
        return results
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        futures = [pool.submit(fn, i) for i in indices]
        for i, fut in zip(indices, futures):
            try:
                results.append(fut.result())
            except Exception as exc:
                for other in futures:
                    other.cancel()
                raise ReplicationError(i, exc) from exc
    return results


def replicate(cfg: ScenarioConfig, index: int) -> SampleStats:
    stats = Simulator(cfg, index).run()
    delay = scenario_delay(cfg)
    if stats.trajectory is not None and len(cfg.stations) == 2 and math.isfinite(delay):
        diffs = [row[1] - row[2] for row in stats.trajectory if row[0] >= cfg.burnin]
        try:
            stats.extra["oscillation"] = oscillation_index(diffs, cfg.sample_dt, delay)
        except EstimationError:
            pass
    logger.debug("replication %d: %d events, mtcc %.4f", index, stats.event_count, stats.time_avg_total_count)
    return stats


def coupled_replication(cfg: ScenarioConfig, kind: PoolKind, record: bool, index: int) -> CoupledRun:
    run = run_coupled(cfg, PoolSpec.for_scenario(cfg, kind), index, record)
    sup, scaled = gap_supremum(run)
    run.stats.extra.update({"gap_min": run.gap_min, "gap_sup": sup, "gap_sup_scaled": scaled})
    return run


def run_replications(cfg: ScenarioConfig, reps: int, parallel: int = 1) -> List[SampleStats]:
    if reps < 1:
        raise ValueError("need at least one replication")
    logger.info("%s: %d replications, horizon %g, burn-in %g", cfg.scenario_id, reps, cfg.horizon, cfg.burnin)
    return parallel_map(partial(replicate, cfg), range(reps), parallel)


def run_coupled_replications(
    cfg: ScenarioConfig,
    kind: PoolKind,
    reps: int,
    parallel: int = 1,
    record: bool = False,
) -> List[CoupledRun]:
    if reps < 1:
        raise ValueError("need at least one replication")
    return parallel_map(partial(coupled_replication, cfg, PoolKind(kind), record), range(reps), parallel)


def run_many(
    cfg: ScenarioConfig,
    reps: int,
    out_dir: str,
    parallel: int = 1,
    meta: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """Replicate a scenario and write results.csv, metrics.json and any sampled trajectories."""
    os.makedirs(out_dir, exist_ok=True)
    runs = run_replications(cfg, reps, parallel)
    for stats in runs:
        if stats.trajectory is not None:
            write_trajectory(os.path.join(out_dir, f"trajectory_r{stats.replication:04d}.csv"), stats.trajectory, len(cfg.stations))
    return _finish(cfg, [s.summary() for s in runs], out_dir, meta)


def run_many_coupled(
    cfg: ScenarioConfig,
    kind: PoolKind,
    reps: int,
    out_dir: str,
    parallel: int = 1,
    record: bool = False,
) -> Dict[str, Any]:
    os.makedirs(out_dir, exist_ok=True)
    runs = run_coupled_replications(cfg, kind, reps, parallel, record)
    for i, run in enumerate(runs):
        if run.gap_trajectory is not None:
            write_gap(os.path.join(out_dir, f"gap_r{i:04d}.csv"), run.gap_trajectory)
    meta = {
        "pool": PoolKind(kind).value,
        "holds": all(r.holds for r in runs),
        "gap_min": min(r.gap_min for r in runs),
        "per_replication": [{"replication": i, "gap_min": r.gap_min, "gap_sup": r.gap_sup} for i, r in enumerate(runs)],
    }
    return _finish(cfg, [r.stats.summary() for r in runs], out_dir, meta)


def _finish(cfg: ScenarioConfig, summaries, out_dir: str, meta: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    estimates = aggregate(summaries)
    write_results(os.path.join(out_dir, "results.csv"), [(cfg, estimates, len(summaries))])
    header = {"scenario_id": cfg.scenario_id, "policy": cfg.policy.label, "chi": cfg.policy.chi, "seed": cfg.seed}
    header.update(meta or {})
    metrics = aggregate_metrics(estimates, len(summaries), header)
    write_json(os.path.join(out_dir, "metrics.json"), metrics)
    return metrics
