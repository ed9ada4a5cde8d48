from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from ..engine.records import Customer, SampleStats
from ..engine.simulator import ARRIVAL, Simulator
from ..engine.types import PoolKind, ScenarioConfig, ServiceMode

GAP_SLACK = 1e-9


class CouplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class PoolSpec:
    kind: PoolKind
    service_rate: float

    @classmethod
    def for_scenario(cls, cfg: ScenarioConfig, kind: PoolKind | str) -> "PoolSpec":
        return cls(PoolKind(kind), cfg.mu_total)


class ServicePool:
    """Single server of the aggregate rate, fed with the distributed system's customers.

    The synchronized pool receives each customer when it reaches its station;
    the minimum-delay pool receives it after the smallest delay from its origin.
    Workload is in service-requirement units and drains at the pool rate.
    """

    def __init__(self, spec: PoolSpec, sim: Simulator, record: bool = False):
        self.spec = spec
        self.rate = spec.service_rate
        self.sim = sim
        self.period_start = 0.0
        self.period_work = 0.0
        self.closed_busy = 0.0
        self.enroute = 0.0
        self.enroute_count = 0
        self.inputs = 0
        self.input_work = 0.0
        self.path: Optional[List[Tuple[float, float, float]]] = [] if record else None
        sim.on_dispatch.append(self._dispatch)

    def workload_at(self, t: float) -> float:
        return max(0.0, self.period_work - self.rate * (t - self.period_start))

    def busy_until(self, t: float) -> float:
        return self.closed_busy + min(t - self.period_start, self.period_work / self.rate)

    def drained_at(self) -> float:
        """Time the current busy period ends if nothing else arrives."""
        return self.period_start + self.period_work / self.rate

    def _dispatch(self, t: float, cust: Customer, delays: Sequence[float]) -> None:
        self.inputs += 1
        if self.spec.kind is PoolKind.SSP:
            delay = cust.travel
        else:
            delay = float(min(delays))
            self.enroute += cust.service_req
            self.enroute_count += 1
            self._note(t)
        # queued after the station's own arrival, so a per-station draw is already attached
        self.sim.schedule(t + delay, ARRIVAL, cust.id, self._arrive, cust)

    def _arrive(self, t: float, cust: Customer) -> None:
        w = cust.service_req
        if w is None:
            raise CouplingError(f"customer {cust.id} reached the pool without a service requirement")
        self.input_work += w
        if self.spec.kind is PoolKind.MDSP:
            self.enroute_count -= 1
            self.enroute = self.enroute - w if self.enroute_count else 0.0
        if self.workload_at(t) <= 0.0:
            # previous busy period has drained; start a new one
            self.closed_busy += self.period_work / self.rate
            self.period_start = t
            self.period_work = 0.0
        self.period_work += w
        self._note(t)

    def _note(self, t: float) -> None:
        if self.path is not None:
            self.path.append((t, self.workload_at(t), self.enroute))


class GapTracker:
    """Evaluates the workload gap at every distinct event time of either system.

    Between events the gap is linear except where the pool runs dry, which
    is not an event of its own; that instant (and the start of the sampling
    window) is evaluated as well, so the recorded path is exact when
    interpolated linearly.
    """

    def __init__(self, sim: Simulator, pool: ServicePool, record: bool = False):
        self.sim = sim
        self.pool = pool
        self.include_enroute = pool.spec.kind is PoolKind.MDSP
        self.minimum = 0.0
        self.supremum = 0.0
        self.last_epoch = 0.0
        self.trajectory: Optional[List[Tuple[float, float]]] = [] if record else None
        sim.on_epoch.append(self)

    def value(self, t: float) -> float:
        state = self.sim.workload_state(t)
        ref = self.pool.workload_at(t)
        if self.include_enroute:
            return state.total - (ref + self.pool.enroute)
        return sum(state.stationed) - ref

    def __call__(self, t: float) -> None:
        prev, self.last_epoch = self.last_epoch, t
        for s in sorted((self.sim.burnin, self.pool.drained_at())):
            if prev < s < t:
                self.observe(s, self.value(s))
        self.observe(t, self.value(t))

    def observe(self, t: float, g: float) -> None:
        if g < self.minimum:
            self.minimum = g
        if t >= self.sim.burnin and g > self.supremum:
            self.supremum = g
        if self.trajectory is not None:
            self.trajectory.append((t, g))


@dataclass
class CoupledRun:
    kind: PoolKind
    stats: SampleStats
    n: float
    window: Tuple[float, float]
    gap_min: float
    gap_sup: float
    pool_busy: float
    gap_trajectory: Optional[List[Tuple[float, float]]] = None
    pool_path: Optional[List[Tuple[float, float, float]]] = None

    @property
    def holds(self) -> bool:
        return self.gap_min >= -GAP_SLACK


def coupling_problems(cfg: ScenarioConfig, pool: PoolSpec) -> List[str]:
    out = []
    if abs(pool.service_rate - cfg.mu_total) > 1e-9 * cfg.mu_total:
        out.append(f"pool rate {pool.service_rate} differs from total station capacity {cfg.mu_total}")
    if pool.kind is PoolKind.MDSP and cfg.service_mode is not ServiceMode.PER_CUSTOMER:
        # the pool takes customers before any station has attached a requirement
        out.append("the minimum-delay pool needs service_mode: per_customer")
    return out


def run_coupled(
    cfg: ScenarioConfig,
    pool: PoolSpec,
    replication: int = 0,
    record: bool = False,
) -> CoupledRun:
    problems = coupling_problems(cfg, pool)
    if problems:
        raise CouplingError("; ".join(problems))
    sim = Simulator(cfg, replication)
    ref = ServicePool(pool, sim, record)
    gap = GapTracker(sim, ref, record)
    stats = sim.run()
    if ref.inputs != sim.total_appeared:
        raise CouplingError(
            f"replication {replication}: pool saw {ref.inputs} customers, system saw {sim.total_appeared}"
        )
    return CoupledRun(
        kind=pool.kind,
        stats=stats,
        n=cfg.traffic.n,
        window=(cfg.burnin, cfg.horizon),
        gap_min=gap.minimum,
        gap_sup=gap.supremum,
        pool_busy=ref.busy_until(cfg.horizon),
        gap_trajectory=gap.trajectory,
        pool_path=ref.path,
    )


def gap_supremum(run: CoupledRun, window: Optional[Tuple[float, float]] = None) -> Tuple[float, float]:
    """Supremum of the gap over `window` and its diffusion-scaled value sup / sqrt(n)."""
    if window is None or tuple(window) == tuple(run.window):
        sup = run.gap_sup
    else:
        if run.gap_trajectory is None:
            raise CouplingError("a custom window needs a run recorded with record=True")
        sup = _sup_piecewise_linear(run.gap_trajectory, window)
    return sup, sup / math.sqrt(run.n)


def _sup_piecewise_linear(points: Sequence[Tuple[float, float]], window: Tuple[float, float]) -> float:
    a, b = window
    best = 0.0
    prev: Optional[Tuple[float, float]] = None
    for t, g in points:
        if a <= t <= b:
            best = max(best, g)
        if prev is not None:
            t0, g0 = prev
            for edge in (a, b):
                if t0 < edge < t:
                    best = max(best, g0 + (g - g0) * (edge - t0) / (t - t0))
        prev = (t, g)
    return best


def mdsp_paths_identical(cfg_a: ScenarioConfig, cfg_b: ScenarioConfig, replication: int = 0) -> bool:
    """True when two policies on the same seed drive the minimum-delay pool identically."""
    spec = PoolSpec(PoolKind.MDSP, cfg_a.mu_total)
    run_a = run_coupled(cfg_a, spec, replication, record=True)
    run_b = run_coupled(cfg_b, spec, replication, record=True)
    return run_a.pool_path == run_b.pool_path
