from __future__ import annotations

import heapq
import logging
import math
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..policies.dispatchers import Dispatcher, build_dispatcher
from ..stochastics.distributions import sampler
from ..stochastics.streams import Purpose, StreamLabel, open_stream
from .records import Customer, SampleStats, TrajectoryRow, WorkloadState, weighted_spread
from .types import ScenarioConfig, ServiceMode

logger = logging.getLogger(__name__)

# same-instant ordering: completions, then station arrivals, then appearances
COMPLETION = 0
ARRIVAL = 1
APPEARANCE = 2

DispatchHook = Callable[[float, Customer, Sequence[float]], None]
EpochHook = Callable[[float], None]


class SimulationFault(RuntimeError):
    def __init__(self, message: str, state: Dict[str, Any]):
        super().__init__(f"{message} (state: {state})")
        self.state = state


@dataclass
class StationState:
    """FCFS single server; workload is kept relative to the current busy period.

    `period_work` is the requirement that arrived since the busy period began
    and `served_work` the part already completed, so completion epochs and
    W_k(t) never accumulate rounding from chained additions.
    """

    rate: float
    queue: Deque[Customer] = field(default_factory=deque)
    period_start: float = 0.0
    period_work: float = 0.0
    served_work: float = 0.0
    arrivals: int = 0
    departures: int = 0
    admitted_work: float = 0.0
    completed_work: float = 0.0

    @property
    def count(self) -> int:
        return len(self.queue)

    def workload_at(self, t: float) -> float:
        if not self.queue:
            return 0.0
        return max(0.0, self.period_work - self.rate * (t - self.period_start))

    def admit(self, t: float, w: float) -> None:
        if not self.queue:
            self.period_start = t
            self.period_work = 0.0
            self.served_work = 0.0
        self.period_work += w
        self.admitted_work += w

    def completion_epoch(self, w: float) -> float:
        return self.period_start + (self.served_work + w) / self.rate


class Simulator:
    """One replication of the distributed system on a shared event heap.

    Heap entries are (time, class, tiebreak, seq, handler, arg); handlers
    are bound methods, so coupled reference systems can schedule into the
    same heap through `schedule`. `on_dispatch` hooks see every customer at
    its appearance; `on_epoch` hooks run once per distinct event time,
    before that time's events are processed. The en-route workload only
    holds requirements attached at appearance (per-customer mode); per-station
    requirements are drawn when the customer joins the station queue.
    """

    def __init__(
        self,
        cfg: ScenarioConfig,
        replication: int = 0,
        dispatcher: Optional[Dispatcher] = None,
        record_events: bool = False,
        record_customers: bool = False,
        max_pending: int = 10_000_000,
    ):
        self.cfg = cfg
        self.replication = replication
        self.horizon = float(cfg.horizon)
        self.burnin = float(cfg.burnin)
        self.max_pending = max_pending
        seed = cfg.seed
        rep = replication

        self.stations = [StationState(rate=st.service_rate) for st in cfg.stations]
        self.mus = [st.service_rate for st in cfg.stations]
        self.counts = [0] * len(self.stations)

        self.lam = cfg.traffic.appearance_rate
        self.interappearance = open_stream(
            seed, StreamLabel(Purpose.INTERAPPEARANCE, rep), sampler(cfg.traffic.interappearance)
        )
        if cfg.service_mode is ServiceMode.PER_CUSTOMER:
            self.shared_service = open_stream(
                seed, StreamLabel.service(None, rep), sampler(cfg.stations[0].service)
            )
            self.service_streams = None
        else:
            self.shared_service = None
            self.service_streams = [
                open_stream(seed, StreamLabel.service(k, rep), sampler(st.service))
                for k, st in enumerate(cfg.stations)
            ]
        self.routing = open_stream(seed, StreamLabel(Purpose.ROUTING_UNIFORM, rep))
        self.origin_stream = open_stream(seed, StreamLabel(Purpose.ORIGIN_DRAW, rep))
        self.location_stream = open_stream(seed, StreamLabel(Purpose.LOCATION_DRAW, rep))

        probs = cfg.probabilities
        self.origin_kappa = list(np.cumsum(probs))
        self.delay_rows = [tuple(float(d) for d in row) for row in cfg.delay_matrix()]
        self.nearest = [int(np.argmin(row)) for row in self.delay_rows] if self.delay_rows else []
        self.dispatch = dispatcher or build_dispatcher(cfg.policy, self.mus, probs, self.routing)

        self.on_dispatch: List[DispatchHook] = []
        self.on_epoch: List[EpochHook] = []

        self.now = 0.0
        self.enroute = 0.0
        self.enroute_count = 0
        self.total_appeared = 0
        self.event_count = 0
        self._heap: List[Tuple[Any, ...]] = []
        self._seq = 0
        self._next_id = 0

        self._area = 0.0
        self._busy = [0.0] * len(self.stations)
        self._imbalance = 0.0
        self._wait_sum = 0.0
        self._travel_sum = 0.0
        self._served = 0
        self._appeared = 0
        self._diverted = 0

        self._sample_dt = cfg.sample_dt
        self._next_sample = 0.0
        self.trajectory: Optional[List[TrajectoryRow]] = [] if cfg.sample_dt else None
        self.events: Optional[List[Tuple[float, str, int, int]]] = [] if record_events else None
        self.customers: Optional[List[Customer]] = [] if record_customers else None

    # heap

    def schedule(self, time: float, cls: int, tiebreak: int, handler: Callable[[float, Any], None], arg: Any) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (time, cls, tiebreak, self._seq, handler, arg))

    def state(self) -> Dict[str, Any]:
        return {
            "replication": self.replication,
            "now": self.now,
            "counts": list(self.counts),
            "workloads": self.workloads_at(self.now),
            "enroute": self.enroute,
            "pending": len(self._heap),
        }

    def workloads_at(self, t: float) -> List[float]:
        return [st.workload_at(t) for st in self.stations]

    def workload_state(self, t: float) -> WorkloadState:
        return WorkloadState(tuple(self.workloads_at(t)), self.enroute)

    def run(self) -> SampleStats:
        self._schedule_appearance(0.0, 0)
        heap = self._heap
        horizon = self.horizon
        while heap and heap[0][0] <= horizon:
            t = heap[0][0]
            if t > self.now:
                self._advance(t)
            _, _, _, _, handler, arg = heapq.heappop(heap)
            handler(t, arg)
            self.event_count += 1
            if len(heap) > self.max_pending:
                raise SimulationFault("event heap overflow", self.state())
        if horizon > self.now:
            self._advance(horizon)
        if self.burnin <= horizon:
            self._imbalance = max(self._imbalance, self._current_imbalance())
        self._flush_samples(horizon, inclusive=True)
        return self._finish()

    # time bookkeeping

    def _current_imbalance(self) -> float:
        return weighted_spread(self.counts, self.mus)

    def _flush_samples(self, t: float, inclusive: bool = False) -> None:
        if self.trajectory is None:
            return
        dt = self._sample_dt
        while self._next_sample < t or (inclusive and self._next_sample <= t):
            ts = self._next_sample
            self.trajectory.append(
                (ts, *[float(q) for q in self.counts], *self.workloads_at(ts), self.enroute)
            )
            self._next_sample = ts + dt

    def _advance(self, t: float) -> None:
        self._flush_samples(min(t, self.horizon))
        lo = max(self.now, self.burnin)
        hi = min(t, self.horizon)
        if hi > lo:
            span = hi - lo
            self._area += sum(self.counts) * span
            for k, q in enumerate(self.counts):
                if q:
                    self._busy[k] += span
            imb = self._current_imbalance()
            if imb > self._imbalance:
                self._imbalance = imb
        self.now = t
        for hook in self.on_epoch:
            hook(t)

    # handlers

    def _schedule_appearance(self, t: float, tiebreak: int) -> None:
        z = self.interappearance()
        if not (z >= 0.0 and math.isfinite(z)):
            raise SimulationFault(f"nonfinite interappearance draw {z}", self.state())
        t_next = t + z / self.lam
        if t_next <= self.horizon:
            self.schedule(t_next, APPEARANCE, tiebreak, self._appear, None)

    def _draw_origin(self) -> Tuple[int, Sequence[float], int]:
        geo = self.cfg.geography
        if geo is not None and geo.uniform:
            x0, y0, x1, y1 = geo.region
            x = x0 + (x1 - x0) * self.location_stream()
            y = y0 + (y1 - y0) * self.location_stream()
            delays = [math.hypot(sx - x, sy - y) / geo.speed for sx, sy in geo.station_coords]
            g = geo.grid
            ix = min(int((x - x0) / (x1 - x0) * g), g - 1)
            iy = min(int((y - y0) / (y1 - y0) * g), g - 1)
            near = min(range(len(delays)), key=delays.__getitem__)
            return ix * g + iy, delays, near
        if len(self.delay_rows) == 1:
            m = 0
        else:
            m = min(bisect_right(self.origin_kappa, self.origin_stream()), len(self.delay_rows) - 1)
        return m, self.delay_rows[m], self.nearest[m]

    def _appear(self, t: float, _: Any) -> None:
        j = self._next_id
        self._next_id += 1
        self.total_appeared += 1
        self._schedule_appearance(t, j + 1)
        origin, delays, near = self._draw_origin()
        w = self._checked(self.shared_service()) if self.shared_service is not None else None
        k = self.dispatch(self.counts, origin, delays)
        cust = Customer(j, t, origin, k, t + float(delays[k]), w)
        self.enroute_count += 1
        if w is not None:
            self.enroute += w
        self.schedule(cust.arrive_time, ARRIVAL, j, self._arrive, cust)
        if t >= self.burnin:
            self._appeared += 1
            if k != near:
                self._diverted += 1
        if self.events is not None:
            self.events.append((t, "appear", j, k))
        for hook in self.on_dispatch:
            hook(t, cust, delays)

    def _checked(self, w: float) -> float:
        if not (w >= 0.0 and math.isfinite(w)):
            raise SimulationFault(f"nonfinite service requirement {w}", self.state())
        return w

    def _arrive(self, t: float, cust: Customer) -> None:
        k = cust.destination
        self.enroute_count -= 1
        if cust.service_req is None:
            # i-th arrival to station k takes the i-th draw of its stream
            cust.service_req = self._checked(self.service_streams[k]())
        else:
            self.enroute = self.enroute - cust.service_req if self.enroute_count else 0.0
        st = self.stations[k]
        st.admit(t, cust.service_req)
        st.arrivals += 1
        st.queue.append(cust)
        self.counts[k] += 1
        if self.events is not None:
            self.events.append((t, "arrive", cust.id, k))
        if len(st.queue) == 1:
            self._start_service(t, k, cust)

    def _start_service(self, t: float, k: int, cust: Customer) -> None:
        cust.start_time = t
        if cust.appear_time >= self.burnin:
            self._served += 1
            self._wait_sum += t - cust.arrive_time
            self._travel_sum += cust.travel
            if self.customers is not None:
                self.customers.append(cust)
        if self.events is not None:
            self.events.append((t, "start", cust.id, k))
        st = self.stations[k]
        self.schedule(st.completion_epoch(cust.service_req), COMPLETION, k, self._complete, k)

    def _complete(self, t: float, k: int) -> None:
        st = self.stations[k]
        done = st.queue.popleft()
        st.served_work += done.service_req
        st.completed_work += done.service_req
        st.departures += 1
        self.counts[k] -= 1
        if self.events is not None:
            self.events.append((t, "depart", done.id, k))
        if st.queue:
            self._start_service(t, k, st.queue[0])

    def _finish(self) -> SampleStats:
        length = self.horizon - self.burnin
        served = self._served
        mean_wait = self._wait_sum / served if served else math.nan
        mean_travel = self._travel_sum / served if served else math.nan
        stats = SampleStats(
            replication=self.replication,
            window=(self.burnin, self.horizon),
            time_avg_total_count=self._area / length,
            mean_wait=mean_wait,
            mean_travel=mean_travel,
            mean_time_to_service=mean_wait + mean_travel,
            imbalance_sup=self._imbalance,
            utilization=tuple(b / length for b in self._busy),
            emergent_chi=self._diverted / self._appeared if self._appeared else 0.0,
            served=served,
            appeared=self._appeared,
            event_count=self.event_count,
            trajectory=self.trajectory,
            events=self.events,
            customers=self.customers,
        )
        if not math.isfinite(stats.time_avg_total_count):
            raise SimulationFault("nonfinite customer-count average", self.state())
        return stats


def run(cfg: ScenarioConfig, replication: int = 0, **kwargs: Any) -> SampleStats:
    return Simulator(cfg, replication, **kwargs).run()
