from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple


@dataclass
class Customer:
    id: int
    appear_time: float
    origin: int
    destination: int
    arrive_time: float
    # attached at the station when requirements are drawn per station
    service_req: Optional[float]
    start_time: Optional[float] = None

    @property
    def travel(self) -> float:
        return self.arrive_time - self.appear_time

    @property
    def wait(self) -> Optional[float]:
        if self.start_time is None:
            return None
        return self.start_time - self.arrive_time


@dataclass
class WorkloadState:
    stationed: Tuple[float, ...]
    enroute: float

    @property
    def total(self) -> float:
        return sum(self.stationed) + self.enroute


# trajectory row: (t, Q_1..Q_s, W_1..W_s, U)
TrajectoryRow = Tuple[float, ...]


def weighted_spread(counts: Sequence[float], mus: Sequence[float]) -> float:
    """max_k Q_k/mu_k - min_k Q_k/mu_k."""
    weighted = [q / mu for q, mu in zip(counts, mus)]
    return max(weighted) - min(weighted)


@dataclass
class ReplicationSummary:
    replication: int
    event_count: int
    values: Dict[str, float]


@dataclass
class SampleStats:
    replication: int
    window: Tuple[float, float]
    time_avg_total_count: float
    mean_wait: float
    mean_travel: float
    mean_time_to_service: float
    imbalance_sup: float
    utilization: Tuple[float, ...]
    emergent_chi: float
    served: int
    appeared: int
    event_count: int
    trajectory: Optional[List[TrajectoryRow]] = None
    events: Optional[List[Tuple[float, str, int, int]]] = None
    customers: Optional[List[Customer]] = None
    extra: Dict[str, float] = field(default_factory=dict)

    def summary(self) -> ReplicationSummary:
        values = {
            "mtcc": self.time_avg_total_count,
            "mean_wait": self.mean_wait,
            "mean_travel": self.mean_travel,
            "mean_time_to_service": self.mean_time_to_service,
            "imbalance_sup": self.imbalance_sup,
            "emergent_chi": self.emergent_chi,
        }
        for k, u in enumerate(self.utilization, start=1):
            values[f"utilization_{k}"] = u
        values.update(self.extra)
        return ReplicationSummary(self.replication, self.event_count, values)
