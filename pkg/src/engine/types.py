from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np


class PolicyKind(str, Enum):
	JSQ = "jsq"
	RANDOM_PROPORTIONAL = "random_proportional"
	RJSQ_UNAWARE = "rjsq_unaware"
	RJSQ_AWARE = "rjsq_aware"
	TOLERANCE_GEO = "tolerance_geo"


class TieRule(str, Enum):
	LOWEST_INDEX = "lowest_index"
	RANDOM = "random"


class ToleranceMode(str, Enum):
	DETERMINISTIC = "deterministic"
	PROBABILISTIC = "probabilistic"


class DistKind(str, Enum):
	EXPONENTIAL = "exponential"
	DETERMINISTIC = "deterministic"
	LOGNORMAL = "lognormal"
	HYPEREXPONENTIAL = "hyperexponential"


class ServiceMode(str, Enum):
	PER_STATION = "per_station"
	PER_CUSTOMER = "per_customer"


class PoolKind(str, Enum):
	SSP = "ssp"
	MDSP = "mdsp"


@dataclass(frozen=True)
class DistDescriptor:
	"""Distribution normalized to mean 1; `variance` is also its squared CV."""

	kind: DistKind = DistKind.EXPONENTIAL
	variance: float = 1.0

	@classmethod
	def of(cls, kind: str, variance: Optional[float] = None) -> "DistDescriptor":
		k = DistKind(kind)
		if k is DistKind.EXPONENTIAL:
			return cls(k, 1.0)
		if k is DistKind.DETERMINISTIC:
			return cls(k, 0.0)
		return cls(k, float(1.0 if variance is None else variance))

	@property
	def cv(self) -> float:
		return math.sqrt(self.variance)


@dataclass(frozen=True)
class StationConfig:
	service_rate: float
	service: DistDescriptor = field(default_factory=DistDescriptor)


@dataclass(frozen=True)
class OriginSpec:
	probability: float
	delays: Tuple[float, ...]
	scaled: bool = False


@dataclass
class RoutingPlan:
	r: np.ndarray
	heavy_traffic: bool = True

	@property
	def shape(self) -> Tuple[int, int]:
		return tuple(self.r.shape)  # type: ignore[return-value]

	def row(self, m: int) -> np.ndarray:
		return self.r[m]


@dataclass(frozen=True)
class TrafficSpec:
	appearance_rate: float
	rho: float
	n: float
	interappearance: DistDescriptor = field(default_factory=DistDescriptor)


@dataclass(frozen=True)
class PerturbationScheme:
	chi: float
	eps: Tuple[float, ...]
	delta0: float


@dataclass
class PolicySpec:
	kind: PolicyKind = PolicyKind.RJSQ_UNAWARE
	chi: float = 0.0
	tie_rule: TieRule = TieRule.LOWEST_INDEX
	tau_bar: float = math.inf
	tolerance_mode: ToleranceMode = ToleranceMode.DETERMINISTIC
	scheme: Optional[PerturbationScheme] = None
	plan: Optional[RoutingPlan] = None
	# p'_k of the border regions, needed by the probabilistic tolerance rule
	border_mass: Optional[Tuple[float, ...]] = None

	@property
	def label(self) -> str:
		return self.kind.value


@dataclass(frozen=True)
class GeographicSpec:
	region: Tuple[float, float, float, float]
	station_coords: Tuple[Tuple[float, float], ...]
	speed: float
	grid: int = 40
	# False routes customers from grid-cell centers instead of continuous locations
	uniform: bool = True

	@property
	def area(self) -> float:
		x0, y0, x1, y1 = self.region
		return (x1 - x0) * (y1 - y0)

	def delays_from(self, x: float, y: float) -> np.ndarray:
		pts = np.asarray(self.station_coords, dtype=float)
		return np.hypot(pts[:, 0] - x, pts[:, 1] - y) / self.speed


@dataclass
class ScenarioConfig:
	scenario_id: str
	stations: List[StationConfig]
	origins: List[OriginSpec]
	traffic: TrafficSpec
	policy: PolicySpec
	horizon: float
	burnin: float = 0.0
	seed: int = 0
	geography: Optional[GeographicSpec] = None
	service_mode: ServiceMode = ServiceMode.PER_STATION
	sample_dt: Optional[float] = None

	@property
	def mus(self) -> np.ndarray:
		return np.array([st.service_rate for st in self.stations], dtype=float)

	@property
	def mu_total(self) -> float:
		return float(sum(st.service_rate for st in self.stations))

	@property
	def probabilities(self) -> np.ndarray:
		return np.array([o.probability for o in self.origins], dtype=float)

	def delay_matrix(self) -> np.ndarray:
		"""Literal traveling delays in minutes, one row per origin."""
		scale = math.sqrt(self.traffic.n)
		rows = [
			[d * scale if o.scaled else d for d in o.delays]
			for o in self.origins
		]
		return np.array(rows, dtype=float).reshape(len(self.origins), len(self.stations))
