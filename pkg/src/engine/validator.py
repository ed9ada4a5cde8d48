from __future__ import annotations

import logging
import math
from typing import Any, Dict, List, Optional

import numpy as np

from ..policies.perturbation import PerturbationError, default_perturbation, max_chi, scheme_from_eps, scheme_violations
from ..stochastics.distributions import DistributionError, check
from .schema import (
	array_schema,
	boolean_schema,
	enum_schema,
	integer_schema,
	nullable,
	number_schema,
	object_schema,
	one_of_shapes,
	string_schema,
	validate_json,
)
from .types import (
	DistDescriptor,
	DistKind,
	GeographicSpec,
	OriginSpec,
	PolicyKind,
	PolicySpec,
	RoutingPlan,
	ScenarioConfig,
	ServiceMode,
	StationConfig,
	TieRule,
	ToleranceMode,
	TrafficSpec,
)

logger = logging.getLogger(__name__)

PROB_TOL = 1e-12
PLAN_TOL = 1e-9
BALANCING = {PolicyKind.JSQ, PolicyKind.RJSQ_UNAWARE, PolicyKind.RJSQ_AWARE, PolicyKind.TOLERANCE_GEO}


class ScenarioError(ValueError):
	pass


def n_from_rho(rho: float) -> float:
	if not 0 < rho < 1:
		raise ScenarioError(f"rho={rho} must lie in (0, 1)")
	return 1.0 / (1.0 - rho) ** 2


def dist_schema(title: str) -> Dict[str, Any]:
	return object_schema(
		title,
		{
			"kind": enum_schema("kind", [k.value for k in DistKind]),
			"variance": number_schema("variance", minimum=0.0),
		},
		["kind"],
	)


def scenario_schema() -> Dict[str, Any]:
	point = array_schema("point", {"type": "number"}, min_items=2)
	return object_schema(
		"Scenario",
		{
			"scenario_id": string_schema("scenario_id"),
			"seed": integer_schema("seed", minimum=0),
			"horizon": number_schema("horizon", exclusive_minimum=0.0),
			"burnin": number_schema("burnin", minimum=0.0),
			"sample_dt": nullable(number_schema("sample_dt", exclusive_minimum=0.0)),
			"service_mode": enum_schema("service_mode", [m.value for m in ServiceMode]),
			"delays_scaled": boolean_schema("delays_scaled"),
			"mu_total": number_schema("mu_total", exclusive_minimum=0.0),
			"service": dist_schema("service"),
			"traffic": object_schema(
				"traffic",
				{
					"rho": number_schema("rho", exclusive_minimum=0.0),
					"appearance_rate": number_schema("appearance_rate", exclusive_minimum=0.0),
					"n": number_schema("n", exclusive_minimum=0.0),
					"interappearance": dist_schema("interappearance"),
				},
				[],
			),
			"stations": array_schema(
				"stations",
				object_schema(
					"station",
					{"service_rate": number_schema("service_rate"), "service": dist_schema("service")},
					["service_rate"],
				),
				min_items=1,
			),
			"origins": array_schema(
				"origins",
				object_schema(
					"origin",
					{
						"probability": number_schema("probability"),
						"delays": array_schema("delays", {"type": "number"}, min_items=1),
					},
					["probability", "delays"],
				),
				min_items=1,
			),
			"geography": object_schema(
				"geography",
				{
					"region": array_schema("region", {"type": "number"}, min_items=4),
					"stations": array_schema("stations", point, min_items=1),
					"speed": number_schema("speed", exclusive_minimum=0.0),
					"grid": integer_schema("grid", minimum=1),
					"uniform": boolean_schema("uniform"),
				},
				["region", "stations", "speed"],
			),
			"policy": object_schema(
				"policy",
				{
					"kind": enum_schema("kind", [k.value for k in PolicyKind]),
					"chi": number_schema("chi", minimum=0.0),
					"eps": array_schema("eps", {"type": "number"}, min_items=2),
					"tie_rule": enum_schema("tie_rule", [t.value for t in TieRule]),
					"tau_bar": nullable(number_schema("tau_bar", minimum=0.0)),
					"tolerance_mode": enum_schema("tolerance_mode", [m.value for m in ToleranceMode]),
					"plan": one_of_shapes(
						enum_schema("plan", ["proportional", "lp", "nearest"]),
						array_schema("plan", array_schema("row", {"type": "number"}), min_items=1),
					),
				},
				["kind"],
			),
			"pool": object_schema("pool", {"kind": enum_schema("kind", ["ssp", "mdsp"])}, ["kind"]),
			"heuristics": {"type": "object"},
			"sweep": {"type": "object"},
			"scaling": {"type": "object"},
		},
		["horizon", "traffic", "policy"],
	)


def validate_config(tree: Dict[str, Any]) -> None:
	validate_json(tree, scenario_schema())


def _dist(node: Optional[Dict[str, Any]], default: Optional[DistDescriptor] = None) -> DistDescriptor:
	if not node:
		return default or DistDescriptor()
	return DistDescriptor.of(node["kind"], node.get("variance"))


def geography_from_tree(node: Dict[str, Any]) -> GeographicSpec:
	return GeographicSpec(
		region=tuple(float(v) for v in node["region"][:4]),
		station_coords=tuple((float(p[0]), float(p[1])) for p in node["stations"]),
		speed=float(node["speed"]),
		grid=int(node.get("grid", 40)),
		uniform=bool(node.get("uniform", True)),
	)


def build_scenario(tree: Dict[str, Any]) -> ScenarioConfig:
	"""Schema-check a config tree and turn it into a ScenarioConfig.

	Semantic invariants are left to validate_scenario; only structural
	problems that prevent building raise ScenarioError.
	"""
	validate_config(tree)
	from ..planning.capacity import drop_empty_stations, solve_joint_lp, solve_routing_lp
	from ..planning.geography import capacities_from_zones, discretize

	default_service = _dist(tree.get("service"))
	geography = geography_from_tree(tree["geography"]) if tree.get("geography") else None
	scaled = bool(tree.get("delays_scaled", False))

	if geography is not None:
		origins = discretize(geography)
	elif tree.get("origins"):
		origins = [
			OriginSpec(float(o["probability"]), tuple(float(d) for d in o["delays"]), scaled)
			for o in tree["origins"]
		]
	else:
		raise ScenarioError("scenario needs either origins or geography")

	if tree.get("stations"):
		stations = [
			StationConfig(float(st["service_rate"]), _dist(st.get("service"), default_service))
			for st in tree["stations"]
		]
	else:
		mu_total = tree.get("mu_total")
		if mu_total is None:
			raise ScenarioError("without stations, mu_total is needed to plan capacities")
		if geography is not None:
			caps = capacities_from_zones(geography, float(mu_total))
		else:
			probs = [o.probability for o in origins]
			planned = solve_joint_lp(probs, np.array([o.delays for o in origins]), float(mu_total))
			planned, delays, dropped = drop_empty_stations(planned, np.array([o.delays for o in origins]))
			if dropped:
				origins = [OriginSpec(o.probability, tuple(row), o.scaled) for o, row in zip(origins, delays)]
			caps = planned.capacities
		stations = [StationConfig(float(mu_k), default_service) for mu_k in caps]

	mu = sum(st.service_rate for st in stations)
	traffic_node = tree["traffic"]
	if "rho" in traffic_node:
		rho = float(traffic_node["rho"])
		lam = rho * mu
	elif "appearance_rate" in traffic_node:
		lam = float(traffic_node["appearance_rate"])
		rho = lam / mu
	else:
		raise ScenarioError("traffic needs rho or appearance_rate")
	if "n" in traffic_node:
		n = float(traffic_node["n"])
	else:
		n = n_from_rho(rho) if 0 < rho < 1 else math.nan
	traffic = TrafficSpec(lam, rho, n, _dist(traffic_node.get("interappearance")))

	cfg = ScenarioConfig(
		scenario_id=str(tree.get("scenario_id", "scenario")),
		stations=stations,
		origins=origins,
		traffic=traffic,
		policy=PolicySpec(),
		horizon=float(tree["horizon"]),
		burnin=float(tree.get("burnin", 0.0)),
		seed=int(tree.get("seed", 0)),
		geography=geography,
		service_mode=ServiceMode(tree.get("service_mode", ServiceMode.PER_STATION.value)),
		sample_dt=tree.get("sample_dt"),
	)
	cfg.policy = _policy(tree["policy"], cfg, solve_routing_lp)
	return cfg


def _policy(node: Dict[str, Any], cfg: ScenarioConfig, solve_routing_lp) -> PolicySpec:
	kind = PolicyKind(node["kind"])
	mus = cfg.mus
	tau = node.get("tau_bar")
	policy = PolicySpec(
		kind=kind,
		chi=float(node.get("chi", 0.0)),
		tie_rule=TieRule(node.get("tie_rule", TieRule.LOWEST_INDEX.value)),
		tau_bar=math.inf if tau is None else float(tau),
		tolerance_mode=ToleranceMode(node.get("tolerance_mode", ToleranceMode.DETERMINISTIC.value)),
	)
	if kind in (PolicyKind.RJSQ_UNAWARE, PolicyKind.RJSQ_AWARE) and len(mus) >= 2:
		if node.get("eps"):
			policy.scheme = scheme_from_eps(node["eps"])
			policy.chi = policy.scheme.chi
		else:
			try:
				policy.scheme = default_perturbation(len(mus), mus, policy.chi)
			except PerturbationError:
				policy.scheme = None
	if kind is PolicyKind.RJSQ_AWARE:
		plan = node.get("plan", "proportional")
		probs = cfg.probabilities
		if isinstance(plan, list):
			policy.plan = RoutingPlan(np.array(plan, dtype=float))
		elif plan == "lp":
			policy.plan = solve_routing_lp(probs, cfg.delay_matrix(), mus).plan
		elif plan == "nearest":
			d = cfg.delay_matrix()
			r = np.zeros_like(d)
			r[np.arange(len(d)), np.argmin(d, axis=1)] = 1.0
			policy.plan = RoutingPlan(r)
		else:
			policy.plan = RoutingPlan(np.tile(mus / mus.sum(), (len(cfg.origins), 1)))
	if kind is PolicyKind.TOLERANCE_GEO and policy.tolerance_mode is ToleranceMode.PROBABILISTIC:
		from ..planning.borders import build_borders

		source = cfg.geography if cfg.geography is not None else _literal_origins(cfg)
		borders = build_borders(source, policy.tau_bar, seed=cfg.seed)
		policy.border_mass = tuple(float(v) for v in borders.p_prime)
	return policy


def _literal_origins(cfg: ScenarioConfig) -> List[OriginSpec]:
	return [
		OriginSpec(o.probability, tuple(float(d) for d in row), False)
		for o, row in zip(cfg.origins, cfg.delay_matrix())
	]


def validate_scenario(cfg: ScenarioConfig) -> List[str]:
	"""Every violated invariant with a reason; empty when the scenario is usable."""
	out: List[str] = []
	s = len(cfg.stations)
	policy = cfg.policy
	if s == 0:
		return ["scenario has no stations"]
	if policy.kind in BALANCING and s < 2:
		out.append(f"policy {policy.kind.value} needs at least two stations")

	for k, st in enumerate(cfg.stations, start=1):
		if not st.service_rate > 0:
			out.append(f"station {k}: service rate {st.service_rate} must be positive")
		try:
			check(st.service)
		except DistributionError as exc:
			out.append(f"station {k}: {exc}")
	try:
		check(cfg.traffic.interappearance)
	except DistributionError as exc:
		out.append(f"interappearance: {exc}")
	if cfg.service_mode is ServiceMode.PER_CUSTOMER and len({st.service for st in cfg.stations}) > 1:
		out.append("per-customer service requirements need one service distribution for all stations")

	probs = cfg.probabilities
	for m, o in enumerate(cfg.origins, start=1):
		if not 0 < o.probability <= 1:
			out.append(f"origin {m}: probability {o.probability} outside (0, 1]")
		if len(o.delays) != s:
			out.append(f"origin {m}: {len(o.delays)} delays for {s} stations")
		elif not all(math.isfinite(d) and d >= 0 for d in o.delays):
			out.append(f"origin {m}: delays must be finite and nonnegative")
	if cfg.origins and abs(probs.sum() - 1.0) > PROB_TOL * max(1, len(probs)):
		out.append(f"origin probabilities sum to {probs.sum():.15g}, not 1")
	if len({o.scaled for o in cfg.origins}) > 1:
		out.append("origins mix scaled and literal delays")

	traffic = cfg.traffic
	if not traffic.rho < 1:
		out.append(f"traffic intensity rho={traffic.rho:.6g} must be below 1")
	if not (traffic.n > 0 and math.isfinite(traffic.n)):
		out.append("heavy-traffic index n must be positive and finite")
	if not cfg.horizon > 0:
		out.append("horizon must be positive")
	if not 0 <= cfg.burnin < cfg.horizon:
		out.append(f"burnin {cfg.burnin} must lie in [0, horizon={cfg.horizon})")
	if cfg.sample_dt is not None and not cfg.sample_dt > 0:
		out.append("sample_dt must be positive")

	if policy.kind in (PolicyKind.RJSQ_UNAWARE, PolicyKind.RJSQ_AWARE) and s >= 2:
		if policy.scheme is None:
			out.append(
				f"chi={policy.chi:.6g} exceeds the largest admissible balancing fraction "
				f"{max_chi(cfg.mus):.6g}"
			)
		else:
			out.extend(scheme_violations(cfg.mus, policy.scheme))
	if policy.kind is PolicyKind.RJSQ_AWARE:
		from ..planning.capacity import plan_violations

		if policy.plan is None:
			out.append("origin-aware policy needs a routing plan")
		else:
			out.extend(plan_violations(policy.plan.r, probs, cfg.mus, PLAN_TOL))
	if policy.kind is PolicyKind.TOLERANCE_GEO:
		if policy.tau_bar < 0:
			out.append("tau_bar must be nonnegative")
		if policy.tolerance_mode is ToleranceMode.PROBABILISTIC:
			mass = policy.border_mass or ()
			if not mass or min(mass) <= 0:
				out.append("probabilistic tolerance needs every border to be nonempty")
			elif policy.chi > min(mass) + PLAN_TOL:
				out.append(f"chi={policy.chi:.6g} exceeds the smallest border mass {min(mass):.6g}")

	geo = cfg.geography
	if geo is not None:
		x0, y0, x1, y1 = geo.region
		if not (x1 > x0 and y1 > y0):
			out.append("geography region must have positive width and height")
		if not geo.speed > 0:
			out.append("geography speed must be positive")
		if len(geo.station_coords) != s:
			out.append(f"geography lists {len(geo.station_coords)} stations, scenario has {s}")
		for x, y in geo.station_coords:
			if not (x0 <= x <= x1 and y0 <= y <= y1):
				out.append(f"station at ({x}, {y}) lies outside the region")
	return out
