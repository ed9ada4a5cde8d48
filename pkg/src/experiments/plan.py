from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from ..engine.types import OriginSpec
from ..engine.validator import ScenarioError, geography_from_tree, n_from_rho
from ..planning.borders import tau_from_chi
from ..planning.capacity import drop_empty_stations, solve_joint_lp, solve_routing_lp
from ..planning.geography import capacities_from_zones, discretize
from ..planning.heuristics import DEFAULT_C, capped, chi_reciprocal_root, mean_extra_delay


@dataclass
class PlanReport:
    capacities: np.ndarray
    plan: np.ndarray
    objective: float
    routing_objective: float
    gbc: bool
    rho: float
    gamma_hat: float
    chi: float
    tau_bar: Optional[float]
    dropped: List[int]

    def as_dict(self) -> Dict[str, Any]:
        return {
            "capacities": self.capacities.tolist(),
            "plan": self.plan.tolist(),
            "objective": self.objective,
            "routing_objective": self.routing_objective,
            "gbc": self.gbc,
            "rho": self.rho,
            "gamma_hat": self.gamma_hat,
            "chi": self.chi,
            "tau_bar": self.tau_bar,
            "dropped_stations": [k + 1 for k in self.dropped],
        }


def _rho(tree: Dict[str, Any], mu_total: float) -> float:
    traffic = tree.get("traffic") or {}
    if "rho" in traffic:
        return float(traffic["rho"])
    if "appearance_rate" in traffic:
        return float(traffic["appearance_rate"]) / mu_total
    raise ScenarioError("traffic needs rho or appearance_rate")


def _mu_total(tree: Dict[str, Any]) -> float:
    if tree.get("mu_total") is not None:
        return float(tree["mu_total"])
    if tree.get("stations"):
        return float(sum(st["service_rate"] for st in tree["stations"]))
    raise ScenarioError("planning needs mu_total or stations")


def plan_from_tree(tree: Dict[str, Any], model: str = "band") -> PlanReport:
    """Capacities, routing plan and balancing fraction for a scenario file.

    A region gets zone-proportional capacities, the reciprocal-root fraction
    from the mean boundary distance, and the tolerance that produces it.
    Discrete origins get the joint LP (or the routing LP when capacities are
    given) and the fraction from the unaware mean extra delay.
    """
    heur = tree.get("heuristics") or {}
    c = float(heur.get("c_dstar", DEFAULT_C))
    mu_total = _mu_total(tree)
    rho = _rho(tree, mu_total)
    if not 0 < rho < 1:
        raise ScenarioError(f"rho={rho:.6g} must lie in (0, 1)")

    if tree.get("geography"):
        geo = geography_from_tree(tree["geography"])
        caps = capacities_from_zones(geo, mu_total)
        origins = discretize(geo)
        probs = [o.probability for o in origins]
        delays = np.array([o.delays for o in origins])
        joint = solve_joint_lp(probs, delays, mu_total)
        _, gamma_hat = mean_extra_delay(geo, "aware", rho)
        chi = capped(chi_reciprocal_root(gamma_hat, c), caps)
        tau = tau_from_chi(geo, chi, model=model, round_to=1.0)
        return PlanReport(caps, joint.plan.r, joint.objective, joint.objective, True, rho, gamma_hat, chi, tau, [])

    if not tree.get("origins"):
        raise ScenarioError("planning needs origins or geography")
    scale = math.sqrt(n_from_rho(rho)) if tree.get("delays_scaled") else 1.0
    probs = [float(o["probability"]) for o in tree["origins"]]
    delays = np.array([[float(d) * scale for d in o["delays"]] for o in tree["origins"]])
    dropped: List[int] = []
    if tree.get("stations"):
        caps = np.array([float(st["service_rate"]) for st in tree["stations"]])
        result = solve_routing_lp(probs, delays, caps)
        objective = result.objective
    else:
        joint = solve_joint_lp(probs, delays, mu_total)
        joint, delays, dropped = drop_empty_stations(joint, delays)
        caps = joint.capacities
        objective = joint.objective
        result = solve_routing_lp(probs, delays, caps)
    specs = [OriginSpec(p, tuple(row)) for p, row in zip(probs, delays)]
    _, gamma_hat = mean_extra_delay(specs, "unaware", rho)
    chi = capped(chi_reciprocal_root(gamma_hat, c), caps) if gamma_hat > 0 else capped(1.0, caps)
    return PlanReport(caps, result.plan.r, objective, result.objective, result.gbc, rho, gamma_hat, chi, None, dropped)


def derived_scenario(tree: Dict[str, Any], report: PlanReport) -> Dict[str, Any]:
    """A runnable scenario using the planned capacities and the suggested policy."""
    out = copy.deepcopy({k: v for k, v in tree.items() if k not in ("mu_total", "sweep", "scaling")})
    service = tree.get("service")
    out["stations"] = [
        {"service_rate": float(mu_k), **({"service": service} if service else {})} for mu_k in report.capacities
    ]
    out.setdefault("horizon", 2e5)
    out.setdefault("burnin", 6e4)
    if report.tau_bar is not None:
        out["policy"] = {"kind": "tolerance_geo", "tau_bar": float(report.tau_bar)}
    else:
        keep = [k for k in range(report.plan.shape[1] + len(report.dropped)) if k not in report.dropped]
        out["origins"] = [
            {"probability": float(o["probability"]), "delays": [float(o["delays"][k]) for k in keep]}
            for o in tree["origins"]
        ]
        out["policy"] = {"kind": "rjsq_aware", "chi": float(report.chi), "plan": report.plan.tolist()}
    return out
