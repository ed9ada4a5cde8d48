from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from ..engine.types import RoutingPlan
from .simplex import Infeasible, simplex_min

logger = logging.getLogger(__name__)

PLAN_TOL = 1e-9
# above this many variables the routing LP goes to HiGHS instead of the dense tableau
DENSE_LIMIT = 600
HIGHS_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


class PlanningError(ValueError):
    pass


class InfeasiblePlanError(PlanningError):
    def __init__(self, station: int, message: str):
        super().__init__(message)
        self.station = station


@dataclass
class PlanningResult:
    capacities: np.ndarray
    plan: RoutingPlan
    objective: float
    gbc: bool


def plan_objective(probs: Sequence[float], delays: np.ndarray, plan: np.ndarray) -> float:
    p = np.asarray(probs, dtype=float)
    d = np.where(np.isfinite(delays), delays, 0.0)
    return float(np.sum(p[:, None] * plan * d))


def is_gbc(plan: np.ndarray, delays: np.ndarray, tol: float = PLAN_TOL) -> bool:
    """Every positive routing probability points at one of the origin's nearest stations."""
    d = np.asarray(delays, dtype=float)
    nearest = d <= d.min(axis=1, keepdims=True) + tol
    return bool(np.all((np.asarray(plan) <= tol) | nearest))


def solve_joint_lp(probs: Sequence[float], delays: np.ndarray, mu_total: float) -> PlanningResult:
    """Capacities and plan minimizing mean traveling delay.

    With capacities free the constraints decouple by origin, so the optimum
    sends every origin to its nearest station (lowest index on ties) and
    sizes each station by the probability mass it attracts.
    """
    p = np.asarray(probs, dtype=float)
    d = np.asarray(delays, dtype=float)
    b, s = d.shape
    nearest = np.argmin(d, axis=1)
    r = np.zeros((b, s))
    r[np.arange(b), nearest] = 1.0
    caps = mu_total * np.bincount(nearest, weights=p, minlength=s)
    objective = float(p @ d[np.arange(b), nearest])
    return PlanningResult(caps, RoutingPlan(r, heavy_traffic=True), objective, True)


def solve_routing_lp(
    probs: Sequence[float],
    delays: np.ndarray,
    capacities: Sequence[float],
    method: str = "auto",
) -> PlanningResult:
    """Transportation LP over x[m,k] = p_m r[m,k] with station shares mu_k / mu fixed.

    Infinite delays mark unreachable pairs. `method` is "simplex", "highs"
    or "auto" (dense tableau for small instances).
    """
    p = np.asarray(probs, dtype=float)
    d = np.asarray(delays, dtype=float)
    caps = np.asarray(capacities, dtype=float)
    b, s = d.shape
    for k, mu_k in enumerate(caps):
        if mu_k < 0:
            raise InfeasiblePlanError(k, f"station {k + 1} has negative capacity {mu_k}")
    shares = caps / caps.sum()

    pairs = [(m, k) for m in range(b) for k in range(s) if np.isfinite(d[m, k])]
    cost = np.array([d[m, k] for m, k in pairs])
    A = np.zeros((b + s, len(pairs)))
    for j, (m, k) in enumerate(pairs):
        A[m, j] = 1.0
        A[b + k, j] = 1.0
    rhs = np.concatenate([p, shares])

    if method == "auto":
        method = "simplex" if len(pairs) <= DENSE_LIMIT else "highs"
    if method == "simplex":
        try:
            x = simplex_min(cost, A, rhs).x
        except Infeasible as exc:
            station = _short_station(exc.residual[b:])
            raise InfeasiblePlanError(
                station, f"station {station + 1} cannot receive its capacity share {shares[station]:.6g}"
            ) from exc
    elif method == "highs":
        res = linprog(cost, A_eq=A, b_eq=rhs, bounds=(0, None), method="highs", options=HIGHS_OPTIONS)
        if res.status == 2:
            station = _short_station(_highs_shortfall(A, rhs, b))
            raise InfeasiblePlanError(
                station, f"station {station + 1} cannot receive its capacity share {shares[station]:.6g}"
            )
        if res.status != 0:
            raise PlanningError(f"routing LP failed: {res.message}")
        x = res.x
    else:
        raise PlanningError(f"unknown LP method {method!r}")

    r = np.zeros((b, s))
    for j, (m, k) in enumerate(pairs):
        if p[m] > 0:
            r[m, k] = x[j] / p[m]
    r = np.clip(r, 0.0, 1.0)
    sums = r.sum(axis=1, keepdims=True)
    r = np.divide(r, sums, out=r, where=sums > 0)
    objective = plan_objective(p, d, r)
    return PlanningResult(caps, RoutingPlan(r, heavy_traffic=True), objective, is_gbc(r, d))


def _short_station(station_residual: np.ndarray) -> int:
    return int(np.argmax(station_residual))


def _highs_shortfall(A: np.ndarray, rhs: np.ndarray, b: int) -> np.ndarray:
    # phase-one style relaxation: minimize unmet station demand
    n = A.shape[1]
    s = A.shape[0] - b
    slack = np.vstack([np.zeros((b, s)), np.eye(s)])
    res = linprog(
        np.concatenate([np.zeros(n), np.ones(s)]),
        A_eq=np.hstack([A, slack]),
        b_eq=rhs,
        bounds=(0, None),
        method="highs",
    )
    if res.status != 0:
        return np.zeros(s)
    return res.x[n:]


def plan_violations(
    plan: np.ndarray,
    probs: Sequence[float],
    mus: Sequence[float],
    tol: float = PLAN_TOL,
) -> list[str]:
    r = np.asarray(plan, dtype=float)
    p = np.asarray(probs, dtype=float)
    mus = np.asarray(mus, dtype=float)
    out = []
    if r.shape != (len(p), len(mus)):
        return [f"plan has shape {r.shape}, expected {(len(p), len(mus))}"]
    if np.any(r < -tol) or np.any(r > 1 + tol):
        out.append("plan entries must lie in [0, 1]")
    for m, total in enumerate(r.sum(axis=1)):
        if abs(total - 1.0) > tol:
            out.append(f"plan row for origin {m + 1} sums to {total:.12g}, not 1")
    mu = mus.sum()
    for k, routed in enumerate(p @ r):
        if abs(routed * mu - mus[k]) > tol:
            out.append(
                f"plan is not heavy-traffic consistent at station {k + 1}: "
                f"routes rate {routed * mu:.6g} but capacity is {mus[k]:.6g}"
            )
    return out


def drop_empty_stations(result: PlanningResult, delays: np.ndarray) -> tuple[PlanningResult, np.ndarray, list[int]]:
    """Remove zero-capacity stations from a planning result and the delay matrix."""
    keep = [k for k, mu_k in enumerate(result.capacities) if mu_k > PLAN_TOL]
    dropped = [k for k in range(len(result.capacities)) if k not in keep]
    for k in dropped:
        logger.warning("station %d gets no capacity and is dropped", k + 1)
    r = result.plan.r[:, keep]
    trimmed = PlanningResult(
        result.capacities[keep], RoutingPlan(r, result.plan.heavy_traffic), result.objective, result.gbc
    )
    return trimmed, np.asarray(delays)[:, keep], dropped


def random_feasible_plan(probs: Sequence[float], mus: Sequence[float], rng: np.random.Generator) -> np.ndarray:
    """A random heavy-traffic-consistent plan, via the LP with random costs."""
    p = np.asarray(probs, dtype=float)
    s = len(mus)
    costs = rng.random((len(p), s))
    return solve_routing_lp(p, costs, mus).plan.r
