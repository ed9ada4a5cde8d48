from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..engine.validator import ScenarioError, build_scenario, validate_scenario
from ..planning.heuristics import DEFAULT_C, heuristic_chi
from ..policies.perturbation import max_chi
from .metrics import Estimate, aggregate
from .runner import run_replications
from .sweeps import COARSE_STEP, SweepSpec, run_sweep

logger = logging.getLogger(__name__)

HORIZON = 2e5
BURNIN = 6e4

# balancing fractions that minimized the mean total count in long reference runs
TWO_STATION_CHI_OPT: Dict[Tuple[float, float], float] = {
    (0.90, 0): 0.500, (0.90, 1): 0.500, (0.90, 5): 0.184, (0.90, 10): 0.121, (0.90, 20): 0.078, (0.90, 100): 0.022,
    (0.99, 0): 0.500, (0.99, 10): 0.138, (0.99, 50): 0.059, (0.99, 100): 0.042, (0.99, 200): 0.029, (0.99, 1000): 0.012,
}
FIVE_STATION_CHI_OPT: Dict[Tuple[float, float], float] = {
    (0.90, 0): 0.800, (0.90, 1): 0.462, (0.90, 5): 0.184, (0.90, 10): 0.122, (0.90, 20): 0.078, (0.90, 100): 0.024,
    (0.99, 0): 0.800, (0.99, 10): 0.149, (0.99, 50): 0.064, (0.99, 100): 0.043, (0.99, 200): 0.030, (0.99, 1000): 0.012,
}
TOLERANCES = (0, 5, 10, 15, 16, 20, 25, 30, 35, 40, 45, 50, math.inf)
LOGNORMAL_VARIANCE = 3.0

GEOGRAPHY = {
    "region": [0.0, 0.0, 20.0, 20.0],
    "stations": [[5.0, 5.0], [5.0, 15.0], [15.0, 5.0]],
    "speed": 0.1,
}


@dataclass
class TableSpec:
    table_id: str
    reps: int = 500
    seed: int = 0
    horizon: float = HORIZON
    burnin: float = BURNIN
    sweep: bool = False
    c_star: float = DEFAULT_C
    c_dstar: float = DEFAULT_C


def balancing_tree(spec: TableSpec, stations: int, rho: float, delay: float, chi: float) -> Dict[str, Any]:
    return {
        "scenario_id": f"{spec.table_id}-rho{rho:g}-d{delay:g}-chi{chi:g}",
        "seed": spec.seed,
        "horizon": spec.horizon,
        "burnin": spec.burnin,
        "traffic": {"rho": rho},
        "stations": [{"service_rate": 1.0}] * stations,
        "origins": [{"probability": 1.0, "delays": [float(delay)] * stations}],
        "policy": {"kind": "rjsq_unaware", "chi": chi},
    }


def geographic_tree(spec: TableSpec, tau_bar: float, service: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "scenario_id": f"{spec.table_id}-tau{tau_bar:g}-{service['kind']}",
        "seed": spec.seed,
        "horizon": spec.horizon,
        "burnin": spec.burnin,
        "mu_total": 4.0,
        "service": service,
        "traffic": {"appearance_rate": 3.96},
        "geography": dict(GEOGRAPHY),
        "policy": {"kind": "tolerance_geo", "tau_bar": None if math.isinf(tau_bar) else float(tau_bar)},
    }


def evaluate(tree: Dict[str, Any], reps: int, parallel: int) -> Dict[str, Estimate]:
    cfg = build_scenario(tree)
    problems = validate_scenario(cfg)
    if problems:
        raise ScenarioError(f"{cfg.scenario_id}: " + "; ".join(problems))
    return aggregate([s.summary() for s in run_replications(cfg, reps, parallel)])


def _chi_opt(spec: TableSpec, stations: int, rho: float, delay: float, reference: Dict, parallel: int) -> float:
    if not spec.sweep:
        return reference[(rho, delay)]
    top = float(stations - 1) / stations
    steps = int(round(top / COARSE_STEP))
    sweep = SweepSpec(
        base=balancing_tree(spec, stations, rho, delay, 0.0),
        variable="chi",
        grid=[round(i * COARSE_STEP, 10) for i in range(steps + 1)],
        reps=spec.reps,
        refine=True,
    )
    return run_sweep(sweep, parallel).argmin


def balancing_table(spec: TableSpec, stations: int, reference: Dict, parallel: int = 1) -> Tuple[List[str], List[List[Any]]]:
    columns = ["rho", "delay", "chi_opt", "cc_opt", "cc_opt_hw", "chi_star", "cc_star", "cc_star_hw",
               "chi_dstar", "cc_dstar", "cc_dstar_hw", "cc_zero", "cc_zero_hw", "chi_max", "cc_max", "cc_max_hw"]
    mus = [1.0] * stations
    top = max_chi(mus)
    rows: List[List[Any]] = []
    for rho, delay in sorted(reference):
        chi_opt = _chi_opt(spec, stations, rho, delay, reference, parallel)
        chi_star = heuristic_chi("root_excess", mus, rho, c=spec.c_star)
        chi_dstar = heuristic_chi("reciprocal_root", mus, rho, delay=delay, c=spec.c_dstar)
        row: List[Any] = [rho, delay]
        for chi in (chi_opt, chi_star, chi_dstar):
            est = evaluate(balancing_tree(spec, stations, rho, delay, chi), spec.reps, parallel)["mtcc"]
            row += [chi, est.mean, est.half_width]
        zero = evaluate(balancing_tree(spec, stations, rho, delay, 0.0), spec.reps, parallel)["mtcc"]
        full = evaluate(balancing_tree(spec, stations, rho, delay, top), spec.reps, parallel)["mtcc"]
        row += [zero.mean, zero.half_width, top, full.mean, full.half_width]
        logger.info("%s rho=%g delay=%g done", spec.table_id, rho, delay)
        rows.append(row)
    return columns, rows


def geographic_table(spec: TableSpec, parallel: int = 1, tolerances: Sequence[float] = TOLERANCES) -> Tuple[List[str], List[List[Any]]]:
    services = (("exp", {"kind": "exponential"}), ("logn", {"kind": "lognormal", "variance": LOGNORMAL_VARIANCE}))
    columns = ["tau_bar"]
    for tag, _ in services:
        columns += [f"{tag}_chi", f"{tag}_delay", f"{tag}_wait", f"{tag}_wait_hw", f"{tag}_tts", f"{tag}_tts_hw"]
    rows: List[List[Any]] = []
    for tau in tolerances:
        row: List[Any] = [float(tau)]
        for _, service in services:
            est = evaluate(geographic_tree(spec, tau, service), spec.reps, parallel)
            wait, tts = est["mean_wait"], est["mean_time_to_service"]
            row += [est["emergent_chi"].mean, est["mean_travel"].mean, wait.mean, wait.half_width, tts.mean, tts.half_width]
        logger.info("%s tau_bar=%g done", spec.table_id, tau)
        rows.append(row)
    return columns, rows


def run_table(spec: TableSpec, parallel: int = 1) -> Tuple[List[str], List[List[Any]]]:
    if spec.table_id == "two_station":
        return balancing_table(spec, 2, TWO_STATION_CHI_OPT, parallel)
    if spec.table_id == "five_station":
        return balancing_table(spec, 5, FIVE_STATION_CHI_OPT, parallel)
    if spec.table_id == "geographic":
        return geographic_table(spec, parallel)
    raise ScenarioError(f"unknown table {spec.table_id!r}; expected two_station, five_station or geographic")


def scaled_reps(table_id: str, scale: Optional[float], reps: Optional[int]) -> int:
    """Replication count from an explicit value or a fraction of the reference count."""
    if reps is not None:
        return reps
    if scale is None:
        return 500
    reference = {"two_station": 20_000, "five_station": 20_000, "geographic": 5_000}.get(table_id, 500)
    return max(2, math.ceil(reference * scale))
