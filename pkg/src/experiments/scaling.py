from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from scipy import stats

from ..engine.validator import ScenarioError, build_scenario, validate_scenario
from ..planning.heuristics import DEFAULT_C, capped, chi_log_quarter_root, chi_root_excess
from .config import set_path
from .metrics import EstimationError, load_imbalance_sup
from .runner import run_replications

logger = logging.getLogger(__name__)

CHI_RULES = ("fixed", "root_excess", "log_quarter_root")


@dataclass
class ScalingSpec:
    base: Dict[str, Any]
    n_grid: List[float]
    chi_rule: str = "log_quarter_root"
    c: float = DEFAULT_C
    chi: float = 0.0
    T: float = 10.0
    reps: int = 20

    @classmethod
    def from_tree(cls, tree: Dict[str, Any], reps: Optional[int] = None) -> "ScalingSpec":
        node = tree.get("scaling") or {}
        base = {k: v for k, v in tree.items() if k != "scaling"}
        return cls(
            base=base,
            n_grid=[float(n) for n in node.get("n_grid", [100, 400, 1600, 6400])],
            chi_rule=node.get("chi_rule", "log_quarter_root"),
            c=float(node.get("c", DEFAULT_C)),
            chi=float(node.get("chi", 0.0)),
            T=float(node.get("T", 10.0)),
            reps=int(reps if reps is not None else node.get("reps", 20)),
        )


@dataclass
class ScalingPoint:
    n: float
    rho: float
    chi: float
    median_scaled_imbalance: float
    scaled_imbalance: List[float] = field(default_factory=list)


@dataclass
class ScalingResult:
    chi_rule: str
    points: List[ScalingPoint]
    slope: float
    stderr: float
    intercept: float


def chi_for(spec: ScalingSpec, n: float, mus) -> float:
    if spec.chi_rule == "fixed":
        return capped(spec.chi, mus)
    if spec.chi_rule == "root_excess":
        return capped(chi_root_excess(1.0 - 1.0 / math.sqrt(n), spec.c), mus)
    if spec.chi_rule == "log_quarter_root":
        return capped(chi_log_quarter_root(n, spec.c), mus)
    raise ScenarioError(f"unknown chi rule {spec.chi_rule!r}; expected one of {', '.join(CHI_RULES)}")


def check_spec(spec: ScalingSpec) -> None:
    grid = spec.n_grid
    if len(grid) < 3:
        raise ScenarioError(f"scaling needs at least 3 values of n, got {len(grid)}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ScenarioError(f"n grid {grid} is not strictly increasing")
    if grid[0] <= 1:
        raise ScenarioError("every n must exceed 1")
    if spec.chi_rule not in CHI_RULES:
        raise ScenarioError(f"unknown chi rule {spec.chi_rule!r}")


def run_scaling(spec: ScalingSpec, parallel: int = 1) -> ScalingResult:
    """Median of sup-imbalance / sqrt(n) along the heavy-traffic sequence, and its log-log slope.

    System n runs at rho = 1 - 1/sqrt(n) for n * T minutes from empty, with
    the configured delays read as primitive values scaled by sqrt(n).
    """
    check_spec(spec)
    points: List[ScalingPoint] = []
    for n in spec.n_grid:
        rho = 1.0 - 1.0 / math.sqrt(n)
        traffic = {k: v for k, v in spec.base.get("traffic", {}).items() if k != "appearance_rate"}
        tree = set_path(spec.base, "traffic", {**traffic, "rho": rho, "n": n})
        tree = set_path(tree, "horizon", n * spec.T)
        tree = set_path(tree, "burnin", 0.0)
        tree = set_path(tree, "delays_scaled", True)
        tree.pop("sample_dt", None)
        draft = build_scenario(tree)
        chi = chi_for(spec, n, draft.mus)
        cfg = build_scenario(set_path(tree, "policy.chi", chi))
        cfg.scenario_id = f"{cfg.scenario_id}[n={n:g}]"
        problems = validate_scenario(cfg)
        if problems:
            raise ScenarioError(f"n={n:g}: " + "; ".join(problems))
        runs = run_replications(cfg, spec.reps, parallel)
        scaled = [load_imbalance_sup(s, cfg.mus) / math.sqrt(n) for s in runs]
        median = float(np.median(scaled))
        logger.info("n=%g rho=%.5f chi=%.5f: median scaled imbalance %.5f", n, rho, chi, median)
        points.append(ScalingPoint(n, rho, chi, median, scaled))

    valid = [p for p in points if p.median_scaled_imbalance > 0 and math.isfinite(p.median_scaled_imbalance)]
    if len(valid) < 3:
        raise EstimationError(f"only {len(valid)} points with positive imbalance; the fit needs 3")
    fit = stats.linregress(np.log([p.n for p in valid]), np.log([p.median_scaled_imbalance for p in valid]))
    return ScalingResult(spec.chi_rule, points, float(fit.slope), float(fit.stderr), float(fit.intercept))


def scaling_rows(result: ScalingResult):
    columns = ["n", "rho", "chi", "median_scaled_imbalance", "slope", "stderr"]
    rows = [[p.n, p.rho, p.chi, p.median_scaled_imbalance, result.slope, result.stderr] for p in result.points]
    return columns, rows
