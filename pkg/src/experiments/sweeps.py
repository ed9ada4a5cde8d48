from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..engine.types import ScenarioConfig
from ..engine.validator import ScenarioError, build_scenario, validate_scenario
from ..policies.perturbation import max_chi
from .config import set_path
from .metrics import Estimate, aggregate
from .runner import run_replications

logger = logging.getLogger(__name__)

VARIABLES = ("chi", "tau_bar", "delay", "rho", "n")
COARSE_STEP = 0.01
FINE_STEP = 0.002
FINE_SPAN = 0.01


@dataclass
class SweepSpec:
    base: Dict[str, Any]
    variable: str
    grid: List[float]
    reps: int = 10
    metric: str = "mtcc"
    refine: bool = False

    @classmethod
    def from_tree(cls, tree: Dict[str, Any], reps: Optional[int] = None) -> "SweepSpec":
        node = tree.get("sweep") or {}
        variable = node.get("variable", "chi")
        if "grid" in node:
            grid = [float(v) for v in node["grid"]]
        else:
            lo = float(node.get("start", 0.0))
            hi = float(node.get("stop", 0.5))
            step = float(node.get("step", COARSE_STEP))
            grid = [round(v, 10) for v in np.arange(lo, hi + step / 2, step)]
        base = {k: v for k, v in tree.items() if k != "sweep"}
        return cls(
            base=base,
            variable=variable,
            grid=grid,
            reps=int(reps if reps is not None else node.get("reps", 10)),
            metric=node.get("metric", "mtcc"),
            refine=bool(node.get("refine", False)),
        )


@dataclass
class SweepPoint:
    value: float
    cfg: ScenarioConfig
    estimates: Dict[str, Estimate]


@dataclass
class SweepResult:
    variable: str
    metric: str
    points: List[SweepPoint] = field(default_factory=list)

    @property
    def argmin(self) -> float:
        return self.best.value

    @property
    def best(self) -> SweepPoint:
        # ties go to the smaller value
        return min(self.points, key=lambda p: (p.estimates[self.metric].mean, p.value))


def scenario_at(base: Dict[str, Any], variable: str, value: float) -> ScenarioConfig:
    if variable == "chi":
        tree = set_path(base, "policy.chi", value)
    elif variable == "tau_bar":
        tree = set_path(base, "policy.tau_bar", value)
    elif variable == "delay":
        # one common delay for every origin-station pair
        tree = set_path(base, "origins", [{**o, "delays": [value] * len(o["delays"])} for o in base["origins"]])
    elif variable == "rho":
        traffic = {k: v for k, v in base.get("traffic", {}).items() if k not in ("appearance_rate", "n")}
        tree = set_path(base, "traffic", {**traffic, "rho": value})
    elif variable == "n":
        tree = set_path(base, "traffic.n", value)
    else:
        raise ScenarioError(f"unknown sweep variable {variable!r}; expected one of {', '.join(VARIABLES)}")
    cfg = build_scenario(tree)
    cfg.scenario_id = f"{cfg.scenario_id}[{variable}={value:g}]"
    problems = validate_scenario(cfg)
    if problems:
        raise ScenarioError(f"{variable}={value:g}: " + "; ".join(problems))
    return cfg


def _evaluate(spec: SweepSpec, values: Sequence[float], parallel: int) -> List[SweepPoint]:
    cfgs = [scenario_at(spec.base, spec.variable, v) for v in values]
    points = []
    for value, cfg in zip(values, cfgs):
        estimates = aggregate([s.summary() for s in run_replications(cfg, spec.reps, parallel)])
        if spec.metric not in estimates:
            raise ScenarioError(f"metric {spec.metric!r} is not produced by the simulator")
        logger.info("%s=%g: %s %.4f +- %.4f", spec.variable, value, spec.metric, estimates[spec.metric].mean, estimates[spec.metric].half_width)
        points.append(SweepPoint(value, cfg, estimates))
    return points


def run_sweep(spec: SweepSpec, parallel: int = 1) -> SweepResult:
    """Evaluate every grid point on common random numbers and report the argmin.

    Every point reuses the same seed and replication indices. With `refine`
    (balancing fraction only) a second pass of step 0.002 covers +-0.01
    around the coarse argmin.
    """
    if not spec.grid:
        raise ScenarioError("sweep grid is empty")
    if spec.variable not in VARIABLES:
        raise ScenarioError(f"unknown sweep variable {spec.variable!r}")
    grid = sorted(set(spec.grid))
    result = SweepResult(spec.variable, spec.metric, _evaluate(spec, grid, parallel))
    if spec.refine and spec.variable == "chi" and len(grid) > 1:
        center = result.argmin
        top = max_chi(result.points[0].cfg.mus)
        fine = np.arange(center - FINE_SPAN, center + FINE_SPAN + FINE_STEP / 2, FINE_STEP)
        seen = set(grid)
        extra = sorted({round(float(v), 10) for v in fine if 0.0 <= v <= top + 1e-12} - seen)
        result.points.extend(_evaluate(spec, extra, parallel))
        result.points.sort(key=lambda p: p.value)
    return result


def sweep_rows(result: SweepResult) -> Tuple[List[str], List[List[Any]]]:
    columns = [result.variable, "mean", "half_width", "reps", "argmin"]
    best = result.argmin
    rows = [
        [p.value, p.estimates[result.metric].mean, p.estimates[result.metric].half_width, p.estimates[result.metric].count, int(p.value == best)]
        for p in result.points
    ]
    return columns, rows
