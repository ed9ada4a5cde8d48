from __future__ import annotations

import csv
import json
import math
import os
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import numpy as np

from ..engine.records import TrajectoryRow
from ..engine.types import ScenarioConfig
from .metrics import Estimate

# bump when the column set changes
RESULTS_VERSION = 1
RESULTS_COLUMNS = ["scenario_id", "policy", "chi", "delay", "rho", "metric", "mean", "half_width", "reps"]


def fmt(x: Any) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return f"{x:.10g}"
    return str(x)


def scenario_delay(cfg: ScenarioConfig) -> float:
    """Mean traveling delay to the nearest station, in minutes."""
    if not cfg.origins:
        return math.nan
    d = cfg.delay_matrix()
    return float(cfg.probabilities @ d.min(axis=1))


def result_rows(cfg: ScenarioConfig, estimates: Dict[str, Estimate], reps: int) -> List[List[str]]:
    base = [cfg.scenario_id, cfg.policy.label, fmt(float(cfg.policy.chi)), fmt(scenario_delay(cfg)), fmt(float(cfg.traffic.rho))]
    return [
        base + [name, fmt(e.mean), fmt(e.half_width), str(reps)]
        for name, e in sorted(estimates.items())
    ]


def write_results(path: str, blocks: Iterable[Tuple[ScenarioConfig, Dict[str, Estimate], int]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RESULTS_COLUMNS)
        for cfg, estimates, reps in blocks:
            w.writerows(result_rows(cfg, estimates, reps))


def write_table(path: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_trajectory(path: str, rows: Sequence[TrajectoryRow], stations: int) -> None:
    columns = ["t"] + [f"Q_{k}" for k in range(1, stations + 1)] + [f"W_{k}" for k in range(1, stations + 1)] + ["U"]
    write_table(path, columns, rows)


def write_gap(path: str, rows: Sequence[Tuple[float, float]]) -> None:
    write_table(path, ["t", "gap"], rows)


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return fmt(obj)
    return obj


def write_json(path: str, data: Dict[str, Any]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_plain(data), f, ensure_ascii=False, indent=2)
