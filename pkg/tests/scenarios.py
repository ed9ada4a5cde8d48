from __future__ import annotations

import copy
from typing import Any, Dict


GEOGRAPHY = {
    "region": [0.0, 0.0, 20.0, 20.0],
    "stations": [[5.0, 5.0], [5.0, 15.0], [15.0, 5.0]],
    "speed": 0.1,
}


def pair_tree(**changes: Any) -> Dict[str, Any]:
    """Two unit-rate stations fed from one origin."""
    tree: Dict[str, Any] = {
        "scenario_id": "pair",
        "seed": 42,
        "horizon": 2000.0,
        "burnin": 200.0,
        "traffic": {"rho": 0.9},
        "stations": [{"service_rate": 1.0}, {"service_rate": 1.0}],
        "origins": [{"probability": 1.0, "delays": [0.0, 0.0]}],
        "policy": {"kind": "rjsq_unaware", "chi": 0.0},
    }
    for key, value in changes.items():
        tree[key] = value
    return tree


def geo_tree(**changes: Any) -> Dict[str, Any]:
    tree: Dict[str, Any] = {
        "scenario_id": "geo",
        "seed": 3,
        "horizon": 2000.0,
        "burnin": 200.0,
        "mu_total": 4.0,
        "traffic": {"appearance_rate": 3.96},
        "geography": copy.deepcopy(GEOGRAPHY),
        "policy": {"kind": "tolerance_geo", "tau_bar": 16.0},
    }
    tree.update(changes)
    return tree
