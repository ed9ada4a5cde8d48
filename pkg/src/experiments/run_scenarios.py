from __future__ import annotations

import argparse
import glob
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Any, Dict, List, Tuple

from ..engine.validator import ScenarioError, build_scenario, validate_scenario
from .config import load_config
from .export import write_json
from .runner import run_many

logger = logging.getLogger(__name__)


def run_one_scenario(path: str, reps: int, out_dir: str) -> Dict[str, Any]:
    cfg = build_scenario(load_config(path))
    problems = validate_scenario(cfg)
    if problems:
        raise ScenarioError(f"{path}: " + "; ".join(problems))
    return run_many(cfg, reps, out_dir)


def run_all_scenarios(scenarios_dir: str, out_base: str, reps: int = 10, workers: int = 4) -> Dict[str, Any]:
    os.makedirs(out_base, exist_ok=True)
    config_paths = sorted(glob.glob(os.path.join(scenarios_dir, "*.yaml")))
    if not config_paths:
        raise FileNotFoundError(f"No scenario configs found under {scenarios_dir}")

    results: List[Tuple[str, Dict[str, Any]]] = []
    failed: Dict[str, str] = {}
    # scenarios run in threads; each one replicates sequentially
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {}
        for path in config_paths:
            name = os.path.splitext(os.path.basename(path))[0]
            futures[pool.submit(run_one_scenario, path, reps, os.path.join(out_base, name))] = name
        for fut in as_completed(futures):
            name = futures[fut]
            try:
                results.append((name, fut.result()))
            except Exception as exc:
                logger.error("scenario %s failed: %s", name, exc)
                failed[name] = str(exc)

    per_scenario: Dict[str, Any] = {}
    for name, m in sorted(results):
        mtcc = m["metrics"].get("mtcc", {})
        per_scenario[name] = {
            "policy": m.get("policy"),
            "chi": m.get("chi"),
            "mtcc": mtcc.get("mean"),
            "mtcc_half_width": mtcc.get("half_width"),
            "reps": m.get("reps"),
        }

    summary = {
        "scenarios": len(config_paths),
        "completed": len(results),
        "failed": dict(sorted(failed.items())),
        "per_scenario": per_scenario,
    }
    write_json(os.path.join(out_base, "summary.json"), summary)
    return summary


def main() -> None:
    parser = argparse.ArgumentParser(description="Run every scenario file in a directory and summarize mean total counts")
    parser.add_argument("--scenarios_dir", default="experiments/scenarios", help="Directory of scenario YAML configs")
    parser.add_argument("--out_base", default=os.getenv("RJSQ_OUT_DIR", "runs"), help="Base output directory")
    parser.add_argument("--reps", type=int, default=10, help="Replications per scenario")
    parser.add_argument("--workers", type=int, default=4, help="Concurrent scenarios")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    summary = run_all_scenarios(args.scenarios_dir, args.out_base, args.reps, args.workers)
    print(json.dumps(summary, ensure_ascii=False, indent=2))


if __name__ == "__main__":
    main()
