from __future__ import annotations

import copy
import os
from typing import Any, Dict, Iterable, Optional

import yaml


def load_config(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ValueError("config must be a YAML mapping")
    return data


def apply_overrides(tree: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """Return a copy of `tree` with `a.b.c=value` assignments applied.

    Values go through yaml.safe_load, so `0.05`, `true` and `[1, 2]` keep
    their types; a numeric path component indexes into a list.
    """
    out = copy.deepcopy(tree)
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key.path=value")
        key, raw = item.split("=", 1)
        _assign(out, key, yaml.safe_load(raw))
    return out


def set_path(tree: Dict[str, Any], key: str, value: Any) -> Dict[str, Any]:
    out = copy.deepcopy(tree)
    _assign(out, key, value)
    return out


def _assign(tree: Dict[str, Any], key: str, value: Any) -> None:
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ValueError(f"override key {key!r} is empty")
    node: Any = tree
    for part in parts[:-1]:
        if isinstance(node, list):
            node = node[int(part)]
        else:
            node = node.setdefault(part, {})
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value
