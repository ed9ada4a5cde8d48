from __future__ import annotations

import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..engine.types import GeographicSpec, OriginSpec
from ..policies.perturbation import max_chi
from ..stochastics.streams import Purpose, StreamLabel, derive_stream
from .borders import BorderStructure
from .capacity import PlanningError
from .geography import mean_boundary_distance, point_delays, uniform_points

DEFAULT_C = 0.4


def chi_root_excess(rho: float, c_star: float = DEFAULT_C) -> float:
    if not 0 < rho < 1:
        raise PlanningError(f"rho={rho} must lie in (0, 1)")
    return c_star * math.sqrt(1.0 - rho)


def chi_reciprocal_root(gamma_hat_min: float, c_dstar: float = DEFAULT_C) -> float:
    if gamma_hat_min <= 0:
        raise PlanningError("mean extra delay must be positive")
    return c_dstar / math.sqrt(gamma_hat_min)


def chi_reciprocal_root_delay(rho: float, d: float, c_dstar: float = DEFAULT_C) -> float:
    """Reciprocal-root rule with the extra delay taken as d / (1 - rho) minutes (d primitive)."""
    return chi_reciprocal_root(d / (1.0 - rho), c_dstar)


def chi_log_quarter_root(n: float, c: float = DEFAULT_C) -> float:
    """c * n^(-1/4) * sqrt(log n), the balancing fraction for the imbalance-order bound."""
    if n <= 1:
        raise PlanningError("n must exceed 1")
    return c * n ** -0.25 * math.sqrt(math.log(n))


def capped(chi: float, mus: Sequence[float]) -> float:
    return min(chi, max_chi(mus))


def heuristic_chi(
    rule: str,
    mus: Sequence[float],
    rho: float,
    delay: float = 0.0,
    c: float = DEFAULT_C,
) -> float:
    """Named rule evaluated and capped; zero delay falls back to JSQ's fraction.

    `delay` is the literal mean extra traveling delay in minutes.
    """
    top = max_chi(mus)
    if rule == "root_excess":
        return min(top, chi_root_excess(rho, c))
    if rule == "reciprocal_root":
        return top if delay <= 0 else min(top, chi_reciprocal_root(delay, c))
    if rule == "jsq":
        return top
    if rule == "random":
        return 0.0
    raise PlanningError(f"unknown balancing rule {rule!r}")


def mean_extra_delay(
    source: Union[Sequence[OriginSpec], GeographicSpec],
    mode: str,
    rho: float,
    borders: Optional[BorderStructure] = None,
    samples: int = 200_000,
    seed: int = 0,
) -> Tuple[float, float]:
    """(gamma_bar, gamma_hat): primitive mean delay of the additional customers and its minutes.

    Unaware mode averages every station's delay over the origin law; aware
    mode averages over each station's border, which for a region shrinks to
    the zone boundaries.
    """
    if mode not in ("unaware", "aware"):
        raise PlanningError(f"unknown mode {mode!r}")
    if isinstance(source, GeographicSpec):
        if mode == "aware":
            minutes = mean_boundary_distance(source) / source.speed
        else:
            rng = derive_stream(seed, StreamLabel(Purpose.LOCATION_DRAW, 0))
            d = point_delays(source, uniform_points(source, samples, rng))
            minutes = float(d.mean(axis=0).sum()) / d.shape[1]
        return minutes * (1.0 - rho), minutes

    if not source:
        raise PlanningError("no origins")
    p = np.array([o.probability for o in source], dtype=float)
    d = np.array([o.delays for o in source], dtype=float)
    scaled = source[0].scaled
    s = d.shape[1]
    if mode == "unaware":
        value = float(p @ d.sum(axis=1)) / s
    else:
        if borders is None:
            raise PlanningError("aware mode needs the border structure")
        pp = borders.p_prime
        if np.any(pp <= 0):
            empty = [k + 1 for k in np.flatnonzero(pp <= 0)]
            raise PlanningError(f"empty border at station(s) {empty}")
        value = float(sum((p * borders.border[:, k]) @ d[:, k] / pp[k] for k in range(s))) / s
    if scaled:
        return value, value / (1.0 - rho)
    return value * (1.0 - rho), value
