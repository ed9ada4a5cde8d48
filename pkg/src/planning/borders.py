from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from ..engine.types import GeographicSpec, OriginSpec
from ..stochastics.streams import Purpose, StreamLabel, derive_stream
from .capacity import PlanningError
from .geography import boundary_length, point_delays, uniform_points

logger = logging.getLogger(__name__)

BorderSource = Union[GeographicSpec, Sequence[OriginSpec]]


@dataclass
class BorderStructure:
    """Zones (nearest station per origin) and tolerance borders.

    `border[m, k]` marks origin m as a member of N'_k: not in zone k, yet at
    most tau_bar minutes farther from k than from its nearest station.
    """

    tau_bar: float
    zone: np.ndarray
    border: np.ndarray
    probs: np.ndarray

    @property
    def p_prime(self) -> np.ndarray:
        return self.probs @ self.border

    @property
    def border_mass(self) -> float:
        return float(self.p_prime.sum())

    def members(self, k: int) -> List[int]:
        return [int(m) for m in np.flatnonzero(self.border[:, k])]


def borders_from_delays(probs: Sequence[float], delays: np.ndarray, tau_bar: float) -> BorderStructure:
    if tau_bar < 0:
        raise PlanningError(f"tau_bar={tau_bar} must be nonnegative")
    d = np.asarray(delays, dtype=float)
    zone = np.argmin(d, axis=1)
    best = d[np.arange(len(d)), zone]
    border = d <= best[:, None] + tau_bar
    border[np.arange(len(d)), zone] = False
    return BorderStructure(tau_bar, zone, border, np.asarray(probs, dtype=float))


def build_borders(
    source: BorderSource,
    tau_bar: float,
    samples: int = 1_000_000,
    seed: int = 0,
    warn_empty: bool = True,
) -> BorderStructure:
    """Zones and borders for discrete origins, or for a uniform region by Monte Carlo."""
    if isinstance(source, GeographicSpec):
        rng = derive_stream(seed, StreamLabel(Purpose.LOCATION_DRAW, 0))
        pts = uniform_points(source, samples, rng)
        result = borders_from_delays(np.full(samples, 1.0 / samples), point_delays(source, pts), tau_bar)
    else:
        probs = [o.probability for o in source]
        delays = np.array([o.delays for o in source], dtype=float)
        result = borders_from_delays(probs, delays, tau_bar)
    if warn_empty and tau_bar > 0:
        for k, mass in enumerate(result.p_prime):
            if mass <= 0:
                logger.warning("border of station %d is empty at tau_bar=%g", k + 1, tau_bar)
    return result


def border_area(
    geo: GeographicSpec,
    tau_bar: float,
    model: str = "band",
    samples: int = 200_000,
    seed: int = 0,
) -> float:
    """Area (km^2) of the border regions, counted once per station they border.

    "band" treats each zone boundary as a strip of width speed * tau_bar;
    "exact" measures the border sets by Monte Carlo.
    """
    s = len(geo.station_coords)
    cap = geo.area * (s - 1)
    if tau_bar <= 0:
        return 0.0
    if math.isinf(tau_bar):
        return cap
    if model == "band":
        return min(cap, geo.speed * tau_bar * boundary_length(geo))
    if model == "exact":
        borders = build_borders(geo, tau_bar, samples=samples, seed=seed, warn_empty=False)
        return borders.border_mass * geo.area
    raise PlanningError(f"unknown border-area model {model!r}")


def tau_from_chi(
    geo: GeographicSpec,
    chi_target: float,
    model: str = "band",
    tol: float = 1e-4,
    round_to: Optional[float] = None,
    samples: int = 200_000,
    seed: int = 0,
) -> float:
    """Tolerance whose border area equals region area * s * chi_target.

    A border customer is diverted only when the other station has the
    shortest queue, roughly one time in s.
    """
    if chi_target < 0:
        raise PlanningError("chi_target must be nonnegative")
    if chi_target == 0:
        return 0.0
    s = len(geo.station_coords)
    target = geo.area * s * chi_target
    x0, y0, x1, y1 = geo.region
    hi = math.hypot(x1 - x0, y1 - y0) / geo.speed
    if model == "exact":
        # fixed points keep the estimated area monotone in tau_bar
        rng = derive_stream(seed, StreamLabel(Purpose.LOCATION_DRAW, 0))
        delays = point_delays(geo, uniform_points(geo, samples, rng))
        probs = np.full(samples, 1.0 / samples)

        def area(tau: float) -> float:
            return borders_from_delays(probs, delays, tau).border_mass * geo.area
    else:
        def area(tau: float) -> float:
            return border_area(geo, tau, model)

    if area(hi) < target:
        raise PlanningError(
            f"chi_target={chi_target:.4g} needs border area {target:.4g} km^2; "
            f"at most {area(hi):.4g} is available"
        )
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if area(mid) < target:
            lo = mid
        else:
            hi = mid
    tau = 0.5 * (lo + hi)
    if round_to:
        tau = round(tau / round_to) * round_to
    return tau
