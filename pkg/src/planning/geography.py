from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.integrate import quad
from shapely.geometry import LineString, MultiPoint, Point, Polygon, box
from shapely.ops import voronoi_diagram

from ..engine.types import GeographicSpec, OriginSpec


class GeometryError(ValueError):
    pass


@dataclass
class Boundary:
    """Stretch of the region where stations a and b are both nearest."""

    a: int
    b: int
    segments: List[Tuple[Tuple[float, float], Tuple[float, float]]]

    @property
    def length(self) -> float:
        return sum(math.dist(p, q) for p, q in self.segments)


def region_polygon(geo: GeographicSpec) -> Polygon:
    return box(*geo.region)


def station_zones(geo: GeographicSpec) -> List[Polygon]:
    """Voronoi cells of the stations clipped to the region, in station order."""
    region = region_polygon(geo)
    for x, y in geo.station_coords:
        if not region.covers(Point(x, y)):
            raise GeometryError(f"station at ({x}, {y}) lies outside the region")
    if len(geo.station_coords) == 1:
        return [region]
    cells = voronoi_diagram(MultiPoint(list(geo.station_coords)), envelope=region)
    zones: List[Polygon] = []
    # voronoi_diagram does not keep input order
    for x, y in geo.station_coords:
        site = Point(x, y)
        cell = next((c for c in cells.geoms if c.covers(site)), None)
        if cell is None:
            raise GeometryError(f"no Voronoi cell contains station ({x}, {y})")
        zones.append(cell.intersection(region))
    return zones


def zone_shares(geo: GeographicSpec) -> np.ndarray:
    areas = np.array([z.area for z in station_zones(geo)])
    return areas / geo.area


def capacities_from_zones(geo: GeographicSpec, mu_total: float) -> np.ndarray:
    return mu_total * zone_shares(geo)


def _half_plane(a: np.ndarray, b: np.ndarray, reach: float) -> Polygon:
    """Points at least as close to a as to b, within `reach` of their midpoint."""
    mid = (a + b) / 2.0
    n = (b - a) / np.linalg.norm(b - a)
    t = np.array([-n[1], n[0]])
    corners = [mid + reach * t, mid - reach * t, mid - reach * t - reach * n, mid + reach * t - reach * n]
    return Polygon([tuple(c) for c in corners])


def shared_boundaries(geo: GeographicSpec) -> List[Boundary]:
    pts = np.asarray(geo.station_coords, dtype=float)
    region = region_polygon(geo)
    x0, y0, x1, y1 = geo.region
    reach = 4.0 * math.hypot(x1 - x0, y1 - y0)
    out: List[Boundary] = []
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            mid = (pts[i] + pts[j]) / 2.0
            n = (pts[j] - pts[i]) / np.linalg.norm(pts[j] - pts[i])
            t = np.array([-n[1], n[0]])
            piece = LineString([tuple(mid - reach * t), tuple(mid + reach * t)]).intersection(region)
            for other in range(len(pts)):
                if other in (i, j) or piece.is_empty:
                    continue
                piece = piece.intersection(_half_plane(pts[i], pts[other], reach))
            segments = _segments(piece)
            if segments:
                out.append(Boundary(i, j, segments))
    return out


def _segments(geom) -> List[Tuple[Tuple[float, float], Tuple[float, float]]]:
    if geom.is_empty:
        return []
    if geom.geom_type == "LineString":
        coords = list(geom.coords)
        return [
            (tuple(p), tuple(q)) for p, q in zip(coords, coords[1:]) if math.dist(p, q) > 1e-12
        ]
    if hasattr(geom, "geoms"):
        out = []
        for g in geom.geoms:
            out.extend(_segments(g))
        return out
    return []


def boundary_length(geo: GeographicSpec) -> float:
    return sum(b.length for b in shared_boundaries(geo))


def mean_boundary_distance(geo: GeographicSpec) -> float:
    """Mean distance from the zone boundaries to the stations they separate (km)."""
    pts = np.asarray(geo.station_coords, dtype=float)
    total = 0.0
    length = 0.0
    for bnd in shared_boundaries(geo):
        sx, sy = pts[bnd.a]
        for p, q in bnd.segments:
            seg = math.dist(p, q)
            value, _ = quad(
                lambda u: math.hypot(p[0] + u * (q[0] - p[0]) - sx, p[1] + u * (q[1] - p[1]) - sy),
                0.0,
                1.0,
            )
            total += value * seg
            length += seg
    if length == 0.0:
        raise GeometryError("stations share no boundary inside the region")
    return total / length


def discretize(geo: GeographicSpec, grid: int | None = None) -> List[OriginSpec]:
    """Uniform origin law as grid-cell centers; origin index is ix * grid + iy."""
    g = grid or geo.grid
    x0, y0, x1, y1 = geo.region
    xs = x0 + (np.arange(g) + 0.5) * (x1 - x0) / g
    ys = y0 + (np.arange(g) + 0.5) * (y1 - y0) / g
    p = 1.0 / (g * g)
    return [
        OriginSpec(probability=p, delays=tuple(float(d) for d in geo.delays_from(x, y)), scaled=False)
        for x in xs
        for y in ys
    ]


def uniform_points(geo: GeographicSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    x0, y0, x1, y1 = geo.region
    u = rng.random((count, 2))
    return np.column_stack([x0 + (x1 - x0) * u[:, 0], y0 + (y1 - y0) * u[:, 1]])


def point_delays(geo: GeographicSpec, points: np.ndarray) -> np.ndarray:
    pts = np.asarray(geo.station_coords, dtype=float)
    diff = points[:, None, :] - pts[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1]) / geo.speed
