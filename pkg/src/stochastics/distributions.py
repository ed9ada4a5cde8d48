from __future__ import annotations

import math
from typing import Tuple

import numpy as np

from ..engine.types import DistDescriptor, DistKind
from .streams import Sampler


class DistributionError(ValueError):
    pass


def lognormal_params(variance: float) -> Tuple[float, float]:
    """(mean, sigma) of the underlying normal for a mean-1 lognormal."""
    sigma2 = math.log1p(variance)
    return -sigma2 / 2.0, math.sqrt(sigma2)


def hyperexponential_params(scv: float) -> Tuple[float, float, float]:
    """Balanced-means two-phase fit: (p, rate1, rate2) with mean 1."""
    p = 0.5 * (1.0 + math.sqrt((scv - 1.0) / (scv + 1.0)))
    return p, 2.0 * p, 2.0 * (1.0 - p)


def check(dist: DistDescriptor) -> None:
    v = dist.variance
    if not math.isfinite(v) or v < 0:
        raise DistributionError(f"{dist.kind.value}: variance {v} must be finite and >= 0")
    if dist.kind is DistKind.LOGNORMAL and v <= 0:
        raise DistributionError("lognormal variance must be positive")
    if dist.kind is DistKind.HYPEREXPONENTIAL and v < 1:
        raise DistributionError("hyperexponential needs squared CV >= 1")


def sampler(dist: DistDescriptor) -> Sampler:
    check(dist)
    kind = dist.kind
    if kind is DistKind.EXPONENTIAL:
        return lambda g, size: g.exponential(1.0, size)
    if kind is DistKind.DETERMINISTIC:
        return lambda g, size: np.ones(size)
    if kind is DistKind.LOGNORMAL:
        m, sigma = lognormal_params(dist.variance)
        return lambda g, size: g.lognormal(m, sigma, size)
    if kind is DistKind.HYPEREXPONENTIAL:
        p, rate1, rate2 = hyperexponential_params(dist.variance)

        def draw(g: np.random.Generator, size: int) -> np.ndarray:
            phase = g.random(size) < p
            return g.exponential(1.0, size) / np.where(phase, rate1, rate2)

        return draw
    raise DistributionError(f"unknown distribution kind {kind}")


def sample(dist: DistDescriptor, gen: np.random.Generator) -> float:
    return float(sampler(dist)(gen, 1)[0])


def moments(dist: DistDescriptor) -> Tuple[float, float]:
    check(dist)
    return 1.0, float(dist.variance)
