from __future__ import annotations

from bisect import bisect_right
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from ..engine.types import PolicyKind, PolicySpec, TieRule, ToleranceMode
from .perturbation import (
    PerturbationError,
    aware_perturbations,
    default_perturbation,
    destination_aware,
    destination_unaware,
)
from .ranking import QueueSnapshot, Ranking, rank

Uniform = Callable[[], float]


def nearest_station(delays: Sequence[float]) -> int:
    return int(np.argmin(delays))


def destination_jsq(
    snapshot: QueueSnapshot,
    tie_rule: TieRule = TieRule.LOWEST_INDEX,
    uniform: Optional[Uniform] = None,
) -> int:
    return rank(snapshot, tie_rule, uniform).zeta[0]


def destination_tolerance_geo(
    delays: Sequence[float],
    snapshot: QueueSnapshot,
    tau_bar: float,
    mode: ToleranceMode = ToleranceMode.DETERMINISTIC,
    chi: float = 0.0,
    border_mass: Optional[Sequence[float]] = None,
    u: Optional[float] = None,
    tie_rule: TieRule = TieRule.LOWEST_INDEX,
    uniform: Optional[Uniform] = None,
) -> int:
    """Nearest station unless the shortest queue is within `tau_bar` extra minutes.

    `delays` are the customer's traveling delays from its location. In
    probabilistic mode a border customer goes to the shortest queue with
    probability chi / p'_l instead of always.
    """
    shortest = destination_jsq(snapshot, tie_rule, uniform)
    near = nearest_station(delays)
    if shortest == near:
        return near
    if delays[shortest] > delays[near] + tau_bar:
        return near
    if mode is ToleranceMode.DETERMINISTIC:
        return shortest
    if border_mass is None or u is None:
        raise ValueError("probabilistic tolerance needs border masses and a uniform draw")
    return shortest if u < chi / border_mass[shortest] else near


class Dispatcher:
    """Picks a destination from the current counts; one call per appearing customer."""

    draws_uniform = False

    def __init__(self, mus: Sequence[float], tie_rule: TieRule, uniform: Uniform):
        self.mus = tuple(float(m) for m in mus)
        self.tie_rule = tie_rule
        self.uniform = uniform

    def snapshot(self, counts: Sequence[int]) -> QueueSnapshot:
        return QueueSnapshot.from_counts(counts, self.mus)

    def ranking(self, counts: Sequence[int]) -> Ranking:
        return rank(self.snapshot(counts), self.tie_rule, self.uniform)

    def __call__(self, counts: Sequence[int], origin: int, delays: Sequence[float]) -> int:
        raise NotImplementedError


class JSQDispatcher(Dispatcher):
    def __call__(self, counts, origin, delays):
        return destination_jsq(self.snapshot(counts), self.tie_rule, self.uniform)


class ProportionalDispatcher(Dispatcher):
    draws_uniform = True

    def __init__(self, mus, tie_rule, uniform):
        super().__init__(mus, tie_rule, uniform)
        self.kappa = list(np.cumsum(self.mus) / sum(self.mus))

    def __call__(self, counts, origin, delays):
        k = bisect_right(self.kappa, self.uniform())
        return min(k, len(self.kappa) - 1)


class UnawareDispatcher(Dispatcher):
    draws_uniform = True

    def __init__(self, mus, tie_rule, uniform, policy: PolicySpec):
        super().__init__(mus, tie_rule, uniform)
        self.scheme = policy.scheme or default_perturbation(len(self.mus), self.mus, policy.chi)

    def __call__(self, counts, origin, delays):
        u = self.uniform()
        return destination_unaware(u, self.ranking(counts), self.mus, self.scheme)


class AwareDispatcher(Dispatcher):
    draws_uniform = True

    def __init__(self, mus, tie_rule, uniform, policy: PolicySpec, probs: Sequence[float]):
        super().__init__(mus, tie_rule, uniform)
        if policy.plan is None:
            raise PerturbationError("origin-aware dispatch needs a routing plan")
        self.scheme = policy.scheme or default_perturbation(len(self.mus), self.mus, policy.chi)
        self.plan = np.asarray(policy.plan.r, dtype=float)
        self.probs = np.asarray(probs, dtype=float)
        self._cache: Dict[Tuple[int, ...], np.ndarray] = {}

    def perturbations(self, ranking: Ranking) -> np.ndarray:
        eps = self._cache.get(ranking.zeta)
        if eps is None:
            eps = aware_perturbations(ranking, self.plan, self.probs, self.scheme)
            self._cache[ranking.zeta] = eps
        return eps

    def __call__(self, counts, origin, delays):
        u = self.uniform()
        ranking = self.ranking(counts)
        eps = self.perturbations(ranking)
        return destination_aware(u, ranking, self.plan[origin], eps[origin])


class ToleranceDispatcher(Dispatcher):
    def __init__(self, mus, tie_rule, uniform, policy: PolicySpec):
        super().__init__(mus, tie_rule, uniform)
        self.tau_bar = policy.tau_bar
        self.mode = policy.tolerance_mode
        self.chi = policy.chi
        self.border_mass = policy.border_mass
        self.draws_uniform = self.mode is ToleranceMode.PROBABILISTIC

    def __call__(self, counts, origin, delays):
        u = self.uniform() if self.draws_uniform else None
        return destination_tolerance_geo(
            delays,
            self.snapshot(counts),
            self.tau_bar,
            self.mode,
            self.chi,
            self.border_mass,
            u,
            self.tie_rule,
            self.uniform,
        )


def build_dispatcher(
    policy: PolicySpec,
    mus: Sequence[float],
    probs: Sequence[float],
    uniform: Uniform,
) -> Dispatcher:
    kind = policy.kind
    if kind is PolicyKind.JSQ:
        return JSQDispatcher(mus, policy.tie_rule, uniform)
    if kind is PolicyKind.RANDOM_PROPORTIONAL:
        return ProportionalDispatcher(mus, policy.tie_rule, uniform)
    if kind is PolicyKind.RJSQ_UNAWARE:
        return UnawareDispatcher(mus, policy.tie_rule, uniform, policy)
    if kind is PolicyKind.RJSQ_AWARE:
        return AwareDispatcher(mus, policy.tie_rule, uniform, policy, probs)
    if kind is PolicyKind.TOLERANCE_GEO:
        return ToleranceDispatcher(mus, policy.tie_rule, uniform, policy)
    raise ValueError(f"unknown policy kind {kind}")
