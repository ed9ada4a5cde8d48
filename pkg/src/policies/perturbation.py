from __future__ import annotations

from bisect import bisect_right
from typing import List, Sequence

import numpy as np

from ..engine.types import PerturbationScheme
from .ranking import Ranking

EPS_TOL = 1e-12


class PerturbationError(ValueError):
    pass


def max_chi(mus: Sequence[float]) -> float:
    """Largest balancing fraction keeping every routing probability nonnegative."""
    mus = np.asarray(mus, dtype=float)
    return (len(mus) - 1) * float(mus.min()) / float(mus.sum())


def default_perturbation(s: int, mus: Sequence[float], chi: float) -> PerturbationScheme:
    if s < 2:
        raise PerturbationError("a perturbation scheme needs at least two stations")
    if chi < 0:
        raise PerturbationError(f"chi={chi} is negative")
    bound = max_chi(mus)
    if chi > bound + EPS_TOL:
        raise PerturbationError(
            f"chi={chi:.6g} exceeds {bound:.6g}: the lowest-ranked shares mu_k/mu + eps_l "
            "would turn negative"
        )
    eps = (chi,) + tuple(-chi / (s - 1) for _ in range(s - 1))
    return PerturbationScheme(chi=chi, eps=eps, delta0=1.0 / (s - 1))


def scheme_from_eps(eps: Sequence[float]) -> PerturbationScheme:
    eps_t = tuple(float(e) for e in eps)
    chi = eps_t[0]
    tail = [-e for e in eps_t[1:]]
    delta0 = min(tail) / chi if chi > 0 and tail else 0.0
    return PerturbationScheme(chi=chi, eps=eps_t, delta0=delta0)


def scheme_violations(mus: Sequence[float], scheme: PerturbationScheme) -> List[str]:
    mus = np.asarray(mus, dtype=float)
    shares = mus / mus.sum()
    eps = np.asarray(scheme.eps, dtype=float)
    out: List[str] = []
    if len(eps) != len(mus):
        return [f"perturbation has {len(eps)} entries for {len(mus)} stations"]
    if abs(eps.sum()) > 1e-9:
        out.append(f"perturbation entries sum to {eps.sum():.3g}, not 0")
    if eps[0] < 0:
        out.append("rank-1 perturbation must be nonnegative")
    if np.any(eps[1:] > 0):
        out.append("perturbations below rank 1 must be nonpositive")
    low = shares.min() + eps.min()
    high = shares.max() + eps.max()
    if low < -1e-9 or high > 1 + 1e-9:
        out.append(
            f"chi={scheme.chi:.6g} pushes a routing probability outside [0,1] "
            f"(largest admissible chi is {max_chi(mus):.6g})"
        )
    return out


def _pick(u: float, kappa: Sequence[float]) -> int:
    k = bisect_right(kappa, u)
    return min(k, len(kappa) - 1)


def kappa_unaware(ranking: Ranking, mus: Sequence[float], scheme: PerturbationScheme) -> List[float]:
    mu = float(sum(mus))
    acc = 0.0
    out = []
    for k, mu_k in enumerate(mus):
        acc += mu_k / mu + scheme.eps[ranking.pi[k]]
        out.append(acc)
    return out


def destination_unaware(
    u: float, ranking: Ranking, mus: Sequence[float], scheme: PerturbationScheme
) -> int:
    return _pick(u, kappa_unaware(ranking, mus, scheme))


def aware_perturbations(
    ranking: Ranking,
    plan: np.ndarray,
    probs: Sequence[float],
    scheme: PerturbationScheme,
) -> np.ndarray:
    """Per-origin perturbations, rows indexed by origin and columns by rank.

    Each rank below the first draws its deficit -eps_l from the origins by
    water-filling: every origin gives up the same amount x, capped by its
    routing probability to the station holding that rank. Rank 1 collects
    the sum, so rows sum to zero and p-weighted columns return eps exactly.
    """
    r = np.asarray(plan, dtype=float)
    p = np.asarray(probs, dtype=float)
    b, s = r.shape
    out = np.zeros((b, s))
    for rank_pos in range(1, s):
        need = -scheme.eps[rank_pos]
        if need <= 0:
            continue
        caps = r[:, ranking.zeta[rank_pos]]
        supply = float(p @ caps)
        if supply < need - 1e-12:
            raise PerturbationError(
                f"origins can release only {supply:.6g} of station {ranking.zeta[rank_pos] + 1}'s "
                f"share but rank {rank_pos + 1} needs {need:.6g}"
            )
        take = _water_fill(caps, p, need)
        out[:, rank_pos] = -take
    out[:, 0] = -out[:, 1:].sum(axis=1)
    return out


def _water_fill(caps: np.ndarray, p: np.ndarray, need: float) -> np.ndarray:
    active = (p > 0) & (caps > 0)
    order = np.argsort(np.where(active, caps, np.inf), kind="stable")
    mass = float(p[active].sum())
    remaining = need
    level = 0.0
    for m in order:
        if not active[m]:
            break
        # raising the common level to caps[m] releases (caps[m] - level) * mass
        step = (caps[m] - level) * mass
        if step >= remaining:
            level += remaining / mass
            break
        remaining -= step
        level = caps[m]
        mass -= p[m]
    take = np.where(active, np.minimum(caps, level), 0.0)
    # rounding residue goes to the last unsaturated origin
    residue = need - float(p @ take)
    for m in order[::-1]:
        if active[m] and take[m] < caps[m]:
            take[m] = min(caps[m], max(0.0, take[m] + residue / p[m]))
            break
    return take


def origin_perturbation(
    ranking: Ranking,
    origin: int,
    plan: np.ndarray,
    probs: Sequence[float],
    scheme: PerturbationScheme,
) -> np.ndarray:
    return aware_perturbations(ranking, plan, probs, scheme)[origin]


def destination_aware(
    u: float, ranking: Ranking, plan_row: Sequence[float], eps_m: Sequence[float]
) -> int:
    acc = 0.0
    kappa = []
    for k, r_mk in enumerate(plan_row):
        acc += r_mk + eps_m[ranking.pi[k]]
        kappa.append(acc)
    return _pick(u, kappa)
