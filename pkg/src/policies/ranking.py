from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

from ..engine.types import TieRule


@dataclass(frozen=True)
class QueueSnapshot:
    """Customer counts seen by the dispatcher, in-service customer included."""

    counts: Tuple[int, ...]
    weighted: Tuple[float, ...]

    @classmethod
    def from_counts(cls, counts: Sequence[int], mus: Sequence[float]) -> "QueueSnapshot":
        return cls(
            counts=tuple(int(q) for q in counts),
            weighted=tuple(q / mu for q, mu in zip(counts, mus)),
        )


@dataclass(frozen=True)
class Ranking:
    """zeta[l] is the station holding rank l; pi[k] is the rank of station k (both 0-based)."""

    zeta: Tuple[int, ...]
    pi: Tuple[int, ...]

    @classmethod
    def from_order(cls, zeta: Sequence[int]) -> "Ranking":
        pi = [0] * len(zeta)
        for rank_pos, k in enumerate(zeta):
            pi[k] = rank_pos
        return cls(zeta=tuple(zeta), pi=tuple(pi))


def rank(
    snapshot: QueueSnapshot,
    tie_rule: TieRule = TieRule.LOWEST_INDEX,
    uniform: Optional[Callable[[], float]] = None,
) -> Ranking:
    weighted = snapshot.weighted
    s = len(weighted)
    if tie_rule is TieRule.RANDOM and len(set(weighted)) < s:
        if uniform is None:
            raise ValueError("random tie rule needs a uniform source")
        keys = [(weighted[k], uniform(), k) for k in range(s)]
        order = [k for _, _, k in sorted(keys)]
    else:
        order = sorted(range(s), key=lambda k: (weighted[k], k))
    return Ranking.from_order(order)
