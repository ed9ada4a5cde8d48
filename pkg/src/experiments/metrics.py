from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from ..engine.records import ReplicationSummary, SampleStats, TrajectoryRow, weighted_spread

CONFIDENCE = 0.95


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class Estimate:
    mean: float
    half_width: float
    count: int

    @property
    def interval(self) -> Tuple[float, float]:
        return self.mean - self.half_width, self.mean + self.half_width

    def covers(self, value: float) -> bool:
        lo, hi = self.interval
        return lo <= value <= hi


def _window(window: Optional[Tuple[float, float]], default: Tuple[float, float]) -> Tuple[float, float]:
    a, b = window if window is not None else default
    if not b > a:
        raise EstimationError(f"empty window [{a}, {b}]")
    return float(a), float(b)


def _pieces(rows: Sequence[TrajectoryRow], a: float, b: float):
    """(row, start, end) for every piece of the step path overlapping [a, b].

    Each row holds from its own time until the next row's; the last one
    holds until b.
    """
    for i, row in enumerate(rows):
        start = max(row[0], a)
        end = min(rows[i + 1][0], b) if i + 1 < len(rows) else b
        if end > start or (end == start and a <= row[0] <= b):
            yield row, start, end


def mtcc(
    source: Union[SampleStats, Sequence[TrajectoryRow]],
    window: Optional[Tuple[float, float]] = None,
    stations: Optional[int] = None,
) -> float:
    """Time-average of the total customer count over `window`.

    Trajectory rows are (t, Q_1..Q_s, ...); `stations` says how many count
    columns follow the time (all remaining columns when omitted).
    """
    if isinstance(source, SampleStats):
        if window is None or tuple(window) == tuple(source.window):
            _window(None, source.window)
            return source.time_avg_total_count
        if source.trajectory is None:
            raise EstimationError("a custom window needs a sampled trajectory")
        return mtcc(source.trajectory, window, stations)
    rows = list(source)
    if not rows:
        raise EstimationError("trajectory is empty")
    a, b = _window(window, (rows[0][0], rows[-1][0]))
    s = stations if stations is not None else len(rows[0]) - 1
    area = 0.0
    for row, start, end in _pieces(rows, a, b):
        area += sum(row[1 : 1 + s]) * (end - start)
    return area / (b - a)


def count_path(events: Sequence[Tuple[float, str, int, int]], stations: int) -> List[TrajectoryRow]:
    """Queue lengths after every event epoch, rebuilt from a recorded event log."""
    counts = [0] * stations
    rows: List[TrajectoryRow] = [(0.0, *counts)]
    for t, kind, _, k in events:
        if kind == "arrive":
            counts[k] += 1
        elif kind == "depart":
            counts[k] -= 1
        else:
            continue
        row = (float(t), *[float(q) for q in counts])
        # one row per epoch: the state once all its events are done
        if rows[-1][0] == row[0]:
            rows[-1] = row
        else:
            rows.append(row)
    return rows


def load_imbalance_sup(
    source: Union[SampleStats, Sequence[TrajectoryRow]],
    mus: Sequence[float],
    window: Optional[Tuple[float, float]] = None,
) -> float:
    """Largest spread of the weighted queues Q_k / mu_k over `window`.

    Queue lengths are piecewise constant, so over a path holding a row for
    every event epoch the supremum is a maximum over rows. Fixed-step
    samples (the `sample_dt` trajectory) only give a lower bound; a
    replication answers from its own event-level tracking, or from its
    recorded event log for a custom window.
    """
    s = len(mus)
    if isinstance(source, SampleStats):
        if window is None or tuple(window) == tuple(source.window):
            return source.imbalance_sup
        if source.events is None:
            raise EstimationError("a custom window needs a run with recorded events")
        return load_imbalance_sup(count_path(source.events, s), mus, window)
    rows = list(source)
    if not rows:
        return 0.0
    if window is None:
        selected = rows
    else:
        a, b = _window(window, window)
        selected = [row for row, _, _ in _pieces(rows, a, b)]
    return max((weighted_spread(row[1 : 1 + s], mus) for row in selected), default=0.0)


def oscillation_index(diffs: Sequence[float], dt: float, delay: float) -> float:
    """Periodicity score of a two-station queue difference sampled every `dt`.

    The score is the largest normalized autocorrelation at lags from half
    the traveling delay up to a quarter of the series, clipped to [0, 1].
    Delayed JSQ produces a strong peak near twice the delay; white noise
    stays near zero.
    """
    x = np.asarray(diffs, dtype=float)
    if dt <= 0:
        raise EstimationError("sampling interval must be positive")
    first = max(1, math.ceil(delay / 2.0 / dt))
    last = len(x) // 4
    if len(x) < 16 or last <= first:
        raise EstimationError(f"{len(x)} samples are too few for lags from {first}")
    x = x - x.mean()
    var = float(x @ x)
    if var == 0.0:
        return 0.0
    size = 1 << (2 * len(x) - 1).bit_length()
    spec = np.fft.rfft(x, size)
    acf = np.fft.irfft(spec * np.conj(spec), size)[: len(x)] / var
    # unbiased normalization keeps long lags comparable
    acf = acf * len(x) / (len(x) - np.arange(len(x)))
    return float(np.clip(acf[first : last + 1].max(), 0.0, 1.0))


def estimate(values: Iterable[float]) -> Estimate:
    v = np.sort(np.asarray([x for x in values if math.isfinite(x)], dtype=float))
    if v.size == 0:
        raise EstimationError("no finite values to estimate from")
    mean = math.fsum(v) / v.size
    if v.size < 2 or v[0] == v[-1]:
        return Estimate(mean, 0.0, int(v.size))
    sd = math.sqrt(math.fsum((v - mean) ** 2) / (v.size - 1))
    t = float(stats.t.ppf(0.5 + CONFIDENCE / 2.0, v.size - 1))
    return Estimate(mean, t * sd / math.sqrt(v.size), int(v.size))


def aggregate(summaries: Sequence[ReplicationSummary]) -> Dict[str, Estimate]:
    """Mean and 95% Student-t half-width per metric, independent of replication order."""
    if not summaries:
        raise EstimationError("nothing to aggregate")
    names: List[str] = sorted({name for s in summaries for name in s.values})
    out: Dict[str, Estimate] = {}
    for name in names:
        try:
            out[name] = estimate(s.values.get(name, math.nan) for s in summaries)
        except EstimationError:
            continue
    return out


def aggregate_metrics(
    estimates: Dict[str, Estimate],
    reps: int,
    meta: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    out: Dict[str, Any] = dict(meta or {})
    out["reps"] = reps
    out["metrics"] = {
        name: {"mean": e.mean, "half_width": e.half_width, "count": e.count}
        for name, e in sorted(estimates.items())
    }
    return out
