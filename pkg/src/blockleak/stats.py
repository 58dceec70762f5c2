"""Membership test and bit classification on RTT samples."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, Union

EXACT_MAX_N = 25  # combined sample size up to which U p-values are enumerated


class StatsError(ValueError):
    pass


class InsufficientSamples(StatsError):
    pass


class EmptySeries(StatsError):
    pass


class DegenerateThresholds(StatsError):
    """Closed and open 5th percentiles coincide; thresholds need recalibrating."""


@dataclass(frozen=True)
class RttSeries:
    """Timing samples (ms) for one measured account, in arrival order."""

    samples: tuple[float, ...]
    source: object = None

    def __init__(self, samples: Iterable[float], source: object = None):
        values = tuple(float(x) for x in samples)
        if any(not x > 0 or math.isinf(x) for x in values):
            raise ValueError("RTT samples must be finite and positive")
        object.__setattr__(self, "samples", values)
        object.__setattr__(self, "source", source)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[float]:
        return iter(self.samples)

    def percentile(self, q: float = 0.05) -> float:
        return percentile(self, q)


SeriesLike = Union[RttSeries, Sequence[float]]


@dataclass(frozen=True)
class CalibrationThresholds:
    c05: float
    o05: float

    def __post_init__(self) -> None:
        for name in ("c05", "o05"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive, got {v}")

    @property
    def gap(self) -> float:
        return abs(self.c05 - self.o05)


@dataclass(frozen=True)
class DecisionConfig:
    k0: int = 30
    k: int = 30
    alpha: float = 0.01
    percentile_q: float = 0.05

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.k0 < 2:
            raise ValueError("k0 must be >= 2")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 < self.percentile_q < 1:
            raise ValueError("percentile_q must lie in (0, 1)")


@dataclass(frozen=True)
class UTestResult:
    u_statistic: float
    p_value: float
    significant: bool
    exact: bool = field(default=False, compare=False)


def _values(series: SeriesLike) -> list[float]:
    return list(series.samples if isinstance(series, RttSeries) else series)


def midranks(values: Sequence[float]) -> list[float]:
    """1-based ranks with ties sharing their average rank."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    return ranks


def _exact_two_sided(doubled_ranks: Sequence[int], n1: int, observed: int) -> float:
    """P(|2W - 2E| >= |observed - 2E|) over all equally likely rank splits.

    doubled_ranks are twice the pooled midranks (integers even under ties),
    observed is twice the rank sum of the first sample.
    """
    n = len(doubled_ranks)
    center = n1 * (n + 1)  # 2 * E[W]
    # counts[j] maps doubled-rank-sum -> number of j-subsets
    counts: list[dict[int, int]] = [dict() for _ in range(n1 + 1)]
    counts[0][0] = 1
    for r in doubled_ranks:
        for j in range(n1, 0, -1):
            prev = counts[j - 1]
            cur = counts[j]
            for s, c in prev.items():
                cur[s + r] = cur.get(s + r, 0) + c
    dev = abs(observed - center)
    hits = sum(c for s, c in counts[n1].items() if abs(s - center) >= dev)
    return hits / math.comb(n, n1)


def mann_whitney_u(a: SeriesLike, b: SeriesLike, alpha: float = 0.01) -> UTestResult:
    """Two-sided Mann-Whitney U test.

    Exact permutation p-value when len(a) + len(b) <= 25 (ties handled by
    enumerating the midrank sums), otherwise the normal approximation with
    tie and continuity corrections.
    """
    x, y = _values(a), _values(b)
    n1, n2 = len(x), len(y)
    if n1 < 2 or n2 < 2:
        raise InsufficientSamples(f"need >= 2 samples per group, got {n1} and {n2}")
    n = n1 + n2
    ranks = midranks(x + y)
    rank_sum = sum(ranks[:n1])
    u1 = rank_sum - n1 * (n1 + 1) / 2

    if n <= EXACT_MAX_N:
        doubled = [round(2 * r) for r in ranks]
        p = _exact_two_sided(doubled, n1, round(2 * rank_sum))
        exact = True
    else:
        tie_term = 0
        i = 0
        sorted_ranks = sorted(ranks)
        while i < n:
            j = i
            while j + 1 < n and sorted_ranks[j + 1] == sorted_ranks[i]:
                j += 1
            t = j - i + 1
            tie_term += t**3 - t
            i = j + 1
        var = n1 * n2 / 12 * ((n + 1) - tie_term / (n * (n - 1)))
        if var <= 0:
            p = 1.0
        else:
            z = (abs(u1 - n1 * n2 / 2) - 0.5) / math.sqrt(var)
            p = 1.0 if z <= 0 else math.erfc(z / math.sqrt(2))
        exact = False
    p = min(1.0, max(0.0, p))
    return UTestResult(u1, p, p < alpha, exact)


def percentile(series: SeriesLike, q: float = 0.05) -> float:
    """Nearest-rank percentile: the ceil(q*n)-th smallest sample."""
    values = _values(series)
    if not values:
        raise EmptySeries("percentile of an empty series")
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    # round() guards against 0.05 * 60 == 3.0000000000000004
    rank = max(1, math.ceil(round(q * len(values), 9)))
    return sorted(values)[rank - 1]


@dataclass(frozen=True)
class MembershipResult:
    member: bool
    thresholds: CalibrationThresholds
    test: UTestResult


def membership_test(
    closed: SeriesLike, open_: SeriesLike, cfg: DecisionConfig
) -> MembershipResult:
    """Is the visitor on the target list? Also derives the bit thresholds."""
    for name, s in (("closed", closed), ("open", open_)):
        if len(s) != cfg.k0:
            raise InsufficientSamples(f"{name} series has {len(s)} samples, need k0={cfg.k0}")
    test = mann_whitney_u(closed, open_, cfg.alpha)
    thresholds = CalibrationThresholds(
        percentile(closed, cfg.percentile_q), percentile(open_, cfg.percentile_q)
    )
    if test.significant and thresholds.c05 == thresholds.o05:
        raise DegenerateThresholds(f"c05 == o05 == {thresholds.c05}")
    return MembershipResult(test.significant, thresholds, test)


def classify_bit(
    series: SeriesLike, thresholds: CalibrationThresholds, q: float = 0.05
) -> int:
    """1 (blocked) iff the series' low percentile is strictly nearer to c05."""
    if thresholds.c05 == thresholds.o05:
        raise DegenerateThresholds("cannot classify with c05 == o05")
    r = percentile(series, q)
    return int(abs(r - thresholds.c05) < abs(r - thresholds.o05))


def estimate_bits(
    per_account_series: Sequence[SeriesLike],
    thresholds: CalibrationThresholds,
    q: float = 0.05,
) -> tuple[int, ...]:
    return tuple(classify_bit(s, thresholds, q) for s in per_account_series)
