"""Simulation protocols behind the accuracy tables and the request/time curve."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .harness import TransportFactory, estimate_budget
from .planner import BlockPlan
from .rttsim import NO_FAULTS, WIRED, FaultSpec, NetworkEnv, ServiceProfile, sample_rtts
from .stats import (
    CalibrationThresholds,
    DecisionConfig,
    classify_bit,
    membership_test,
    percentile,
)
from .transports import SimulatedVisitor


@dataclass(frozen=True)
class RatePair:
    positive: float
    negative: float


def membership_accuracy(
    profile: ServiceProfile,
    k0: int = 30,
    trials: int = 100,
    seed: int = 0,
    env: NetworkEnv = WIRED,
    alpha: float = 0.01,
    faults: FaultSpec = NO_FAULTS,
) -> RatePair:
    """(TPR, TNR) of the membership test over `trials` target and non-target visits.

    A target sees closed=blocked, open=non-blocked; a non-target sees both
    references as non-blocked.
    """
    cfg = DecisionConfig(k0=k0, alpha=alpha)
    tp = tn = 0
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        closed = sample_rtts(profile, env, True, faults, rng, k0)
        open_ = sample_rtts(profile, env, False, faults, rng, k0)
        tp += membership_test(closed, open_, cfg).member
        closed_nt = sample_rtts(profile, env, False, faults, rng, k0)
        open_nt = sample_rtts(profile, env, False, faults, rng, k0)
        tn += not membership_test(closed_nt, open_nt, cfg).member
    return RatePair(tp / trials, tn / trials)


def single_bit_accuracy(
    profile: ServiceProfile,
    k: int,
    trials: int = 100,
    seed: int = 0,
    k0: int = 30,
    env: NetworkEnv = WIRED,
    faults: FaultSpec = NO_FAULTS,
) -> RatePair:
    """(TBR, TNBR): calibrate on k0 reference fetches, then classify one
    blocking and one non-blocking signaling account from k fetches each."""
    tbr = tnbr = 0
    for t in range(trials):
        rng = np.random.default_rng([seed, k, t])
        closed = sample_rtts(profile, env, True, faults, rng, k0)
        open_ = sample_rtts(profile, env, False, faults, rng, k0)
        th = CalibrationThresholds(percentile(closed), percentile(open_))
        tbr += classify_bit(sample_rtts(profile, env, True, faults, rng, k), th)
        tnbr += 1 - classify_bit(sample_rtts(profile, env, False, faults, rng, k), th)
    return RatePair(tbr / trials, tnbr / trials)


def simulated_factory(
    plan: BlockPlan,
    profile: ServiceProfile,
    env: NetworkEnv = WIRED,
    faults: FaultSpec = NO_FAULTS,
    seed: int = 0,
) -> TransportFactory:
    def make(visitor: str, trial: int) -> SimulatedVisitor:
        return SimulatedVisitor(plan, visitor, profile, env, faults, seed=(seed, trial))

    return make


def request_time_curve(
    profile: ServiceProfile,
    m_total: int,
    ks: Iterable[int],
    k0: int = 30,
    parallelism: int = 6,
    env: NetworkEnv | None = None,
) -> list[dict]:
    rows = []
    for k in ks:
        b = estimate_budget(m_total, k, k0, profile, parallelism, env)
        rows.append(
            {
                "service": profile.name,
                "m_total": m_total,
                "k": k,
                "k0": k0,
                "requests": b.requests,
                "lower_s": round(b.time.lower_ms / 1000, 3),
                "upper_s": round(b.time.upper_ms / 1000, 3),
            }
        )
    return rows


def default_ks() -> Sequence[int]:
    return (1, 3, 5, 10, 20, 30)
