"""Retrieval-phase orchestration: measure, test membership, classify, decode."""

from __future__ import annotations

import heapq
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .codec import Codeword, DetectedUncorrectable, bits_to_str, decode_user, rs_decode
from .planner import BlockPlan
from .rttsim import NetworkEnv, ServiceProfile
from .stats import (
    DecisionConfig,
    DegenerateThresholds,
    estimate_bits,
    mann_whitney_u,
    membership_test,
)
from .transports import Transport

DEFAULT_PARALLELISM = 6


class NoSpaceMatched(LookupError):
    """No user-space reference account differs from the open account."""

    def __init__(self, message: str, measurement: "Measurement"):
        super().__init__(message)
        self.measurement = measurement


@dataclass
class Measurement:
    series: dict[str, list[float]]
    requests: int
    wall_ms: float


def interleave(accounts: Sequence[str], per_account: int) -> list[str]:
    """Round-robin request order: a1, a2, ..., a1, a2, ..."""
    return [a for _ in range(per_account) for a in accounts]


def _makespan(durations: Sequence[float], parallelism: int) -> float:
    # greedy list scheduling onto `parallelism` workers, in issue order
    workers = [0.0] * min(parallelism, max(1, len(durations)))
    heapq.heapify(workers)
    for d in durations:
        heapq.heappush(workers, heapq.heappop(workers) + d)
    return max(workers) if durations else 0.0


def measure(transport: Transport, schedule: Sequence[str], parallelism: int) -> Measurement:
    """Issue every request in `schedule` with at most `parallelism` in flight.

    Samples are stored per account in schedule order regardless of completion
    order. Simulated transports run inline and report a modelled wall time.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    rtts: list[float] = [0.0] * len(schedule)
    if getattr(transport, "concurrent", False) and parallelism > 1:
        t0 = time.perf_counter()
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            for i, rtt in enumerate(pool.map(transport.fetch, schedule)):
                rtts[i] = rtt
        wall = (time.perf_counter() - t0) * 1000.0
    elif getattr(transport, "concurrent", False):
        t0 = time.perf_counter()
        rtts = [transport.fetch(a) for a in schedule]
        wall = (time.perf_counter() - t0) * 1000.0
    else:
        batch = getattr(transport, "fetch_batch", None)
        if batch is not None:
            positions: dict[str, list[int]] = defaultdict(list)
            for i, a in enumerate(schedule):
                positions[a].append(i)
            for a, idx in positions.items():
                for i, rtt in zip(idx, batch(a, len(idx))):
                    rtts[i] = rtt
        else:
            rtts = [transport.fetch(a) for a in schedule]
        wall = _makespan(rtts, parallelism)
    series: dict[str, list[float]] = defaultdict(list)
    for a, rtt in zip(schedule, rtts):
        series[a].append(rtt)
    return Measurement(dict(series), len(schedule), wall)


@dataclass
class AttackResult:
    member: bool
    raw_bits: Codeword = ()
    corrected_payload: Codeword | None = None
    identified: str | None = None
    identified_raw: str | None = None
    corrections: int = 0
    requests_issued: int = 0
    wall_time_ms: float = 0.0
    restarted: bool = False
    space: int | None = None
    p_value: float | None = None
    failure: str | None = None

    def to_dict(self) -> dict:
        return {
            "member": self.member,
            "raw_bits": bits_to_str(self.raw_bits),
            "corrected_payload": None
            if self.corrected_payload is None
            else bits_to_str(self.corrected_payload),
            "identified": self.identified,
            "identified_raw": self.identified_raw,
            "corrections": self.corrections,
            "requests_issued": self.requests_issued,
            "wall_time_ms": round(self.wall_time_ms, 3),
            "restarted": self.restarted,
            "space": self.space,
            "p_value": self.p_value,
            "failure": self.failure,
        }


@dataclass
class Calibration:
    """Reference samples already in hand, reused instead of re-measured."""

    closed: list[float] | None = None
    open: list[float] | None = None


def run_attack(
    session: Transport,
    plan: BlockPlan,
    cfg: DecisionConfig,
    parallelism: int = DEFAULT_PARALLELISM,
    *,
    space: int = 1,
    max_restarts: int = 1,
    calibration: Calibration | None = None,
) -> AttackResult:
    """Membership test, then per-bit classification and RS decoding.

    A detected-uncorrectable codeword, an unassigned decoded codeword, or
    coinciding thresholds trigger a full restart (fresh references), at most
    `max_restarts` times.
    """
    registry = plan.registries[space]
    m = registry.config.payload_bits
    closed_id, open_id = plan.closed_id(space), "open"
    signaling = plan.signaling_ids(space)
    requests = 0
    wall = 0.0
    restarted = False
    result = AttackResult(member=False, space=space)

    for attempt in range(max_restarts + 1):
        if attempt:
            restarted = True
        given = calibration if attempt == 0 and calibration else Calibration()
        need = [a for a, s in ((closed_id, given.closed), (open_id, given.open)) if s is None]
        ref = measure(session, interleave(need, cfg.k0), parallelism)
        requests += ref.requests
        wall += ref.wall_ms
        closed = given.closed if given.closed is not None else ref.series[closed_id]
        open_ = given.open if given.open is not None else ref.series[open_id]

        try:
            mt = membership_test(closed, open_, cfg)
        except DegenerateThresholds:
            result = AttackResult(True, space=space, failure="degenerate_thresholds")
            continue
        if not mt.member:
            return AttackResult(
                False,
                requests_issued=requests,
                wall_time_ms=wall,
                restarted=restarted,
                space=space,
                p_value=mt.test.p_value,
            )

        bits_meas = measure(session, interleave(signaling, cfg.k), parallelism)
        requests += bits_meas.requests
        wall += bits_meas.wall_ms
        raw = estimate_bits([bits_meas.series[a] for a in signaling], mt.thresholds, cfg.percentile_q)
        identified_raw = decode_user(raw[:m], registry)
        result = AttackResult(
            True,
            raw_bits=raw,
            identified_raw=identified_raw,
            space=space,
            p_value=mt.test.p_value,
        )
        try:
            outcome = rs_decode(raw, registry.config)
        except DetectedUncorrectable:
            result.failure = "uncorrectable"
            continue
        result.corrected_payload = outcome.payload
        result.corrections = outcome.corrected_symbols
        result.identified = decode_user(outcome.payload, registry)
        if result.identified is None:
            result.failure = "unassigned_codeword"
            continue
        break

    result.requests_issued = requests
    result.wall_time_ms = wall
    result.restarted = restarted
    return result


def locate_visitor_space(
    session: Transport, plan: BlockPlan, cfg: DecisionConfig, parallelism: int
) -> tuple[int, Measurement]:
    """Step one of a partitioned attack: which space reference blocks the visitor."""
    spaces = plan.space_ids()
    meas = measure(session, interleave(["open"] + spaces, cfg.k0), parallelism)
    best: tuple[float, int] | None = None
    for acc in spaces:
        test = mann_whitney_u(meas.series[acc], meas.series["open"], cfg.alpha)
        if test.significant and (best is None or test.p_value < best[0]):
            best = (test.p_value, int(acc.split("-")[1]))
    if best is None:
        raise NoSpaceMatched("visitor is blocked by no space reference", meas)
    return best[1], meas


def run_partitioned_attack(
    session: Transport,
    plan: BlockPlan,
    cfg: DecisionConfig,
    parallelism: int = DEFAULT_PARALLELISM,
    *,
    reuse_calibration: bool = False,
    max_restarts: int = 1,
) -> AttackResult:
    """Locate the visitor's user space, then identify within it.

    The open series from step one is always reused; the chosen space's
    reference is re-measured unless reuse_calibration is set.
    """
    if not plan.partitioned:
        return run_attack(session, plan, cfg, parallelism, max_restarts=max_restarts)
    try:
        space, step1 = locate_visitor_space(session, plan, cfg, parallelism)
    except NoSpaceMatched as e:
        return AttackResult(
            False,
            requests_issued=e.measurement.requests,
            wall_time_ms=e.measurement.wall_ms,
            failure="no_space_matched",
        )
    closed = step1.series[plan.closed_id(space)] if reuse_calibration else None
    result = run_attack(
        session,
        plan,
        cfg,
        parallelism,
        space=space,
        max_restarts=max_restarts,
        calibration=Calibration(closed=closed, open=step1.series["open"]),
    )
    result.requests_issued += step1.requests
    result.wall_time_ms += step1.wall_ms
    return result


# --------------------------------------------------------------------------
# campaigns
# --------------------------------------------------------------------------


@dataclass
class TrialRecord:
    visitor: str
    is_target: bool
    visit: int
    result: AttackResult

    @property
    def identified_correctly(self) -> bool:
        return self.is_target and self.result.identified == self.visitor

    @property
    def identified_correctly_raw(self) -> bool:
        return self.is_target and self.result.identified_raw == self.visitor

    def to_dict(self) -> dict:
        return {
            "visitor": self.visitor,
            "is_target": self.is_target,
            "visit": self.visit,
            **self.result.to_dict(),
        }


def _rate(hits: int, total: int) -> float | None:
    return hits / total if total else None


@dataclass
class CampaignMetrics:
    """TPR/TNR over visits; IDR and IDR/EC over visits judged to be members.

    A rate with an empty denominator is None (not applicable), never 0.
    """

    tpr: float | None
    tnr: float | None
    idr: float | None
    idr_ec: float | None
    trials: list[TrialRecord] = field(default_factory=list)

    @classmethod
    def from_trials(cls, trials: list[TrialRecord]) -> "CampaignMetrics":
        targets = [t for t in trials if t.is_target]
        others = [t for t in trials if not t.is_target]
        members = [t for t in trials if t.result.member]
        return cls(
            tpr=_rate(sum(t.result.member for t in targets), len(targets)),
            tnr=_rate(sum(not t.result.member for t in others), len(others)),
            idr=_rate(sum(t.identified_correctly_raw for t in members), len(members)),
            idr_ec=_rate(sum(t.identified_correctly for t in members), len(members)),
            trials=trials,
        )

    def counts(self) -> dict[str, tuple[int, int]]:
        targets = [t for t in self.trials if t.is_target]
        others = [t for t in self.trials if not t.is_target]
        members = [t for t in self.trials if t.result.member]
        return {
            "tpr": (sum(t.result.member for t in targets), len(targets)),
            "tnr": (sum(not t.result.member for t in others), len(others)),
            "idr": (sum(t.identified_correctly_raw for t in members), len(members)),
            "idr_ec": (sum(t.identified_correctly for t in members), len(members)),
        }

    def summary(self) -> dict:
        return {"tpr": self.tpr, "tnr": self.tnr, "idr": self.idr, "idr_ec": self.idr_ec}


TransportFactory = Callable[[str, int], Transport]


def run_campaign(
    targets: Sequence[str],
    non_targets: Sequence[str],
    visits_per_account: int,
    plan: BlockPlan,
    cfg: DecisionConfig,
    transport_factory: TransportFactory,
    parallelism: int = DEFAULT_PARALLELISM,
    *,
    reuse_calibration: bool = False,
    parallel_trials: int = 1,
) -> CampaignMetrics:
    """One attack per (visitor, visit).

    transport_factory(visitor, trial_index) returns the session for that visit.
    Trials run sequentially unless parallel_trials > 1, which is only allowed
    for simulated sessions (live timing would interfere across trials).
    """
    overlap = set(targets) & set(non_targets)
    if overlap:
        raise ValueError(f"targets and non-targets overlap: {sorted(overlap)[:3]}")
    visitors = [(v, True) for v in targets] + [(v, False) for v in non_targets]
    jobs = [
        (visit, visitor, is_target)
        for visit in range(visits_per_account)
        for visitor, is_target in visitors
    ]

    def one(index: int) -> TrialRecord:
        visit, visitor, is_target = jobs[index]
        session = transport_factory(visitor, index)
        if parallel_trials > 1 and getattr(session, "concurrent", False):
            raise ValueError("parallel_trials > 1 needs simulated sessions")
        try:
            result = run_partitioned_attack(
                session, plan, cfg, parallelism, reuse_calibration=reuse_calibration
            )
        finally:
            close = getattr(session, "close", None)
            if close is not None:
                close()
        return TrialRecord(visitor, is_target, visit, result)

    if parallel_trials > 1:
        with ThreadPoolExecutor(max_workers=parallel_trials) as pool:
            trials = list(pool.map(one, range(len(jobs))))
    else:
        trials = [one(i) for i in range(len(jobs))]
    return CampaignMetrics.from_trials(trials)


# --------------------------------------------------------------------------
# cost model
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeBudget:
    lower_ms: float
    upper_ms: float

    def __post_init__(self) -> None:
        if self.lower_ms > self.upper_ms:
            raise ValueError("lower_ms must not exceed upper_ms")


@dataclass(frozen=True)
class Budget:
    requests: int
    time: TimeBudget


def request_count(m_total: int, k: int, k0: int) -> int:
    return m_total * k + 2 * k0


def estimate_budget(
    m_total: int,
    k: int,
    k0: int,
    profile: ServiceProfile,
    parallelism: int = DEFAULT_PARALLELISM,
    env: NetworkEnv | None = None,
) -> Budget:
    """Request count m*k + 2*k0 and its time if every fetch took the faster
    (lower) or slower (upper) of the two nominal RTTs."""
    if min(k, k0, parallelism) < 1 or m_total < 0:
        raise ValueError("counts must be positive")
    n = request_count(m_total, k, k0)
    rtts = (profile.nominal_ms(True, env), profile.nominal_ms(False, env))
    per_slot = n / parallelism
    return Budget(n, TimeBudget(per_slot * min(rtts), per_slot * max(rtts)))
