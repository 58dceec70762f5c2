"""Synthetic RTTs for blocked / non-blocked profile fetches.

Each state is a shifted log-normal: base + LogNormal(mu, sigma), with the
slower state shifted by |delta05_ms|. Because both states share the noise
law, their 5th percentiles differ by exactly delta05_ms in distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from typing import Literal, Union

import numpy as np
import yaml

SeedLike = Union[int, np.random.Generator, None]

Outcome = Literal["ok", "early", "server_error"]


class UnknownPreset(KeyError):
    pass


@dataclass(frozen=True)
class ServiceProfile:
    name: str
    base_ms: float
    delta05_ms: float
    jitter_mu: float
    jitter_sigma: float
    blocked_slower: bool | None = None
    p_value: float | None = None

    def __post_init__(self) -> None:
        if self.base_ms < 0 or self.jitter_sigma < 0:
            raise ValueError("base_ms and jitter_sigma must be non-negative")
        implied = self.delta05_ms > 0
        if self.blocked_slower is None:
            object.__setattr__(self, "blocked_slower", implied)
        elif self.delta05_ms and self.blocked_slower != implied:
            raise ValueError("blocked_slower disagrees with the sign of delta05_ms")

    @property
    def distinguishable(self) -> bool:
        return self.p_value is not None and self.p_value < 0.01

    def shift_ms(self, blocked: bool) -> float:
        slow = blocked == self.blocked_slower
        return abs(self.delta05_ms) if slow else 0.0

    def nominal_ms(self, blocked: bool, env: "NetworkEnv | None" = None) -> float:
        """Expected RTT of one fetch in the given state, faults off."""
        env = env or WIRED
        sigma2 = self.jitter_sigma**2 + env.extra_jitter_sigma**2
        return (
            self.base_ms
            + env.added_latency_ms
            + self.shift_ms(blocked)
            + math.exp(self.jitter_mu + sigma2 / 2)
        )

    def scaled(self, factor: float) -> "ServiceProfile":
        """Same shape with every duration multiplied by factor."""
        if factor <= 0:
            raise ValueError("factor must be positive")
        return replace(
            self,
            name=f"{self.name}@x{factor:g}",
            base_ms=self.base_ms * factor,
            delta05_ms=self.delta05_ms * factor,
            jitter_mu=self.jitter_mu + math.log(factor),
        )

    def equalized(self) -> "ServiceProfile":
        """Both states padded to the slower one; the response-time defense."""
        return replace(
            self,
            name=f"{self.name}+equalized",
            base_ms=self.base_ms + abs(self.delta05_ms),
            delta05_ms=0.0,
        )


@dataclass(frozen=True)
class NetworkEnv:
    name: str = "custom"
    added_latency_ms: float = 0.0
    extra_jitter_sigma: float = 0.0

    def scaled(self, factor: float) -> "NetworkEnv":
        return replace(self, added_latency_ms=self.added_latency_ms * factor)


WIRED = NetworkEnv("wired", 0.0, 0.0)
WIFI = NetworkEnv("wifi", 4.0, 0.2)
TETHERING = NetworkEnv("tethering", 35.0, 0.45)
ENVIRONMENTS = {e.name: e for e in (WIRED, WIFI, TETHERING)}


@dataclass(frozen=True)
class FaultSpec:
    early_outlier_prob: float = 0.0
    early_outlier_scale: float = 0.2
    server_error_prob: float = 0.0

    def __post_init__(self) -> None:
        for name in ("early_outlier_prob", "server_error_prob"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 < self.early_outlier_scale < 1:
            raise ValueError("early_outlier_scale must lie in (0, 1)")

    @property
    def active(self) -> bool:
        return self.early_outlier_prob > 0 or self.server_error_prob > 0


NO_FAULTS = FaultSpec()


def make_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def draw_rtts(
    profile: ServiceProfile,
    env: NetworkEnv,
    blocked: bool,
    faults: FaultSpec,
    rng: SeedLike,
    n: int,
) -> tuple[np.ndarray, np.ndarray]:
    """n samples plus an outcome code per sample (0 ok, 1 early, 2 server error).

    Three uniforms/normals are consumed per sample whatever the fault setting,
    so turning faults on does not desynchronise the nominal stream.
    """
    rng = make_rng(rng)
    sigma = math.hypot(profile.jitter_sigma, env.extra_jitter_sigma)
    z = rng.standard_normal(n)
    u_err = rng.random(n)
    u_early = rng.random(n)
    nominal = (
        profile.base_ms
        + env.added_latency_ms
        + profile.shift_ms(blocked)
        + np.exp(profile.jitter_mu + sigma * z)
    )
    outcome = np.zeros(n, dtype=np.int8)
    outcome[u_early < faults.early_outlier_prob] = 1
    outcome[u_err < faults.server_error_prob] = 2
    rtt = np.where(outcome > 0, nominal * faults.early_outlier_scale, nominal)
    # positivity: log-normal term is > 0, so rtt > 0 for any base >= 0
    return rtt, outcome


def sample_rtts(
    profile: ServiceProfile,
    env: NetworkEnv,
    blocked: bool,
    faults: FaultSpec,
    rng: SeedLike,
    n: int,
) -> np.ndarray:
    return draw_rtts(profile, env, blocked, faults, rng, n)[0]


def sample_rtt(
    profile: ServiceProfile,
    env: NetworkEnv,
    blocked: bool,
    faults: FaultSpec,
    rng: SeedLike,
) -> float:
    """One simulated fetch duration in ms."""
    return float(draw_rtts(profile, env, blocked, faults, rng, 1)[0][0])


def sample_with_outcome(
    profile: ServiceProfile,
    env: NetworkEnv,
    blocked: bool,
    faults: FaultSpec,
    rng: SeedLike,
) -> tuple[float, Outcome]:
    rtt, code = draw_rtts(profile, env, blocked, faults, rng, 1)
    return float(rtt[0]), ("ok", "early", "server_error")[int(code[0])]


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------


def profile_from_dict(name: str, d: dict) -> ServiceProfile:
    return ServiceProfile(
        name=name,
        base_ms=float(d["base_ms"]),
        delta05_ms=float(d["delta05_ms"]),
        jitter_mu=float(d["jitter_mu"]),
        jitter_sigma=float(d["jitter_sigma"]),
        blocked_slower=d.get("blocked_slower"),
        p_value=d.get("p_value"),
    )


@lru_cache(maxsize=1)
def _preset_table() -> dict[str, ServiceProfile]:
    text = resources.files("blockleak").joinpath("data/presets.yaml").read_text()
    raw = yaml.safe_load(text)
    return {name: profile_from_dict(name, d) for name, d in raw.items()}


def preset_names() -> list[str]:
    return list(_preset_table())


def preset(name: str) -> ServiceProfile:
    try:
        return _preset_table()[name]
    except KeyError:
        raise UnknownPreset(
            f"unknown preset {name!r}; choose from {', '.join(preset_names())}"
        ) from None


def network_env(name: str) -> NetworkEnv:
    try:
        return ENVIRONMENTS[name]
    except KeyError:
        raise KeyError(f"unknown network env {name!r}") from None
