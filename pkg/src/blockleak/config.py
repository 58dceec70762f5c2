"""One YAML file configures a whole experiment; ``--set a.b=value`` overrides it."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import yaml

from .codec import CodeConfig
from .planner import PartitionConfig
from .rttsim import FaultSpec, NetworkEnv, ServiceProfile, network_env, preset
from .stats import DecisionConfig


@dataclass
class ServiceSection:
    preset: str = "facebook"
    env: str = "wired"
    time_scale: float = 1.0
    equalize: bool = False
    diagnostics: bool = False
    host: str = "127.0.0.1"
    port: int = 8080


@dataclass
class CodeSection:
    payload_bits: int | None = None
    rs_symbol_bits: int = 4
    rs_redundant_symbols: int = 0
    shuffle_seed: int | None = None

    def for_targets(self, n_targets: int) -> CodeConfig:
        if self.payload_bits is None:
            return CodeConfig.for_targets(n_targets, self.rs_symbol_bits, self.rs_redundant_symbols)
        return CodeConfig(n_targets, self.payload_bits, self.rs_symbol_bits, self.rs_redundant_symbols)


@dataclass
class AttackSection:
    parallelism: int = 6
    block_limit: int | None = None
    reuse_calibration: bool = False
    max_restarts: int = 1


@dataclass
class CampaignSection:
    targets: int | None = None  # None: every identity in the plan
    non_targets: int = 10
    visits_per_account: int = 2
    parallel_trials: int = 1  # simulation only


@dataclass
class ExperimentConfig:
    seed: int = 0
    service: ServiceSection = field(default_factory=ServiceSection)
    faults: FaultSpec = field(default_factory=FaultSpec)
    code: CodeSection = field(default_factory=CodeSection)
    decision: DecisionConfig = field(default_factory=DecisionConfig)
    attack: AttackSection = field(default_factory=AttackSection)
    campaign: CampaignSection = field(default_factory=CampaignSection)

    def profile(self) -> ServiceProfile:
        p = preset(self.service.preset)
        return p if self.service.time_scale == 1.0 else p.scaled(self.service.time_scale)

    def env(self) -> NetworkEnv:
        return network_env(self.service.env).scaled(self.service.time_scale)

    def partition(self) -> PartitionConfig:
        return PartitionConfig(self.attack.block_limit)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {
    "service": ServiceSection,
    "faults": FaultSpec,
    "code": CodeSection,
    "decision": DecisionConfig,
    "attack": AttackSection,
    "campaign": CampaignSection,
}


def _build(cls: type, data: dict, where: str) -> Any:
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    return cls(**data)


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data or {})
    kwargs: dict[str, Any] = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _build(cls, data.pop(name) or {}, name)
    if "seed" in data:
        kwargs["seed"] = int(data.pop("seed"))
    if data:
        raise ValueError(f"unknown top-level key(s): {', '.join(sorted(data))}")
    return ExperimentConfig(**kwargs)


def apply_overrides(data: dict, overrides: Iterable[str]) -> dict:
    """Apply ``section.key=value`` strings; values are parsed as YAML scalars."""
    data = {k: dict(v) if isinstance(v, dict) else v for k, v in (data or {}).items()}
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ValueError(f"override must look like key=value: {item!r}")
        value = yaml.safe_load(raw)
        parts = key.strip().split(".")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return data


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    data = {}
    if path is not None:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    return config_from_dict(apply_overrides(data, overrides))
