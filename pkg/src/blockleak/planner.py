"""Blocking plans: which attacker account blocks which target.

Accounts are identified by stable string ids so the plan can be installed on
the mock service and measured by the harness:

    closed            blocks every target (unpartitioned plans)
    open              blocks nobody
    space-{s}         blocks every target of user space s (partitioned plans)
    sig-{s}-{j}       signaling account j (1-based) of user space s
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Literal

from .codec import CodeConfig, TargetRegistry, assign_codewords

PLAN_SCHEMA_VERSION = 1

Kind = Literal["signaling", "closed", "open", "space"]


class PlanError(ValueError):
    pass


class BlockLimitInfeasible(PlanError):
    pass


class UnknownIdentity(PlanError, KeyError):
    pass


@dataclass(frozen=True, order=True)
class AccountRole:
    kind: Kind
    space: int = 1
    index: int = 0  # signaling index, 1-based; 0 for references

    @property
    def account_id(self) -> str:
        if self.kind == "signaling":
            return f"sig-{self.space}-{self.index}"
        if self.kind == "space":
            return f"space-{self.space}"
        return self.kind

    @classmethod
    def from_id(cls, account_id: str) -> "AccountRole":
        if account_id in ("closed", "open"):
            return cls(account_id)  # type: ignore[arg-type]
        head, *rest = account_id.split("-")
        if head == "sig" and len(rest) == 2:
            return cls("signaling", int(rest[0]), int(rest[1]))
        if head == "space" and len(rest) == 1:
            return cls("space", int(rest[0]))
        raise ValueError(f"unrecognised account id {account_id!r}")


@dataclass(frozen=True)
class PartitionConfig:
    block_limit: int | None = None

    def __post_init__(self) -> None:
        if self.block_limit is not None and self.block_limit < 1:
            raise BlockLimitInfeasible("block_limit must be a positive count")

    def n_spaces(self, n_targets: int) -> int:
        if self.block_limit is None or n_targets == 0:
            return 1
        return math.ceil(n_targets / self.block_limit)


@dataclass(frozen=True)
class PlannedAccount:
    role: AccountRole
    blocks: frozenset[str]

    @property
    def account_id(self) -> str:
        return self.role.account_id


@dataclass
class BlockPlan:
    accounts: list[PlannedAccount]
    space_of: dict[str, int]
    registries: dict[int, TargetRegistry]
    block_limit: int | None = None
    _by_id: dict[str, PlannedAccount] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self._by_id = {a.account_id: a for a in self.accounts}

    @property
    def n_spaces(self) -> int:
        return len(self.registries)

    @property
    def partitioned(self) -> bool:
        return any(a.role.kind == "space" for a in self.accounts)

    def account(self, account_id: str) -> PlannedAccount:
        return self._by_id[account_id]

    def __iter__(self) -> Iterator[PlannedAccount]:
        return iter(self.accounts)

    def blocks(self, account_id: str, identity: str | None) -> bool:
        return identity is not None and identity in self._by_id[account_id].blocks

    def signaling_ids(self, space: int = 1) -> list[str]:
        sig = [a.role for a in self.accounts if a.role.kind == "signaling" and a.role.space == space]
        return [r.account_id for r in sorted(sig, key=lambda r: r.index)]

    def closed_id(self, space: int = 1) -> str:
        return AccountRole("space", space).account_id if self.partitioned else "closed"

    def space_ids(self) -> list[str]:
        return [a.account_id for a in self.accounts if a.role.kind == "space"]

    def edge_count(self) -> int:
        return sum(len(a.blocks) for a in self.accounts)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": PLAN_SCHEMA_VERSION,
            "block_limit": self.block_limit,
            "accounts": [
                {
                    "id": a.account_id,
                    "kind": a.role.kind,
                    "space": a.role.space,
                    "index": a.role.index,
                    "blocks": sorted(a.blocks),
                }
                for a in self.accounts
            ],
            "registries": {str(s): reg.to_text() for s, reg in self.registries.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "BlockPlan":
        if d.get("schema_version") != PLAN_SCHEMA_VERSION:
            raise PlanError(f"unsupported plan schema {d.get('schema_version')!r}")
        accounts = [
            PlannedAccount(AccountRole(a["kind"], a["space"], a["index"]), frozenset(a["blocks"]))
            for a in d["accounts"]
        ]
        registries = {int(s): TargetRegistry.from_text(t) for s, t in d["registries"].items()}
        space_of = {ident: s for s, reg in registries.items() for ident in reg}
        return cls(accounts, space_of, registries, d.get("block_limit"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BlockPlan":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _signaling_accounts(registry: TargetRegistry, space: int) -> list[PlannedAccount]:
    if not len(registry):
        return []
    total = registry.config.total_bits
    members: list[set[str]] = [set() for _ in range(total)]
    for ident in registry:
        for j, bit in enumerate(registry.encoded(ident)):
            if bit:
                members[j].add(ident)
    return [
        PlannedAccount(AccountRole("signaling", space, j + 1), frozenset(members[j]))
        for j in range(total)
    ]


def build_block_plan(registry: TargetRegistry, partition: PartitionConfig | None = None) -> BlockPlan:
    """Lay out reference and signaling accounts for every target.

    Without a block limit (or when everything fits in one space) the plan has
    a closed and an open reference plus one signaling account per code bit.
    With S > 1 spaces, targets are split into contiguous runs of at most L,
    each space gets its own reference and its own code of width
    ceil(log2 L) (plus RS parity), and a single open account is shared.
    References are listed before signaling accounts.
    """
    partition = partition or PartitionConfig()
    idents = registry.identities
    n_spaces = partition.n_spaces(len(idents))
    limit = partition.block_limit

    if n_spaces == 1:
        accounts = [
            PlannedAccount(AccountRole("closed"), frozenset(idents)),
            PlannedAccount(AccountRole("open"), frozenset()),
        ]
        accounts += _signaling_accounts(registry, 1)
        plan = BlockPlan(accounts, {i: 1 for i in idents}, {1: registry}, limit)
    else:
        assert limit is not None
        base = registry.config
        space_cfg_template = CodeConfig.for_targets(
            limit, base.rs_symbol_bits, base.rs_redundant_symbols
        )
        refs = []
        sigs = []
        registries: dict[int, TargetRegistry] = {}
        space_of: dict[str, int] = {}
        for s in range(1, n_spaces + 1):
            chunk = idents[(s - 1) * limit : s * limit]
            cfg = CodeConfig(
                len(chunk),
                space_cfg_template.payload_bits,
                base.rs_symbol_bits,
                base.rs_redundant_symbols,
            )
            seed = None if registry.shuffle_seed is None else registry.shuffle_seed + s
            reg = assign_codewords(chunk, cfg, seed)
            registries[s] = reg
            space_of.update((i, s) for i in chunk)
            refs.append(PlannedAccount(AccountRole("space", s), frozenset(chunk)))
            sigs += _signaling_accounts(reg, s)
        accounts = refs + [PlannedAccount(AccountRole("open"), frozenset())] + sigs
        plan = BlockPlan(accounts, space_of, registries, limit)

    if limit is not None:
        worst = max((len(a.blocks) for a in plan.accounts), default=0)
        if worst > limit:
            raise BlockLimitInfeasible(f"an account must block {worst} users but L={limit}")
    return plan


@dataclass(frozen=True)
class AccountCount:
    signaling: int
    reference: int

    @property
    def total(self) -> int:
        return self.signaling + self.reference


def accounts_required(
    n_targets: int, partition: PartitionConfig | None, config: CodeConfig
) -> AccountCount:
    partition = partition or PartitionConfig()
    n_spaces = partition.n_spaces(n_targets)
    if n_spaces == 1:
        return AccountCount(config.total_bits, 2)
    assert partition.block_limit is not None
    per_space = CodeConfig.for_targets(
        partition.block_limit, config.rs_symbol_bits, config.rs_redundant_symbols
    )
    return AccountCount(n_spaces * per_space.total_bits, n_spaces + 1)


def locate_space(identity: str, plan: BlockPlan) -> int:
    if identity not in plan.space_of:
        raise UnknownIdentity(identity)
    if not plan.partitioned:
        return 1
    for acc in plan.accounts:
        if acc.role.kind == "space" and identity in acc.blocks:
            return acc.role.space
    raise UnknownIdentity(identity)
