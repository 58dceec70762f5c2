import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockleak.codec import CodeConfig, assign_codewords
from blockleak.planner import (
    AccountRole,
    BlockLimitInfeasible,
    BlockPlan,
    PartitionConfig,
    UnknownIdentity,
    accounts_required,
    build_block_plan,
    locate_space,
)


def test_example_plan(example_plan):
    assert example_plan.account("sig-1-1").blocks == {"Erin", "Frank", "Grace", "Heidi"}
    assert example_plan.account("closed").blocks == set(example_plan.space_of)
    assert example_plan.account("open").blocks == set()
    assert [a.role.kind for a in example_plan][:2] == ["closed", "open"]


def test_empty_registry_plan():
    plan = build_block_plan(assign_codewords([], CodeConfig(0, 0)))
    assert [a.account_id for a in plan] == ["closed", "open"]
    assert plan.edge_count() == 0


def _ids(n):
    return [f"user{i:04d}" for i in range(n)]


def test_thousand_targets_in_ten_spaces():
    reg = assign_codewords(_ids(1000), CodeConfig.for_targets(1000))
    plan = build_block_plan(reg, PartitionConfig(100))
    assert plan.n_spaces == 10
    for s in range(1, 11):
        assert len(plan.signaling_ids(s)) == 7
        assert len(plan.registries[s]) == 100
    assert all(len(a.blocks) <= 100 for a in plan)
    assert len(plan.space_ids()) == 10
    # locate_space agrees with the space references' block sets
    for ident in reg:
        holders = [a.role.space for a in plan if a.role.kind == "space" and ident in a.blocks]
        assert holders == [locate_space(ident, plan)]
    # contiguous split
    assert locate_space("user0000", plan) == 1
    assert locate_space("user0999", plan) == 10


def test_accounts_required():
    assert accounts_required(2**24, None, CodeConfig(2**24, 24, 4, 2)).total == 34
    counts = accounts_required(1000, PartitionConfig(100), CodeConfig.for_targets(1000))
    assert (counts.signaling, counts.reference) == (70, 11)
    # one space collapses to the unpartitioned layout
    cfg = CodeConfig.for_targets(1000)
    assert accounts_required(1000, PartitionConfig(1000), cfg) == accounts_required(1000, None, cfg)


def test_accounts_required_matches_built_plan():
    reg = assign_codewords(_ids(1000), CodeConfig.for_targets(1000, 4, 2))
    plan = build_block_plan(reg, PartitionConfig(100))
    need = accounts_required(1000, PartitionConfig(100), reg.config)
    assert len(plan.accounts) == need.total
    assert sum(a.role.kind == "signaling" for a in plan) == need.signaling


def test_single_space_locates_one():
    reg = assign_codewords(_ids(10), CodeConfig.for_targets(10))
    plan = build_block_plan(reg)
    assert {locate_space(i, plan) for i in reg} == {1}
    with pytest.raises(UnknownIdentity):
        locate_space("nobody", plan)


def test_block_count_concentrates_near_half():
    n = 1000
    reg = assign_codewords(_ids(n), CodeConfig(n, 10), shuffle_seed=99)
    plan = build_block_plan(reg)
    sigma = math.sqrt(n / 4)
    for acc in plan.signaling_ids():
        assert abs(len(plan.account(acc).blocks) - n / 2) <= 3 * sigma


def test_limit_validation_and_small_limits():
    with pytest.raises(BlockLimitInfeasible):
        PartitionConfig(0)
    reg = assign_codewords(_ids(10), CodeConfig.for_targets(10))
    plan = build_block_plan(reg, PartitionConfig(9))
    assert plan.n_spaces == 2
    assert len(plan.registries[2]) == 1
    assert all(len(a.blocks) <= 9 for a in plan)


@st.composite
def registries(draw):
    n = draw(st.integers(1, 120))
    k = draw(st.sampled_from([0, 2]))
    cfg = CodeConfig.for_targets(n, 4, k)
    seed = draw(st.one_of(st.none(), st.integers(0, 10**6)))
    limit = draw(st.one_of(st.none(), st.integers(max(1, n // 8), n)))
    return assign_codewords(_ids(n), cfg, seed), limit


@given(registries())
@settings(max_examples=60, deadline=None)
def test_plan_reproduces_codewords_and_respects_limit(case):
    reg, limit = case
    plan = build_block_plan(reg, PartitionConfig(limit))
    for ident in reg:
        s = locate_space(ident, plan)
        space_reg = plan.registries[s]
        bits = tuple(int(ident in plan.account(a).blocks) for a in plan.signaling_ids(s))
        assert bits == space_reg.encoded(ident)
        assert ident in plan.account(plan.closed_id(s)).blocks
    if limit is not None:
        assert all(len(a.blocks) <= limit for a in plan)


def test_plan_json_round_trip(tmp_path, wild_registry):
    plan = build_block_plan(wild_registry)
    path = tmp_path / "plan.json"
    plan.save(path)
    loaded = BlockPlan.load(path)
    assert loaded.to_dict() == plan.to_dict()
    assert loaded.registries[1] == wild_registry
    assert plan.to_dict()["schema_version"] == 1


def test_account_role_ids():
    for role in (AccountRole("closed"), AccountRole("open"), AccountRole("space", 3),
                 AccountRole("signaling", 2, 7)):
        assert AccountRole.from_id(role.account_id) == role
    with pytest.raises(ValueError):
        AccountRole.from_id("bogus")
