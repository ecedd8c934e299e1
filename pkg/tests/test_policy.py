import random

import pytest

from replica_planner.errors import BlockTooLarge, DomainError, InsufficientNodes, UnreachableTarget
from replica_planner.models import Block, validate_cluster
from replica_planner.services.policy import (
    apply_repair,
    decide_for_cluster,
    node_availability,
    node_weight,
    optimum_replica_count,
    place_replicas,
    repair_plan,
)
from replica_planner.utils import GB, MB

from helpers import make_cluster


def test_node_availability():
    assert node_availability(0) == 1.0
    assert node_availability(0.2) == pytest.approx(0.8)
    assert node_availability(0.05) == pytest.approx(0.95)
    for bad in (1.0, -0.1, 1.5):
        with pytest.raises(DomainError):
            node_availability(bad)


def test_node_weight_worked_example():
    assert node_weight(80 * GB, 0.2) == 64 * GB


def test_node_weight_other_cases():
    for capacity in (1, 64 * MB, 80 * GB):
        assert node_weight(capacity, 0) == capacity
    assert node_weight(250 * GB, 0.01) == pytest.approx(247.5 * GB)
    with pytest.raises(DomainError):
        node_weight(GB, 1.0)
    with pytest.raises(DomainError):
        node_weight(-1, 0.1)


@pytest.mark.parametrize("p, expected", [(0.01, 2), (0.1, 3), (0.2, 3)])
def test_replica_counts_match_published_sweep(p, expected):
    decision = optimum_replica_count(0.99, [p] * 10, max_replicas=10)
    assert decision.replica_count == expected
    assert decision.achieved_availability > 0.99


def test_zero_target_needs_one_replica():
    for f in (0.0, 0.3, 0.9):
        assert optimum_replica_count(0.0, [f], max_replicas=5).replica_count == 1


def test_mixed_failure_probabilities():
    decision = optimum_replica_count(0.99, [0.01, 0.01, 0.02, 0.03, 0.04], max_replicas=5)
    assert decision.mean_failure_probability == pytest.approx(0.022)
    assert decision.replica_count == 2
    assert decision.achieved_availability == pytest.approx(0.999516)


def test_unreachable_target():
    with pytest.raises(UnreachableTarget) as info:
        optimum_replica_count(0.999999, [0.5], max_replicas=1)
    assert info.value.decision.replica_count == 1

    clamped = optimum_replica_count(0.999999, [0.5], max_replicas=1, accept_clamped=True)
    assert clamped.replica_count == 1
    assert clamped.achieved_availability == pytest.approx(0.5)


def test_optimum_rejects_bad_inputs():
    with pytest.raises(DomainError):
        optimum_replica_count(1.0, [0.1], 3)
    with pytest.raises(DomainError):
        optimum_replica_count(0.9, [], 3)
    with pytest.raises(DomainError):
        optimum_replica_count(0.9, [0.1], 0)


def test_replica_count_monotone_in_target_and_failure():
    alphas = [0.0, 0.5, 0.9, 0.95, 0.99, 0.999, 0.9999]
    fs = [0.001, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5]
    count = {
        (a, f): optimum_replica_count(a, [f], max_replicas=50).replica_count for a in alphas for f in fs
    }
    for f in fs:
        series = [count[(a, f)] for a in alphas]
        assert series == sorted(series)
    for a in alphas:
        series = [count[(a, f)] for f in fs]
        assert series == sorted(series)


def test_place_picks_heaviest_nodes(four_nodes):
    block = Block(0, 1, 64 * MB)
    assert place_replicas(four_nodes, block, 2) == [1, 2]
    assert place_replicas(four_nodes, block, 4) == [1, 2, 3, 4]


def test_place_single_node():
    state = make_cluster([GB], [0.3], ids=[9])
    assert place_replicas(state, Block(0, 1, MB), 1) == [9]


def test_place_too_many_replicas(four_nodes):
    with pytest.raises(InsufficientNodes):
        place_replicas(four_nodes, Block(0, 1, MB), 5)


def test_place_block_too_large(four_nodes):
    with pytest.raises(BlockTooLarge):
        place_replicas(four_nodes, Block(0, 1, 65 * MB), 1)


def test_place_skips_dead_and_full_nodes():
    state = make_cluster([GB, 32 * MB, GB, GB], [0.0, 0.0, 0.5, 0.9])
    state.kill_node(1)
    chosen = place_replicas(state, Block(0, 1, 64 * MB), 2)
    assert chosen == [3, 4]
    with pytest.raises(InsufficientNodes) as info:
        place_replicas(state, Block(0, 1, 64 * MB), 3)
    assert info.value.partial == [3, 4]


def test_place_does_not_mutate(four_nodes):
    before = four_nodes.to_dict()
    place_replicas(four_nodes, Block(0, 1, MB), 3)
    assert four_nodes.to_dict() == before


def test_place_ties_go_to_lower_id():
    state = make_cluster([GB] * 4, [0.1] * 4, ids=[7, 3, 5, 1])
    assert place_replicas(state, Block(0, 1, MB), 3) == [1, 3, 5]


def test_place_is_deterministic():
    a = make_cluster([80 * GB, 120 * GB, 60 * GB], [0.3, 0.1, 0.05])
    b = make_cluster([80 * GB, 120 * GB, 60 * GB], [0.3, 0.1, 0.05])
    block = Block(4, 2, 10 * MB)
    assert place_replicas(a, block, 2) == place_replicas(b, block, 2)


def test_argmax_invariant_under_capacity_scaling():
    capacities = [80 * GB, 120 * GB, 60 * GB, 200 * GB]
    fs = [0.3, 0.1, 0.05, 0.2]
    block = Block(0, 1, MB)
    base = place_replicas(make_cluster(capacities, fs), block, 4)
    assert base == [4, 2, 3, 1]
    for factor in (2, 3, 7):
        scaled = make_cluster([c * factor for c in capacities], fs)
        assert place_replicas(scaled, block, 4) == base


def test_homogeneous_greedy_stays_within_one_block():
    state = make_cluster([GB] * 4, [0.05] * 4)
    rng = random.Random(7)
    for block_id in range(40):
        block = Block(block_id, 1, rng.randint(1, 64 * MB))
        state.commit_block(block, place_replicas(state, block, 1))
        used = [n.used_bytes for n in state.nodes.values()]
        assert max(used) - min(used) <= state.block_size_bytes
    assert validate_cluster(state) == []


def test_capacity_weight_mode_ignores_fill():
    state = make_cluster([GB, 2 * GB], [0.0, 0.0])
    state.commit_block(Block(0, 1, 64 * MB), [2])
    for block_id in range(1, 17):
        state.commit_block(Block(block_id, 1, 64 * MB), [2])
    block = Block(99, 1, MB)
    assert place_replicas(state, block, 1, weight_mode="free") == [1]
    assert place_replicas(state, block, 1, weight_mode="capacity") == [2]


def _three_node_cluster():
    state = make_cluster([80 * GB] * 3, [0.01] * 3, ids=[0, 1, 2])
    state.commit_block(Block(0, 1, 64 * MB), [0, 1])
    return state


def test_repair_nothing_to_do():
    state = _three_node_cluster()
    assert repair_plan(state, 2).entries == []


def test_repair_replaces_dead_holder():
    state = _three_node_cluster()
    state.kill_node(0)
    plan = repair_plan(state, 2)
    assert plan.entries == [(0, 2)]
    assert plan.complete


def test_repair_ignores_dead_non_holder():
    state = _three_node_cluster()
    state.kill_node(2)
    assert repair_plan(state, 2).entries == []


def test_repair_charges_earlier_entries():
    state = make_cluster([GB, GB, 64 * MB, 64 * MB], [0.01] * 4, ids=[0, 1, 2, 3])
    for block_id in range(3):
        state.commit_block(Block(block_id, 1, 64 * MB), [0, 1])
    state.kill_node(0)

    plan = repair_plan(state, 2, strict=False)
    assert plan.entries == [(0, 2), (1, 3)]
    assert plan.shortfalls == [(2, 1)]

    with pytest.raises(InsufficientNodes) as info:
        repair_plan(state, 2)
    assert info.value.partial == plan


def test_repair_restores_target():
    state = make_cluster([4 * GB] * 5, [0.01, 0.01, 0.02, 0.03, 0.04])
    decision = decide_for_cluster(state)
    for block_id in range(30):
        block = Block(block_id, 1, 64 * MB)
        state.commit_block(block, place_replicas(state, block, decision.replica_count))
    state.kill_node(1)

    apply_repair(state, repair_plan(state, decision.replica_count))
    for block_id in state.blocks:
        assert len(state.alive_holders(block_id)) == decision.replica_count
    assert validate_cluster(state) == []


def test_unknown_weight_mode_rejected(four_nodes):
    block = Block(0, 1, 64 * MB)
    with pytest.raises(DomainError, match="weight_mode"):
        place_replicas(four_nodes, block, 2, weight_mode="cpu")
    four_nodes.commit_block(block, [1, 2])
    four_nodes.kill_node(1)
    with pytest.raises(DomainError, match="weight_mode"):
        repair_plan(four_nodes, 2, weight_mode="cpu")
