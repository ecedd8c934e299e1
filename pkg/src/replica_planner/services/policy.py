from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from ..config import WEIGHT_MODES
from ..errors import BlockTooLarge, DomainError, InsufficientNodes, UnreachableTarget
from ..models import Block, ClusterState, NodeState

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReplicaDecision:
    replica_count: int
    achieved_availability: float
    mean_failure_probability: float


@dataclass
class RepairPlan:
    entries: List[Tuple[int, int]] = field(default_factory=list)
    shortfalls: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.shortfalls


def _check_probability(f: float) -> None:
    if math.isnan(f) or not 0.0 <= f < 1.0:
        raise DomainError(f"failure probability must lie in [0, 1) (got {f})")


def node_availability(failure_probability: float) -> float:
    _check_probability(failure_probability)
    return 1.0 - failure_probability


def node_weight(free_bytes: float, failure_probability: float) -> float:
    """
    Greedy placement score: byte count scaled by node availability.
    """
    if free_bytes < 0:
        raise DomainError(f"free_bytes must be >= 0 (got {free_bytes})")
    return free_bytes * node_availability(failure_probability)


def optimum_replica_count(
    availability_target: float,
    failure_probabilities: Sequence[float],
    max_replicas: int,
    accept_clamped: bool = False,
) -> ReplicaDecision:
    """
    Smallest R with 1 - mean(f)^R strictly above the target, capped at max_replicas.
    """
    if math.isnan(availability_target) or not 0.0 <= availability_target < 1.0:
        raise DomainError(f"availability target must lie in [0, 1) (got {availability_target})")
    if not failure_probabilities:
        raise DomainError("failure probabilities must not be empty")
    if max_replicas < 1:
        raise DomainError(f"max_replicas must be >= 1 (got {max_replicas})")
    for f in failure_probabilities:
        _check_probability(f)

    mean_f = math.fsum(failure_probabilities) / len(failure_probabilities)
    for replicas in range(1, max_replicas + 1):
        achieved = 1.0 - mean_f**replicas
        if achieved > availability_target:
            return ReplicaDecision(replicas, achieved, mean_f)

    clamped = ReplicaDecision(max_replicas, 1.0 - mean_f**max_replicas, mean_f)
    if accept_clamped:
        log.warning(
            "availability %.6f unreachable with %d replicas (mean f=%.4f); keeping clamped count",
            availability_target,
            max_replicas,
            mean_f,
        )
        return clamped
    raise UnreachableTarget(
        f"availability target {availability_target} not reachable with at most {max_replicas} "
        f"replicas (mean failure probability {mean_f:.4f} gives {clamped.achieved_availability:.6f})",
        clamped,
    )


def _check_weight_mode(weight_mode: str) -> None:
    if weight_mode not in WEIGHT_MODES:
        raise DomainError(f"weight_mode must be one of {WEIGHT_MODES} (got {weight_mode!r})")


def _score(node: NodeState, free_bytes: int, weight_mode: str) -> float:
    if weight_mode == "capacity":
        return node_weight(node.capacity_bytes, node.spec.failure_probability)
    return node_weight(free_bytes, node.spec.failure_probability)


def _select(
    candidates: Iterable[NodeState],
    count: int,
    free: Mapping[int, int],
    weight_mode: str,
) -> List[int]:
    """
    Pick the heaviest node, drop it, repeat. Equal weights go to the lower id.
    """
    pool = list(candidates)
    chosen: List[int] = []
    while len(chosen) < count and pool:
        best = min(pool, key=lambda n: (-_score(n, free[n.id], weight_mode), n.id))
        chosen.append(best.id)
        pool.remove(best)
    return chosen


def place_replicas(
    cluster: ClusterState,
    block: Block,
    replica_count: int,
    weight_mode: str = "free",
) -> List[int]:
    """
    Choose `replica_count` distinct alive nodes for `block` by descending weight.
    The cluster is not modified; commit the result with `ClusterState.commit_block`.
    """
    if replica_count < 1:
        raise DomainError(f"replica_count must be >= 1 (got {replica_count})")
    _check_weight_mode(weight_mode)
    if block.size_bytes > cluster.block_size_bytes:
        raise BlockTooLarge(
            f"block {block.id}: {block.size_bytes} bytes exceeds block size {cluster.block_size_bytes}"
        )
    eligible = [n for n in cluster.nodes.values() if n.alive and n.free_bytes >= block.size_bytes]
    free = {n.id: n.free_bytes for n in eligible}
    chosen = _select(eligible, replica_count, free, weight_mode)
    if len(chosen) < replica_count:
        raise InsufficientNodes(
            f"block {block.id}: {len(eligible)} eligible nodes for {replica_count} replicas",
            partial=chosen,
        )
    log.debug("block %d -> %s", block.id, chosen)
    return chosen


def repair_plan(
    cluster: ClusterState,
    target_replica_count: int,
    weight_mode: str = "free",
    strict: bool = True,
) -> RepairPlan:
    """
    New (block_id, node_id) copies that bring every block back to the target number of
    alive holders. Blocks are handled in ascending id; capacity taken by earlier entries
    is charged before later choices. With strict=True an unrestorable block raises
    InsufficientNodes carrying the partial plan.
    """
    if target_replica_count < 1:
        raise DomainError(f"target_replica_count must be >= 1 (got {target_replica_count})")
    _check_weight_mode(weight_mode)
    plan = RepairPlan()
    free: Dict[int, int] = {n.id: n.free_bytes for n in cluster.nodes.values()}

    for block_id in sorted(cluster.blocks):
        block = cluster.blocks[block_id]
        alive = cluster.alive_holders(block_id)
        missing = target_replica_count - len(alive)
        if missing <= 0:
            continue
        holders = set(cluster.holders(block_id))
        eligible = [
            n
            for n in cluster.nodes.values()
            if n.alive and n.id not in holders and free[n.id] >= block.size_bytes
        ]
        chosen = _select(eligible, missing, free, weight_mode)
        for nid in chosen:
            plan.entries.append((block_id, nid))
            free[nid] -= block.size_bytes
        if len(chosen) < missing:
            plan.shortfalls.append((block_id, missing - len(chosen)))

    log.debug("repair plan: %d copies, %d short blocks", len(plan.entries), len(plan.shortfalls))
    if strict and plan.shortfalls:
        raise InsufficientNodes(
            f"{len(plan.shortfalls)} block(s) cannot be restored to {target_replica_count} replicas",
            partial=plan,
        )
    return plan


def apply_repair(cluster: ClusterState, plan: RepairPlan) -> None:
    for block_id, node_id in plan.entries:
        cluster.add_replica(block_id, node_id)


def decide_for_cluster(
    cluster: ClusterState,
    max_replicas: Optional[int] = None,
    accept_clamped: bool = False,
) -> ReplicaDecision:
    """
    R_opt for the alive node set of a cluster, capped by the alive count.
    """
    alive = cluster.alive_nodes()
    if not alive:
        raise InsufficientNodes("no alive nodes")
    cap = len(alive) if max_replicas is None else min(max_replicas, len(alive))
    return optimum_replica_count(
        cluster.availability_target,
        [n.spec.failure_probability for n in alive],
        cap,
        accept_clamped=accept_clamped,
    )
