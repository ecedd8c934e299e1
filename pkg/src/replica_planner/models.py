"""
Domain types for a PC-cluster storage system: data nodes, blocks, placements and the
cluster state that metrics and simulation read from. No policy logic lives here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

from .errors import ConfigError, DomainError
from .utils import MB

DEFAULT_BLOCK_SIZE = 64 * MB
DEFAULT_AVAILABILITY_TARGET = 0.99


@dataclass(frozen=True)
class NodeSpec:
    id: int
    capacity_bytes: int
    failure_probability: float
    label: Optional[str] = None

    def __post_init__(self) -> None:
        if self.capacity_bytes <= 0:
            raise DomainError(f"node {self.id}: capacity_bytes must be > 0 (got {self.capacity_bytes})")
        if not 0.0 <= self.failure_probability < 1.0:
            raise DomainError(
                f"node {self.id}: failure_probability must lie in [0, 1) (got {self.failure_probability})"
            )

    @property
    def name(self) -> str:
        return self.label or f"DataNode{self.id}"


@dataclass
class NodeState:
    spec: NodeSpec
    used_bytes: int = 0
    alive: bool = True

    @property
    def id(self) -> int:
        return self.spec.id

    @property
    def capacity_bytes(self) -> int:
        return self.spec.capacity_bytes

    @property
    def free_bytes(self) -> int:
        return self.spec.capacity_bytes - self.used_bytes


@dataclass(frozen=True)
class Block:
    id: int
    file_id: int
    size_bytes: int

    def __post_init__(self) -> None:
        if self.size_bytes <= 0:
            raise DomainError(f"block {self.id}: size_bytes must be > 0 (got {self.size_bytes})")


@dataclass
class BlockPlacement:
    block_id: int
    holder_node_ids: List[int] = field(default_factory=list)


@dataclass
class ClusterState:
    """
    Nodes, blocks and placements keyed by id. Callers serialize writes; the mutators
    below are the only paths that keep per-node accounting in step with placements.
    """

    nodes: Dict[int, NodeState] = field(default_factory=dict)
    blocks: Dict[int, Block] = field(default_factory=dict)
    placements: Dict[int, BlockPlacement] = field(default_factory=dict)
    block_size_bytes: int = DEFAULT_BLOCK_SIZE
    availability_target: float = DEFAULT_AVAILABILITY_TARGET

    @classmethod
    def build(
        cls,
        specs: Iterable[NodeSpec],
        block_size_bytes: int = DEFAULT_BLOCK_SIZE,
        availability_target: float = DEFAULT_AVAILABILITY_TARGET,
    ) -> "ClusterState":
        if block_size_bytes <= 0:
            raise DomainError(f"block_size_bytes must be > 0 (got {block_size_bytes})")
        if not 0.0 <= availability_target < 1.0:
            raise DomainError(f"availability_target must lie in [0, 1) (got {availability_target})")
        nodes: Dict[int, NodeState] = {}
        for spec in sorted(specs, key=lambda s: s.id):
            if spec.id in nodes:
                raise DomainError(f"duplicate node id {spec.id}")
            nodes[spec.id] = NodeState(spec=spec)
        return cls(nodes=nodes, block_size_bytes=block_size_bytes, availability_target=availability_target)

    # ---- queries ----------------------------------------------------
    def alive_nodes(self) -> List[NodeState]:
        return [n for n in self.nodes.values() if n.alive]

    def holders(self, block_id: int) -> List[int]:
        placement = self.placements.get(block_id)
        return list(placement.holder_node_ids) if placement else []

    def alive_holders(self, block_id: int) -> List[int]:
        return [nid for nid in self.holders(block_id) if nid in self.nodes and self.nodes[nid].alive]

    def logical_bytes(self) -> int:
        return sum(b.size_bytes for b in self.blocks.values())

    def physical_bytes(self) -> int:
        return sum(n.used_bytes for n in self.nodes.values())

    # ---- mutators ---------------------------------------------------
    def commit_block(self, block: Block, node_ids: Sequence[int]) -> None:
        if block.id in self.blocks:
            raise DomainError(f"block {block.id} already stored")
        if block.size_bytes > self.block_size_bytes:
            raise DomainError(
                f"block {block.id}: {block.size_bytes} bytes exceeds block size {self.block_size_bytes}"
            )
        if len(set(node_ids)) != len(node_ids):
            raise DomainError(f"block {block.id}: duplicate holders {list(node_ids)}")
        for nid in node_ids:
            self._check_target(nid, block)
        self.blocks[block.id] = block
        self.placements[block.id] = BlockPlacement(block_id=block.id, holder_node_ids=list(node_ids))
        for nid in node_ids:
            self.nodes[nid].used_bytes += block.size_bytes

    def add_replica(self, block_id: int, node_id: int) -> None:
        block = self.blocks.get(block_id)
        if block is None:
            raise DomainError(f"unknown block {block_id}")
        placement = self.placements.setdefault(block_id, BlockPlacement(block_id=block_id))
        if node_id in placement.holder_node_ids:
            raise DomainError(f"node {node_id} already holds block {block_id}")
        self._check_target(node_id, block)
        placement.holder_node_ids.append(node_id)
        self.nodes[node_id].used_bytes += block.size_bytes

    def kill_node(self, node_id: int) -> bool:
        """
        Mark a node dead. Its accounting stays; returns False if it was already dead.
        """
        node = self.nodes.get(node_id)
        if node is None:
            raise DomainError(f"unknown node {node_id}")
        if not node.alive:
            return False
        node.alive = False
        return True

    def _check_target(self, node_id: int, block: Block) -> None:
        node = self.nodes.get(node_id)
        if node is None:
            raise DomainError(f"unknown node {node_id}")
        if not node.alive:
            raise DomainError(f"node {node_id} is dead")
        if node.free_bytes < block.size_bytes:
            raise DomainError(
                f"node {node_id} has {node.free_bytes} free bytes, block {block.id} needs {block.size_bytes}"
            )

    # ---- serialization ----------------------------------------------
    def to_dict(self) -> Dict[str, Any]:
        return {
            "block_size_bytes": self.block_size_bytes,
            "availability_target": self.availability_target,
            "nodes": [
                {
                    "id": n.id,
                    "label": n.spec.name,
                    "capacity_bytes": n.capacity_bytes,
                    "failure_probability": n.spec.failure_probability,
                    "used_bytes": n.used_bytes,
                    "alive": n.alive,
                }
                for n in self.nodes.values()
            ],
            "blocks": [
                {
                    "id": b.id,
                    "file_id": b.file_id,
                    "size_bytes": b.size_bytes,
                    "holders": self.holders(b.id),
                }
                for b in sorted(self.blocks.values(), key=lambda b: b.id)
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ClusterState":
        """
        Rebuild a state document written by `to_dict`. Stored used_bytes are kept as
        written so `validate_cluster` can still flag accounting drift.
        """
        if not isinstance(data, Mapping):
            raise ConfigError("state: expected a JSON object")
        try:
            specs = []
            flags: Dict[int, tuple] = {}
            for idx, raw in enumerate(_require(data, "nodes", list, "state")):
                where = f"nodes[{idx}]"
                nid = _require(raw, "id", int, where)
                specs.append(
                    NodeSpec(
                        id=nid,
                        capacity_bytes=_require(raw, "capacity_bytes", int, where),
                        failure_probability=float(_require(raw, "failure_probability", (int, float), where)),
                        label=raw.get("label"),
                    )
                )
                flags[nid] = (
                    _require(raw, "used_bytes", int, where),
                    bool(_require(raw, "alive", bool, where)),
                )
            state = cls.build(
                specs,
                block_size_bytes=_require(data, "block_size_bytes", int, "state"),
                availability_target=float(_require(data, "availability_target", (int, float), "state")),
            )
            for nid, (used, alive) in flags.items():
                state.nodes[nid].used_bytes = used
                state.nodes[nid].alive = alive
            for idx, raw in enumerate(_require(data, "blocks", list, "state")):
                where = f"blocks[{idx}]"
                block = Block(
                    id=_require(raw, "id", int, where),
                    file_id=_require(raw, "file_id", int, where),
                    size_bytes=_require(raw, "size_bytes", int, where),
                )
                holders = _require(raw, "holders", list, where)
                for pos, nid in enumerate(holders):
                    if isinstance(nid, bool) or not isinstance(nid, int):
                        raise ConfigError(f"{where}.holders[{pos}]: expected a node id, got {nid!r}")
                state.blocks[block.id] = block
                state.placements[block.id] = BlockPlacement(block_id=block.id, holder_node_ids=list(holders))
        except DomainError as exc:
            raise ConfigError(f"state: {exc}") from exc
        return state


def _require(obj: Any, key: str, types: Any, where: str) -> Any:
    if not isinstance(obj, Mapping) or key not in obj:
        raise ConfigError(f"{where}: missing key '{key}'")
    value = obj[key]
    # bool is an int subclass; only accept it where bool is asked for
    if isinstance(value, bool) and types is not bool:
        raise ConfigError(f"{where}.{key}: unexpected boolean")
    if not isinstance(value, types):
        raise ConfigError(f"{where}.{key}: wrong type {type(value).__name__}")
    return value


def validate_cluster(state: ClusterState) -> List[str]:
    """
    Return one description per broken invariant; an empty list means the state is valid.
    """
    problems: List[str] = []

    if state.block_size_bytes <= 0:
        problems.append(f"cluster: block_size_bytes {state.block_size_bytes} must be > 0")
    if not 0.0 <= state.availability_target < 1.0:
        problems.append(f"cluster: availability_target {state.availability_target} outside [0, 1)")

    expected_used: Dict[int, int] = {nid: 0 for nid in state.nodes}

    for block_id, placement in state.placements.items():
        block = state.blocks.get(block_id)
        if block is None or placement.block_id != block_id:
            problems.append(f"placement {block_id}: references missing block {placement.block_id}")
            continue
        if len(set(placement.holder_node_ids)) != len(placement.holder_node_ids):
            problems.append(f"block {block_id}: duplicate holders {placement.holder_node_ids}")
        for nid in dict.fromkeys(placement.holder_node_ids):
            if nid not in state.nodes:
                problems.append(f"block {block_id}: holder node {nid} does not exist")
                continue
            expected_used[nid] += block.size_bytes

    for block_id, block in state.blocks.items():
        if block.id != block_id:
            problems.append(f"block {block_id}: keyed under a different id {block.id}")
        if not 0 < block.size_bytes <= state.block_size_bytes:
            problems.append(
                f"block {block_id}: size {block.size_bytes} outside (0, {state.block_size_bytes}]"
            )

    for nid, node in state.nodes.items():
        spec = node.spec
        if spec.id != nid:
            problems.append(f"node {nid}: keyed under a different id {spec.id}")
        if spec.capacity_bytes <= 0:
            problems.append(f"node {nid}: capacity_bytes {spec.capacity_bytes} must be > 0")
        if not 0.0 <= spec.failure_probability < 1.0 or math.isnan(spec.failure_probability):
            problems.append(f"node {nid}: failure_probability {spec.failure_probability} outside [0, 1)")
        if not 0 <= node.used_bytes <= spec.capacity_bytes:
            problems.append(
                f"node {nid}: used_bytes {node.used_bytes} outside [0, {spec.capacity_bytes}]"
            )
        if node.used_bytes != expected_used[nid]:
            problems.append(
                f"node {nid}: used_bytes {node.used_bytes} != {expected_used[nid]} held by its blocks"
            )

    return problems
