from __future__ import annotations

import csv
import io
import logging
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from ..config import WEIGHT_MODES, ClusterConfig, read_json
from ..errors import ConfigError, DomainError, InsufficientNodes, ScenarioError
from ..models import Block, ClusterState
from ..utils import mb_to_bytes
from .metrics import MetricsReport, cluster_report
from .policy import apply_repair, decide_for_cluster, place_replicas, repair_plan

log = logging.getLogger(__name__)

PLACEMENTS = ("weighted", "hdfs_default")
EVENT_KINDS = ("ingest_file", "kill_node", "repair")
TIMESERIES_HEADER = ("step", "node_id", "used_bytes", "dsu_percent", "load_balance")


@dataclass(frozen=True)
class FileSpec:
    file_id: int
    size_bytes: int


@dataclass(frozen=True)
class ReplicaMode:
    """`fixed` holds k for a fixed factor; None selects the availability-driven count."""

    fixed: Optional[int] = None

    @property
    def optimum(self) -> bool:
        return self.fixed is None

    def describe(self) -> str:
        return "optimum" if self.optimum else f"fixed({self.fixed})"


@dataclass(frozen=True)
class ScenarioEvent:
    step: int
    kind: str
    target: Optional[int] = None

    def describe(self) -> str:
        return self.kind if self.target is None else f"{self.kind}({self.target})"


@dataclass(frozen=True)
class Scenario:
    cluster: ClusterConfig
    workload: Tuple[FileSpec, ...] = ()
    replica_mode: ReplicaMode = field(default_factory=ReplicaMode)
    events: Tuple[ScenarioEvent, ...] = ()
    seed: int = 0
    placement: str = "weighted"
    weight_mode: Optional[str] = None

    def validate(self) -> None:
        file_ids = [f.file_id for f in self.workload]
        if len(set(file_ids)) != len(file_ids):
            raise ScenarioError("workload: duplicate file_id")
        for f in self.workload:
            if f.size_bytes <= 0:
                raise ScenarioError(f"workload: file {f.file_id} has non-positive size")
        if self.placement not in PLACEMENTS:
            raise ScenarioError(f"placement: expected one of {PLACEMENTS}, got {self.placement!r}")
        if self.weight_mode is not None and self.weight_mode not in WEIGHT_MODES:
            raise ScenarioError(f"weight_mode: expected one of {WEIGHT_MODES}, got {self.weight_mode!r}")
        if self.replica_mode.fixed is not None and self.replica_mode.fixed < 1:
            raise ScenarioError("replica_mode.fixed: must be >= 1")

        node_ids = {spec.id for spec in self.cluster.nodes}
        known_files = set(file_ids)
        ingested: set[int] = set()
        last_step: Optional[int] = None
        for idx, event in enumerate(self.events):
            where = f"events[{idx}]"
            if last_step is not None and event.step <= last_step:
                raise ScenarioError(f"{where}.step: steps must be strictly increasing ({event.step} after {last_step})")
            last_step = event.step
            if event.kind == "ingest_file":
                if event.target not in known_files:
                    raise ScenarioError(f"{where}.ingest_file: unknown file {event.target}")
                if event.target in ingested:
                    raise ScenarioError(f"{where}.ingest_file: file {event.target} ingested twice")
                ingested.add(event.target)
            elif event.kind == "kill_node":
                if event.target not in node_ids:
                    raise ScenarioError(f"{where}.kill_node: unknown node {event.target}")
            elif event.kind != "repair":
                raise ScenarioError(f"{where}: unknown event kind {event.kind!r}")

    def with_failure_probability(self, node_id: int, value: float) -> "Scenario":
        return replace(self, cluster=self.cluster.with_failure_probability(node_id, value))

    # ---- parsing ------------------------------------------------------
    @classmethod
    def from_dict(cls, data: Any) -> "Scenario":
        if not isinstance(data, Mapping):
            raise ScenarioError("scenario: expected a JSON object")
        if "cluster" not in data:
            raise ScenarioError("scenario: missing key 'cluster'")
        try:
            cluster = ClusterConfig.from_dict(data["cluster"])
        except ConfigError as exc:
            raise ScenarioError(f"cluster: {exc}") from exc

        workload: List[FileSpec] = []
        raw_workload = data.get("workload", [])
        if not isinstance(raw_workload, list):
            raise ScenarioError("workload: expected a list")
        for idx, raw in enumerate(raw_workload):
            where = f"workload[{idx}]"
            file_id = _int_field(raw, "file_id", where)
            size_mb = raw.get("size_mb") if isinstance(raw, Mapping) else None
            if isinstance(size_mb, bool) or not isinstance(size_mb, (int, float)):
                raise ScenarioError(f"{where}.size_mb: expected a number")
            if isinstance(size_mb, float) and not math.isfinite(size_mb):
                raise ScenarioError(f"{where}.size_mb: expected a finite number, got {size_mb}")
            workload.append(FileSpec(file_id=file_id, size_bytes=mb_to_bytes(size_mb)))

        mode = _parse_replica_mode(data.get("replica_mode", "optimum"))

        if "events" in data:
            raw_events = data["events"]
            if not isinstance(raw_events, list):
                raise ScenarioError("events: expected a list")
            events = [_parse_event(raw, f"events[{idx}]") for idx, raw in enumerate(raw_events)]
        else:
            events = [ScenarioEvent(step, "ingest_file", f.file_id) for step, f in enumerate(workload, start=1)]

        seed = data.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ScenarioError("seed: expected an integer")
        placement = data.get("placement", "weighted")
        weight_mode = data.get("weight_mode")

        scenario = cls(
            cluster=cluster,
            workload=tuple(workload),
            replica_mode=mode,
            events=tuple(events),
            seed=seed,
            placement=placement,
            weight_mode=weight_mode,
        )
        scenario.validate()
        return scenario


def _int_field(raw: Any, key: str, where: str) -> int:
    if not isinstance(raw, Mapping) or key not in raw:
        raise ScenarioError(f"{where}: missing key '{key}'")
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{where}.{key}: expected an integer")
    return value


def _parse_replica_mode(raw: Any) -> ReplicaMode:
    if raw == "optimum":
        return ReplicaMode()
    if isinstance(raw, Mapping) and set(raw) == {"fixed"}:
        return ReplicaMode(fixed=_int_field(raw, "fixed", "replica_mode"))
    raise ScenarioError('replica_mode: expected "optimum" or {"fixed": k}')


def _parse_event(raw: Any, where: str) -> ScenarioEvent:
    step = _int_field(raw, "step", where)
    kinds = [k for k in EVENT_KINDS if k in raw]
    if len(kinds) != 1:
        raise ScenarioError(f"{where}: expected exactly one of {EVENT_KINDS}")
    kind = kinds[0]
    if kind == "repair":
        if raw["repair"] is not True:
            raise ScenarioError(f"{where}.repair: expected true")
        return ScenarioEvent(step, kind)
    return ScenarioEvent(step, kind, _int_field(raw, kind, where))


def load_scenario(path: str | Path) -> Scenario:
    try:
        data = read_json(path)
    except ConfigError as exc:
        raise ScenarioError(str(exc)) from exc
    return Scenario.from_dict(data)


# ---- results ----------------------------------------------------------


@dataclass(frozen=True)
class StepSnapshot:
    step: int
    event: str
    report: MetricsReport


@dataclass(frozen=True)
class Shortfall:
    step: int
    block_id: int
    missing: int


@dataclass(frozen=True)
class IngestRecord:
    step: int
    block_id: int
    file_id: int
    holders: Tuple[int, ...]


@dataclass
class ScenarioResult:
    snapshots: List[StepSnapshot]
    final_state: ClusterState
    final_used: Dict[int, int]
    shortfalls: List[Shortfall]
    replica_count: int
    ingest_log: List[IngestRecord] = field(default_factory=list)

    def timeseries_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TIMESERIES_HEADER)
        for snap in self.snapshots:
            for m in snap.report.per_node:
                writer.writerow((snap.step, m.node_id, m.used_bytes, m.dsu_percent, m.load_balance))
        return buf.getvalue()


# ---- engine -----------------------------------------------------------


def split_into_blocks(file_id: int, file_size_bytes: int, block_size_bytes: int, start_id: int = 0) -> List[Block]:
    """
    Fixed-size blocks with a final remainder block; ids run from `start_id`.
    """
    if file_size_bytes <= 0:
        raise DomainError(f"file {file_id}: size must be > 0 (got {file_size_bytes})")
    if block_size_bytes <= 0:
        raise DomainError(f"block size must be > 0 (got {block_size_bytes})")
    count = math.ceil(file_size_bytes / block_size_bytes)
    blocks = []
    for idx in range(count):
        size = min(block_size_bytes, file_size_bytes - idx * block_size_bytes)
        blocks.append(Block(id=start_id + idx, file_id=file_id, size_bytes=size))
    return blocks


def _hdfs_default_targets(state: ClusterState, block: Block, count: int, rng: random.Random) -> List[int]:
    """
    Stock flat-cluster behaviour with an off-cluster writer: distinct random nodes.
    """
    eligible = [n.id for n in state.nodes.values() if n.alive and n.free_bytes >= block.size_bytes]
    chosen = rng.sample(eligible, min(count, len(eligible)))
    if len(chosen) < count:
        raise InsufficientNodes(
            f"block {block.id}: {len(eligible)} eligible nodes for {count} replicas", partial=chosen
        )
    return chosen


def run_scenario(
    scenario: Scenario,
    weight_mode: str = "free",
    max_replicas: Optional[int] = None,
    accept_clamped: bool = False,
) -> ScenarioResult:
    scenario.validate()
    mode = scenario.weight_mode or weight_mode
    if mode not in WEIGHT_MODES:
        raise DomainError(f"weight_mode must be one of {WEIGHT_MODES} (got {mode!r})")
    state = scenario.cluster.to_state()
    files = {f.file_id: f for f in scenario.workload}
    rng = random.Random(scenario.seed)

    if scenario.replica_mode.optimum:
        replica_count = decide_for_cluster(state, max_replicas, accept_clamped).replica_count
    else:
        replica_count = scenario.replica_mode.fixed
    log.info(
        "scenario: %d nodes, %d files, %s placement, replica factor %d (%s)",
        len(state.nodes),
        len(files),
        scenario.placement,
        replica_count,
        scenario.replica_mode.describe(),
    )

    snapshots: List[StepSnapshot] = []
    shortfalls: List[Shortfall] = []
    ingest_log: List[IngestRecord] = []
    next_block_id = 0

    for event in scenario.events:
        if event.kind == "ingest_file":
            spec = files[event.target]
            blocks = split_into_blocks(spec.file_id, spec.size_bytes, state.block_size_bytes, next_block_id)
            next_block_id += len(blocks)
            for block in blocks:
                try:
                    if scenario.placement == "hdfs_default":
                        holders = _hdfs_default_targets(state, block, replica_count, rng)
                    else:
                        holders = place_replicas(state, block, replica_count, mode)
                except InsufficientNodes as exc:
                    holders = list(exc.partial or [])
                    shortfalls.append(Shortfall(event.step, block.id, replica_count - len(holders)))
                    log.debug("step %d: %s", event.step, exc)
                state.commit_block(block, holders)
                ingest_log.append(IngestRecord(event.step, block.id, block.file_id, tuple(holders)))
        elif event.kind == "kill_node":
            if not state.kill_node(event.target):
                log.info("step %d: node %d already dead", event.step, event.target)
        else:
            plan = repair_plan(state, replica_count, mode, strict=False)
            apply_repair(state, plan)
            shortfalls.extend(Shortfall(event.step, block_id, missing) for block_id, missing in plan.shortfalls)
            log.info("step %d: repair created %d copies", event.step, len(plan.entries))
        snapshots.append(StepSnapshot(event.step, event.describe(), cluster_report(state)))

    if shortfalls:
        log.info("scenario finished with %d shortfall(s)", len(shortfalls))
    return ScenarioResult(
        snapshots=snapshots,
        final_state=state,
        final_used={nid: n.used_bytes for nid, n in state.nodes.items()},
        shortfalls=shortfalls,
        replica_count=replica_count,
        ingest_log=ingest_log,
    )


@dataclass(frozen=True)
class SweepPoint:
    f: float
    used_bytes: Dict[int, int]


def failure_sweep(
    base: Scenario,
    node_id: int,
    f_values: Sequence[float],
    weight_mode: str = "free",
    max_replicas: Optional[int] = None,
    accept_clamped: bool = False,
) -> List[SweepPoint]:
    """
    Rerun `base` once per failure probability assigned to `node_id`.
    """
    if all(spec.id != node_id for spec in base.cluster.nodes):
        raise DomainError(f"unknown node {node_id}")
    points = []
    for f in f_values:
        result = run_scenario(base.with_failure_probability(node_id, f), weight_mode, max_replicas, accept_clamped)
        points.append(SweepPoint(f=f, used_bytes=dict(result.final_used)))
    return points


def sweep_csv(points: Sequence[SweepPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("f", "node_id", "used_bytes"))
    for point in points:
        for nid, used in sorted(point.used_bytes.items()):
            writer.writerow((point.f, nid, used))
    return buf.getvalue()
