from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List

from ..errors import DomainError
from ..models import ClusterState

CSV_HEADER = ("node_id", "used_bytes", "dsu_percent", "load_balance")


@dataclass(frozen=True)
class NodeMetrics:
    node_id: int
    used_bytes: int
    dsu_percent: float
    load_balance: float


@dataclass
class MetricsReport:
    per_node: List[NodeMetrics] = field(default_factory=list)
    cluster_used_bytes: int = 0
    cluster_capacity_bytes: int = 0
    cluster_dsu_percent: float = 0.0
    min_load_balance: float = 1.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def csv_rows(self) -> Iterable[tuple]:
        for m in self.per_node:
            yield (m.node_id, m.used_bytes, m.dsu_percent, m.load_balance)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(self.csv_rows())
        return buf.getvalue()


def disk_space_utilization(used_bytes: int, capacity_bytes: int) -> float:
    """
    Used bytes as a percentage of capacity.
    """
    if capacity_bytes <= 0:
        raise DomainError(f"capacity must be > 0 (got {capacity_bytes})")
    if not 0 <= used_bytes <= capacity_bytes:
        raise DomainError(f"used bytes {used_bytes} outside [0, {capacity_bytes}]")
    return used_bytes * 100 / capacity_bytes


def load_balance(node_used: int, node_capacity: int, cluster_used: int, cluster_capacity: int) -> float:
    """
    1 minus the gap between the node's fill fraction and the cluster's; 1 is perfectly balanced.
    """
    if node_capacity <= 0 or cluster_capacity <= 0:
        raise DomainError("capacities must be > 0")
    if not 0 <= node_used <= node_capacity:
        raise DomainError(f"node used {node_used} outside [0, {node_capacity}]")
    if not 0 <= cluster_used <= cluster_capacity:
        raise DomainError(f"cluster used {cluster_used} outside [0, {cluster_capacity}]")
    return 1.0 - abs(node_used / node_capacity - cluster_used / cluster_capacity)


def cluster_report(cluster: ClusterState, include_dead: bool = True) -> MetricsReport:
    nodes = [n for n in cluster.nodes.values() if include_dead or n.alive]
    used = sum(n.used_bytes for n in nodes)
    capacity = sum(n.capacity_bytes for n in nodes)
    if not nodes:
        return MetricsReport()

    per_node = [
        NodeMetrics(
            node_id=n.id,
            used_bytes=n.used_bytes,
            dsu_percent=disk_space_utilization(n.used_bytes, n.capacity_bytes),
            load_balance=load_balance(n.used_bytes, n.capacity_bytes, used, capacity),
        )
        for n in nodes
    ]
    return MetricsReport(
        per_node=per_node,
        cluster_used_bytes=used,
        cluster_capacity_bytes=capacity,
        cluster_dsu_percent=disk_space_utilization(used, capacity),
        min_load_balance=min(m.load_balance for m in per_node),
    )


def parse_report_csv(text: str) -> List[NodeMetrics]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise DomainError(f"unexpected CSV header {reader.fieldnames}")
    return [
        NodeMetrics(
            node_id=int(row["node_id"]),
            used_bytes=int(row["used_bytes"]),
            dsu_percent=float(row["dsu_percent"]),
            load_balance=float(row["load_balance"]),
        )
        for row in reader
    ]
