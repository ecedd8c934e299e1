from pathlib import Path
from typing import Optional, Sequence

from replica_planner.models import ClusterState, NodeSpec
from replica_planner.utils import MB

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
SCENARIOS = CONFIGS / "scenarios"


def make_cluster(
    capacities: Sequence[int],
    failure_probabilities: Sequence[float],
    ids: Optional[Sequence[int]] = None,
    block_size: int = 64 * MB,
    alpha: float = 0.99,
) -> ClusterState:
    ids = list(ids) if ids is not None else list(range(1, len(capacities) + 1))
    specs = [NodeSpec(i, c, f) for i, c, f in zip(ids, capacities, failure_probabilities)]
    return ClusterState.build(specs, block_size_bytes=block_size, availability_target=alpha)
