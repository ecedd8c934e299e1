import pytest

from replica_planner.models import ClusterState
from replica_planner.utils import GB

from helpers import make_cluster


@pytest.fixture
def four_nodes() -> ClusterState:
    return make_cluster([80 * GB] * 4, [0.01, 0.02, 0.03, 0.04])
