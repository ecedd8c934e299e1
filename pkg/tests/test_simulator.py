import copy

import pytest

from replica_planner.errors import DomainError, ScenarioError
from replica_planner.models import validate_cluster
from replica_planner.services.simulator import (
    Scenario,
    failure_sweep,
    load_scenario,
    run_scenario,
    split_into_blocks,
    sweep_csv,
)
from replica_planner.utils import GB, MB

from helpers import SCENARIOS


def _cluster(fs, capacity_gb=80):
    return {
        "block_size_mb": 64,
        "availability_target": 0.99,
        "nodes": [
            {"id": i, "capacity_gb": capacity_gb, "failure_probability": f}
            for i, f in enumerate(fs, start=1)
        ],
    }


def _scenario(fs, files=10, size_mb=1000, **extra):
    data = {
        "cluster": _cluster(fs),
        "workload": [{"file_id": i, "size_mb": size_mb} for i in range(1, files + 1)],
        "replica_mode": "optimum",
        "seed": 0,
    }
    data.update(extra)
    return data


def test_split_file_into_blocks():
    blocks = split_into_blocks(1, 1000 * MB, 64 * MB)
    assert len(blocks) == 16
    assert [b.size_bytes for b in blocks[-2:]] == [64 * MB, 40 * MB]
    assert sum(b.size_bytes for b in blocks) == 1000 * MB

    exact = split_into_blocks(2, 128 * MB, 64 * MB, start_id=16)
    assert [b.id for b in exact] == [16, 17]
    assert [b.size_bytes for b in exact] == [64 * MB, 64 * MB]

    assert [b.size_bytes for b in split_into_blocks(3, 1, 64 * MB)] == [1]
    with pytest.raises(DomainError):
        split_into_blocks(4, 0, 64 * MB)


@pytest.mark.parametrize("factor", [1, 2, 3])
def test_ten_gigabyte_workload_totals(factor):
    result = run_scenario(load_scenario(SCENARIOS / f"fig6_r{factor}.json"))
    state = result.final_state

    assert len(result.ingest_log) == 160
    assert len(state.blocks) == 160
    assert state.logical_bytes() == 10000 * MB
    assert state.logical_bytes() == 9.765625 * GB
    assert state.physical_bytes() == factor * state.logical_bytes()
    assert result.replica_count == factor
    assert result.shortfalls == []
    assert validate_cluster(state) == []


def test_empty_workload_leaves_cluster_unchanged():
    scenario = Scenario.from_dict(_scenario([0.01] * 4, files=0))
    result = run_scenario(scenario)
    assert result.snapshots == []
    assert set(result.final_used.values()) == {0}


def test_runs_are_deterministic():
    for name in ("fig7.json", "fig6_r3.json", "failover.json"):
        scenario = load_scenario(SCENARIOS / name)
        first = run_scenario(scenario)
        second = run_scenario(scenario)
        assert first.timeseries_csv() == second.timeseries_csv()
        assert first.final_state.to_dict() == second.final_state.to_dict()


def test_random_baseline_depends_on_seed():
    base = _scenario([0.01] * 4, replica_mode={"fixed": 1}, placement="hdfs_default")
    one = run_scenario(Scenario.from_dict(base))
    other = run_scenario(Scenario.from_dict(dict(base, seed=42)))
    assert one.final_state.physical_bytes() == other.final_state.physical_bytes()
    assert [r.holders for r in one.ingest_log] != [r.holders for r in other.ingest_log]


@pytest.mark.parametrize("fixed", [1, 2])
def test_homogeneous_cluster_fills_evenly(fixed):
    scenario = Scenario.from_dict(_scenario([0.05] * 4, replica_mode={"fixed": fixed}))
    result = run_scenario(scenario)
    share = fixed * 10000 * MB / 4
    for used in result.final_used.values():
        assert abs(used - share) <= 64 * MB
    for snap in result.snapshots:
        used = [m.used_bytes for m in snap.report.per_node]
        assert max(used) - min(used) <= 64 * MB


def test_heterogeneous_run_conserves_bytes():
    result = run_scenario(load_scenario(SCENARIOS / "fig7.json"))
    state = result.final_state
    assert result.replica_count == 2
    assert sum(result.final_used.values()) == 2 * state.logical_bytes()
    assert all(len(rec.holders) == 2 for rec in result.ingest_log)
    assert validate_cluster(state) == []
    # the big machine takes the largest share
    assert max(result.final_used, key=result.final_used.get) == 0


def test_failover_repair_restores_replicas():
    result = run_scenario(load_scenario(SCENARIOS / "failover.json"))
    state = result.final_state
    assert not state.nodes[2].alive
    assert result.shortfalls == []
    for block_id in state.blocks:
        assert len(state.alive_holders(block_id)) == result.replica_count
    assert validate_cluster(state) == []
    assert [s.event for s in result.snapshots[-2:]] == ["kill_node(2)", "repair"]


def test_timeseries_layout():
    result = run_scenario(load_scenario(SCENARIOS / "fig7.json"))
    lines = result.timeseries_csv().splitlines()
    assert lines[0] == "step,node_id,used_bytes,dsu_percent,load_balance"
    assert len(lines) == 1 + 10 * 5
    assert lines[1].startswith("1,0,")


def test_shortfall_recorded_not_raised():
    scenario = Scenario.from_dict(_scenario([0.01, 0.01], files=1, size_mb=100, replica_mode={"fixed": 3}))
    result = run_scenario(scenario)
    assert len(result.shortfalls) == 2
    assert all(s.missing == 1 for s in result.shortfalls)
    assert all(len(rec.holders) == 2 for rec in result.ingest_log)
    assert validate_cluster(result.final_state) == []


def test_fig9_sweep_shrinks_share_of_flakier_node():
    base = load_scenario(SCENARIOS / "fig9.json")
    f_values = [round(0.01 * i, 2) for i in range(1, 11)]
    points = failure_sweep(base, 1, f_values)
    share = [point.used_bytes[1] for point in points]
    assert all(later <= earlier for earlier, later in zip(share, share[1:]))
    assert share[-1] < share[0]


def test_sweep_point_at_base_value_matches_plain_run():
    base = load_scenario(SCENARIOS / "fig9.json")
    (point,) = failure_sweep(base, 1, [0.01])
    assert point.used_bytes == run_scenario(base).final_used


def test_homogeneous_sweep_stays_balanced():
    base = Scenario.from_dict(_scenario([0.03] * 4))
    for point in failure_sweep(base, 2, [0.03]):
        used = list(point.used_bytes.values())
        assert max(used) - min(used) <= 64 * MB


def test_sweep_rejects_unknown_node():
    base = Scenario.from_dict(_scenario([0.03] * 4))
    with pytest.raises(DomainError):
        failure_sweep(base, 9, [0.1])


def test_sweep_csv_layout():
    base = Scenario.from_dict(_scenario([0.03] * 2, files=1))
    text = sweep_csv(failure_sweep(base, 1, [0.01, 0.02]))
    lines = text.splitlines()
    assert lines[0] == "f,node_id,used_bytes"
    assert len(lines) == 1 + 2 * 2


def test_default_events_ingest_in_order():
    scenario = Scenario.from_dict(_scenario([0.01] * 4, files=3))
    assert [(e.step, e.kind, e.target) for e in scenario.events] == [
        (1, "ingest_file", 1),
        (2, "ingest_file", 2),
        (3, "ingest_file", 3),
    ]


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d.pop("cluster"), "cluster"),
        (lambda d: d.update(replica_mode="best"), "replica_mode"),
        (lambda d: d.update(events=[{"step": 1, "kill_node": 9}]), "unknown node 9"),
        (lambda d: d.update(events=[{"step": 1, "ingest_file": 99}]), "unknown file 99"),
        (
            lambda d: d.update(events=[{"step": 2, "ingest_file": 1}, {"step": 2, "ingest_file": 2}]),
            "strictly increasing",
        ),
        (lambda d: d.update(events=[{"step": 1, "ingest_file": 1, "repair": True}]), "exactly one"),
        (lambda d: d.update(placement="round_robin"), "placement"),
        (lambda d: d["workload"][0].pop("size_mb"), "size_mb"),
        (lambda d: d["cluster"]["nodes"][0].pop("capacity_gb"), "capacity_gb"),
    ],
)
def test_malformed_scenarios(mutate, message):
    data = copy.deepcopy(_scenario([0.01] * 4, files=2))
    mutate(data)
    with pytest.raises(ScenarioError, match=message):
        Scenario.from_dict(data)


def test_missing_scenario_file(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "absent.json")


def test_unknown_weight_mode_rejected():
    scenario = Scenario.from_dict(_scenario([0.01] * 4, files=1))
    with pytest.raises(DomainError, match="weight_mode"):
        run_scenario(scenario, weight_mode="cpu")


def test_non_finite_file_size_rejected():
    data = _scenario([0.01] * 4, files=1)
    data["workload"][0]["size_mb"] = float("inf")
    with pytest.raises(ScenarioError, match="size_mb"):
        Scenario.from_dict(data)
