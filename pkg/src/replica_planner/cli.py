from __future__ import annotations

import csv
import io
import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional, Tuple

import typer
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from .config import Settings, load_cluster_config, load_settings, read_json
from .errors import (
    BlockTooLarge,
    ConfigError,
    DomainError,
    InsufficientNodes,
    ScenarioError,
    UnreachableTarget,
)
from .logs import configure_logging
from .models import Block, ClusterState, validate_cluster
from .services.metrics import MetricsReport, cluster_report
from .services.policy import decide_for_cluster, node_availability, node_weight, place_replicas
from .services.reliability import LossModelParams, data_loss_probability, monte_carlo_loss, table2_sweep
from .services.simulator import failure_sweep, load_scenario, run_scenario, sweep_csv
from .utils import GB, format_probability, human_gb, parse_float_list

EXIT_INPUT = 2
EXIT_INFEASIBLE = 3

log = logging.getLogger(__name__)
console = Console()
err_console = Console(stderr=True)
app = typer.Typer(help="Replica planning, data-loss analysis and cluster simulation.", no_args_is_help=True)


def _load_settings(path: Optional[Path]) -> Settings:
    try:
        settings = load_settings(path)
    except ConfigError as exc:
        configure_logging()
        err_console.print(f"[red]Input error:[/red] {escape(str(exc))}")
        raise typer.Exit(code=EXIT_INPUT)
    configure_logging(settings.logging.level)
    log.debug("settings: %s", settings.to_dict())
    return settings


@contextmanager
def _exit_codes() -> Iterator[None]:
    """
    Map library errors onto exit codes: 2 for bad input, 3 for policy infeasibility.
    OSError lands on 2 as well; it comes from unwritable output paths.
    """
    try:
        yield
    except (UnreachableTarget, InsufficientNodes) as exc:
        err_console.print(f"[red]Infeasible:[/red] {escape(str(exc))}")
        raise typer.Exit(code=EXIT_INFEASIBLE)
    except (ConfigError, ScenarioError, DomainError, BlockTooLarge, OSError) as exc:
        err_console.print(f"[red]Input error:[/red] {escape(str(exc))}")
        raise typer.Exit(code=EXIT_INPUT)


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        typer.echo(text, nl=False)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    log.info("wrote %s", out)


def _csv_text(header: Tuple[str, ...], rows: List[tuple]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _check_format(fmt: str) -> str:
    fmt = fmt.lower()
    if fmt not in ("csv", "json"):
        err_console.print(f"[red]Input error:[/red] --format must be csv or json, got {escape(fmt)}")
        raise typer.Exit(code=EXIT_INPUT)
    return fmt


@app.command("plan")
def plan(
    cluster: Path = typer.Option(..., "--cluster", help="Cluster config JSON."),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the plan to this file."),
    fmt: str = typer.Option("json", "--format", help="csv|json"),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Settings YAML path."),
):
    """
    Compute R_opt, node weights and the placement of one probe block.
    """
    settings = _load_settings(config)
    fmt = _check_format(fmt)
    with _exit_codes():
        state = load_cluster_config(cluster).to_state()
        decision = decide_for_cluster(
            state, settings.placement.max_replicas, settings.placement.accept_clamped
        )
        probe = Block(id=0, file_id=0, size_bytes=state.block_size_bytes)
        placement = place_replicas(state, probe, decision.replica_count, settings.placement.weight_mode)

    rank = {nid: idx for idx, nid in enumerate(placement, start=1)}
    weight_basis = settings.placement.weight_mode
    rows = []
    for node in state.nodes.values():
        basis = node.free_bytes if weight_basis == "free" else node.capacity_bytes
        rows.append(
            {
                "node_id": node.id,
                "label": node.spec.name,
                "capacity_bytes": node.capacity_bytes,
                "failure_probability": node.spec.failure_probability,
                "availability": node_availability(node.spec.failure_probability),
                "weight": node_weight(basis, node.spec.failure_probability),
                "probe_rank": rank.get(node.id),
            }
        )

    decimals = settings.output.probability_decimals
    table = Table(title=f"Cluster plan ({cluster.name})")
    table.add_column("Node", justify="right")
    table.add_column("Label")
    table.add_column("Capacity", justify="right")
    table.add_column("f", justify="right")
    table.add_column("Weight (GB)", justify="right")
    table.add_column("Probe", justify="right")
    for row in rows:
        table.add_row(
            str(row["node_id"]),
            row["label"],
            human_gb(row["capacity_bytes"]),
            format_probability(row["failure_probability"], decimals),
            f"{row['weight'] / GB:.3f}",
            str(row["probe_rank"] or ""),
        )
    console.print(table)
    console.print(f"R_opt: [bold]{decision.replica_count}[/bold]")
    console.print(f"Achieved availability: {format_probability(decision.achieved_availability, decimals)}")
    console.print(f"Mean failure probability: {format_probability(decision.mean_failure_probability, decimals)}")
    console.print(f"Probe placement: {placement}")

    if out is not None:
        if fmt == "json":
            document = {
                "replica_count": decision.replica_count,
                "achieved_availability": decision.achieved_availability,
                "mean_failure_probability": decision.mean_failure_probability,
                "probe_placement": placement,
                "nodes": rows,
            }
            text = json.dumps(document, indent=2) + "\n"
        else:
            header = tuple(rows[0].keys())
            text = _csv_text(header, [tuple("" if v is None else v for v in r.values()) for r in rows])
        with _exit_codes():
            _emit(text, out)
        console.print(f"[bold green]Saved[/bold green] -> {out}")


def _parse_params(raw: str) -> LossModelParams:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 4:
        raise DomainError(f"--params expects n,p,r,b (got {raw!r})")
    try:
        n, p, r, b = int(parts[0]), float(parts[1]), int(parts[2]), float(parts[3])
    except ValueError as exc:
        raise DomainError(f"--params: {exc}") from exc
    return LossModelParams(n=n, p=p, r=r, b=b)


@app.command("analyze")
def analyze(
    table2: bool = typer.Option(False, "--table2", help="Run the nine-row availability-0.99 sweep."),
    params: Optional[str] = typer.Option(None, "--params", help="Single point n,p,r,b."),
    montecarlo: Tuple[int, int] = typer.Option(
        (None, None), "--montecarlo", help="Add a Monte Carlo estimate: <trials> <seed>."
    ),
    workers: Optional[int] = typer.Option(None, "--workers", help="Monte Carlo threads."),
    out: Optional[Path] = typer.Option(None, "--out", help="Write CSV here instead of stdout."),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Settings YAML path."),
):
    """
    Evaluate the data-loss model.
    """
    settings = _load_settings(config)
    decimals = settings.output.probability_decimals
    trials, seed = montecarlo
    if table2 == (params is not None):
        err_console.print("[red]Input error:[/red] give exactly one of --table2 or --params")
        raise typer.Exit(code=EXIT_INPUT)

    with _exit_codes():
        if table2:
            if trials is not None:
                raise DomainError("--montecarlo needs an integer block count; use it with --params")
            rows = table2_sweep(
                blocks_per_node=settings.reliability.blocks_per_node,
                avg_replicas=settings.reliability.assumed_avg_replicas,
            )
            text = _csv_text(
                ("n", "alpha", "p", "r", "loss", "published"),
                [
                    (
                        row.n,
                        row.alpha,
                        row.p,
                        row.r,
                        format_probability(row.loss, decimals),
                        "" if row.published is None else format_probability(row.published, decimals),
                    )
                    for row in rows
                ],
            )
        else:
            point = _parse_params(params)
            loss = data_loss_probability(point)
            header: Tuple[str, ...] = ("n", "p", "r", "b", "loss")
            values: tuple = (point.n, point.p, point.r, point.b, format_probability(loss, decimals))
            if trials is not None:
                estimate = monte_carlo_loss(
                    point,
                    trials=trials,
                    seed=seed or 0,
                    workers=workers or settings.reliability.montecarlo_workers,
                    chunk_size=settings.reliability.chunk_size,
                )
                header += ("mc_estimate", "mc_stderr")
                values += (format_probability(estimate.estimate, decimals), f"{estimate.standard_error:.3e}")
                log.info("Monte Carlo: %d/%d trials lost data", estimate.losses, estimate.trials)
            text = _csv_text(header, [values])
        _emit(text, out)


@app.command("simulate")
def simulate(
    scenario: Path = typer.Option(..., "--scenario", help="Scenario JSON."),
    out: Path = typer.Option(..., "--out", help="Output directory."),
    sweep_node: Optional[int] = typer.Option(None, "--sweep-node", help="Node whose f is swept."),
    sweep_f: Optional[str] = typer.Option(None, "--sweep-f", help="Comma-separated f values."),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Settings YAML path."),
):
    """
    Run a scenario and write timeseries.csv and final_state.json.
    """
    settings = _load_settings(config)
    opts = dict(
        weight_mode=settings.placement.weight_mode,
        max_replicas=settings.placement.max_replicas,
        accept_clamped=settings.placement.accept_clamped,
    )
    with _exit_codes():
        spec = load_scenario(scenario)
        if (sweep_node is None) != (sweep_f is None):
            raise DomainError("--sweep-node and --sweep-f go together")
        try:
            f_values = parse_float_list(sweep_f) if sweep_f else []
        except ValueError as exc:
            raise DomainError(f"--sweep-f: {exc}") from exc
        result = run_scenario(spec, **opts)
        points = failure_sweep(spec, sweep_node, f_values, **opts) if sweep_node is not None else None

    with _exit_codes():
        out.mkdir(parents=True, exist_ok=True)
        _emit(result.timeseries_csv(), out / "timeseries.csv")
        _emit(json.dumps(result.final_state.to_dict(), indent=2) + "\n", out / "final_state.json")
        if points is not None:
            _emit(sweep_csv(points), out / "sweep.csv")

    state = result.final_state
    console.print(f"Replica factor: {result.replica_count}")
    console.print(f"Blocks ingested: {len(result.ingest_log)}")
    console.print(f"Logical storage: {human_gb(state.logical_bytes())}")
    console.print(f"Physical storage: {human_gb(state.physical_bytes())}")
    console.print(f"Shortfalls: {len(result.shortfalls)}")
    console.print(f"[bold green]Saved[/bold green] -> {out}")


def _print_summary(report: MetricsReport, decimals: int) -> None:
    console.print(f"Cluster used: {human_gb(report.cluster_used_bytes)} of {human_gb(report.cluster_capacity_bytes)}")
    console.print(f"Cluster DSU: {report.cluster_dsu_percent:.2f}%")
    console.print(f"Minimum load balance: {format_probability(report.min_load_balance, decimals)}")


@app.command("report")
def report(
    state_path: Path = typer.Option(..., "--state", help="final_state.json from simulate."),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the report here instead of stdout."),
    fmt: str = typer.Option("csv", "--format", help="csv|json"),
    exclude_dead: bool = typer.Option(False, "--exclude-dead", help="Leave dead nodes out of totals."),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Settings YAML path."),
):
    """
    Per-node disk-space utilization and load balance of a saved cluster state.
    """
    settings = _load_settings(config)
    fmt = _check_format(fmt)
    with _exit_codes():
        state = ClusterState.from_dict(read_json(state_path))
        problems = validate_cluster(state)
        if problems:
            raise ConfigError(f"{state_path}: inconsistent state: " + "; ".join(problems))
        metrics = cluster_report(state, include_dead=not exclude_dead)

    text = metrics.to_csv() if fmt == "csv" else json.dumps(metrics.to_dict(), indent=2) + "\n"
    with _exit_codes():
        _emit(text, out)
    if out is not None:
        _print_summary(metrics, settings.output.probability_decimals)
    else:
        log.info(
            "cluster DSU %.2f%%, minimum load balance %.4f",
            metrics.cluster_dsu_percent,
            metrics.min_load_balance,
        )


def main():
    app()


if __name__ == "__main__":
    main()
