"""
Command Line Interface for the Nonholonomic Slip Tool

This module provides a Typer-based CLI for simulating nonholonomic systems
with strong friction, evaluating slip-velocity approximations, running
epsilon-sweep convergence studies and executing the invariant suites.
"""

import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, NoReturn, Optional

try:  # newer typer ships its own click copy and raises its exception classes
    from typer._click import exceptions as click
except ImportError:
    from click import exceptions as click
import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from .config import RunConfig
from .dynamics import kinetic_energy
from .exceptions import SlipToolError, ValidationFailure
from .reporter import (
    format_number,
    report_path_for,
    slip_csv,
    write_convergence_csv,
    write_json_report,
    write_trajectory_csv,
)
from .studies import (
    batch_compute_convergence,
    get_convergence_summary,
    run_simulation,
)
from .systems import initial_configuration_and_velocity, load_system
from .types import ConvergencePoint, InvariantResult, RunReport, SimPlan, Trajectory
from .validation import FAULTS, raise_on_failure, run_validation

app = typer.Typer(
    help="Nonholonomic Slip Tool - slow-manifold slip velocities of nonholonomic systems with strong friction"
)
console = Console()

EXIT_USAGE = 1
EXIT_FAILURE = 2


def configure_logging(verbose: bool) -> None:
    """Route library logging through rich; WARNING by default, INFO with --verbose."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


def read_config(config_path: Path) -> RunConfig:
    """Parse a YAML run configuration, exiting with a usage error when it is missing."""
    if not config_path.exists():
        console.print(f"[red]Config file not found: {config_path}[/]")
        raise typer.Exit(code=EXIT_USAGE)
    try:
        return RunConfig.from_yaml(config_path)
    except SlipToolError as e:
        fail(e)


def fail(error: Exception) -> NoReturn:
    console.print(f"[red]❌ {type(error).__name__}: {error}[/]")
    raise typer.Exit(code=EXIT_FAILURE)


def error_message(error: Exception) -> str:
    return f"{type(error).__name__}: {error}"


def display_simulation(trajectory: Trajectory, plan: SimPlan, report: RunReport):
    """Display the outcome of a single simulation."""
    final = trajectory.final
    table = Table(title=f"Simulation: {plan.model} model")
    table.add_column("Quantity", style="bold blue")
    table.add_column("Value", style="green")

    table.add_row("ε", format_number(plan.epsilon))
    table.add_row("dt", format_number(plan.dt))
    table.add_row("t_final", format_number(final.t))
    table.add_row("Recorded samples", str(len(trajectory)))
    table.add_row("Final q", ", ".join(f"{x:.6g}" for x in final.q))
    table.add_row("Final v", ", ".join(f"{x:.6g}" for x in final.v))
    table.add_row(
        "Kinetic energy",
        f"{report.summary['kinetic_energy_initial']:.6g} → {report.summary['kinetic_energy_final']:.6g}",
    )
    console.print(table)


def display_convergence(points: List[ConvergencePoint], summary: dict):
    """Display sweep errors and fitted slopes."""
    console.print("\n[bold]📋 Convergence Sweep Summary[/]")
    console.print(f"  • ε grid: {', '.join(format_number(e) for e in summary['epsilons'])}")
    console.print(f"  • Total points: {summary['total_points']}")
    console.print(f"  • Failed points: {summary['failed_points']}")

    table = Table(title="Sup-norm configuration error vs full model")
    table.add_column("ε", justify="right")
    table.add_column("Order", justify="center")
    table.add_column("Error", justify="right", style="bold")
    for point in points:
        error = f"{point.error:.6e}" if point.is_successful else f"[red]{point.error_message}[/]"
        table.add_row(format_number(point.epsilon), point.order, error)
    console.print(table)

    console.print("\n[bold]📈 Fitted Slopes:[/]")
    for order, reason in summary["verdicts"].items():
        color = "green" if summary["passed"][order] else "red"
        console.print(f"  • [{color}]{reason}[/]")


def display_validation(results: List[InvariantResult]):
    """Display every invariant with its measured defect."""
    table = Table(title="Invariant Suites")
    table.add_column("Suite", style="blue")
    table.add_column("Invariant")
    table.add_column("Defect", justify="right")
    table.add_column("Tolerance", justify="right")
    table.add_column("Result", justify="center")
    for result in results:
        verdict = "[green]PASS[/]" if result.passed else "[red]FAIL[/]"
        table.add_row(
            result.suite,
            result.name,
            f"{result.defect:.3e}",
            f"{result.tolerance:.1e}",
            verdict,
        )
    console.print(table)


@app.command()
def simulate(
    config: Path = typer.Option(..., "--config", help="YAML run configuration"),
    out: Path = typer.Option(..., "--out", help="Trajectory CSV to write"),
    verbose: bool = typer.Option(False, "--verbose", help="Log progress at INFO level"),
):
    """Integrate the configured model and write the trajectory as CSV."""
    configure_logging(verbose)
    run_config = read_config(config)
    report = RunReport(command="simulate", config_digest=run_config.digest())
    report_path = report_path_for(out)

    console.print("[bold blue]🚀 Nonholonomic Simulation[/]")
    try:
        system = load_system(run_config)
        trajectory, plan = run_simulation(run_config)
        write_trajectory_csv(system, trajectory, out)
    except SlipToolError as e:
        report.errors.append(error_message(e))
        write_json_report(report, report_path)
        fail(e)

    report.outputs.append(str(out))
    first, final = trajectory.state(0), trajectory.final
    report.summary = {
        "plan": plan.to_dict(),
        "samples": len(trajectory),
        "final_state": final.to_dict(),
        "kinetic_energy_initial": kinetic_energy(system, first.q, first.v),
        "kinetic_energy_final": kinetic_energy(system, final.q, final.v),
    }
    write_json_report(report, report_path)

    display_simulation(trajectory, plan, report)
    console.print(f"\n[green]✅ Trajectory written to {out}[/]")


@app.command()
def slip(
    config: Path = typer.Option(..., "--config", help="YAML run configuration"),
    theta: Optional[float] = typer.Option(None, "--theta", help="Heading angle"),
    x: Optional[float] = typer.Option(None, "--x", help="Contact point x"),
    y: Optional[float] = typer.Option(None, "--y", help="Contact point y"),
    phi: Optional[float] = typer.Option(None, "--phi", help="Rolling angle"),
    v_theta: Optional[float] = typer.Option(None, "--v-theta", help="Heading rate"),
    v_phi: Optional[float] = typer.Option(None, "--v-phi", help="Rolling rate"),
    verbose: bool = typer.Option(False, "--verbose", help="Log progress at INFO level"),
):
    """Print h1, h2 and eps h1 + eps^2 h2 at one state as a CSV row.

    Unset state options fall back to the ``initial`` section of the config.
    """
    configure_logging(verbose)
    run_config = read_config(config)
    overrides = {
        name: value
        for name, value in dict(theta=theta, x=x, y=y, phi=phi, v_theta=v_theta, v_phi=v_phi).items()
        if value is not None
    }
    if overrides.keys() & {"v_theta", "v_phi"}:
        overrides["d_velocity"] = None
    run_config = replace(run_config, initial=replace(run_config.initial, **overrides))
    try:
        system = load_system(run_config)
        q, vD = initial_configuration_and_velocity(system, run_config)
        text = slip_csv(system, q, vD)
    except SlipToolError as e:
        fail(e)
    typer.echo(text, nl=False)


@app.command()
def convergence(
    config: Path = typer.Option(..., "--config", help="YAML run configuration"),
    out: Path = typer.Option(..., "--out", help="Sweep CSV to write"),
    jobs: int = typer.Option(1, "--jobs", help="Worker processes for the sweep"),
    verbose: bool = typer.Option(False, "--verbose", help="Log progress at INFO level"),
):
    """Sweep epsilon and fit log-log error slopes of the reduced models."""
    configure_logging(verbose)
    run_config = read_config(config)
    report = RunReport(command="convergence", config_digest=run_config.digest())
    report_path = report_path_for(out)

    console.print("[bold blue]🔄 Epsilon-Sweep Convergence Study[/]")
    console.print(f"Output: {out}")
    try:
        points = batch_compute_convergence(run_config, jobs=jobs)
        write_convergence_csv(points, out)
    except SlipToolError as e:
        report.errors.append(error_message(e))
        write_json_report(report, report_path)
        fail(e)

    report.outputs.append(str(out))
    summary = get_convergence_summary(points)
    report.summary = summary
    report.flags = {f"slope_order_{order}": passed for order, passed in summary["passed"].items()}
    report.errors.extend(
        f"eps={format_number(p.epsilon)} order={p.order}: {p.error_message}"
        for p in points
        if not p.is_successful
    )
    write_json_report(report, report_path)

    display_convergence(points, summary)
    if not report.passed:
        console.print("\n[red]❌ Convergence study did not meet the expected orders[/]")
        raise typer.Exit(code=EXIT_FAILURE)
    console.print(f"\n[green]✅ Sweep written to {out}[/]")


@app.command()
def validate(
    config: Path = typer.Option(..., "--config", help="YAML run configuration"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Sampling seed (overrides validate.seed)"),
    samples: Optional[int] = typer.Option(None, "--samples", help="Samples per suite (overrides validate.samples)"),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the run report as JSON"),
    fault: Optional[str] = typer.Option(None, "--fault", hidden=True),
    verbose: bool = typer.Option(False, "--verbose", help="Log progress at INFO level"),
):
    """Run every invariant suite; exit 2 naming the first failing invariant."""
    configure_logging(verbose)
    run_config = read_config(config)
    seed = run_config.validate.seed if seed is None else seed
    samples = run_config.validate.samples if samples is None else samples
    if fault is not None and fault not in FAULTS:
        console.print(f"[red]Unknown fault: {fault}[/]")
        raise typer.Exit(code=EXIT_USAGE)

    console.print("[bold blue]🔧 Invariant Validation[/]")
    console.print(f"Seed: {seed}, samples per suite: {samples}")
    report = RunReport(command="validate", config_digest=run_config.digest())
    try:
        system = load_system(run_config)
        results = run_validation(system, samples=samples, seed=seed, fault=fault)
    except SlipToolError as e:
        fail(e)

    report.summary = {
        "seed": seed,
        "samples": samples,
        "invariants": [result.to_dict() for result in results],
    }
    report.flags = {result.name: result.passed for result in results}
    if out is not None:
        write_json_report(report, out)

    display_validation(results)
    try:
        raise_on_failure(results)
    except ValidationFailure as e:
        console.print(Panel(str(e), title="First failing invariant", border_style="red"))
        raise typer.Exit(code=EXIT_FAILURE)
    console.print("\n[green]🎉 All invariants hold[/]")


@app.command()
def version():
    """Show version information."""
    from . import __version__

    console.print(f"Nonholonomic Slip Tool v{__version__}")


def main():
    """Entry point for the CLI application."""
    try:
        code = app(standalone_mode=False)
    except click.UsageError as e:
        e.show()
        sys.exit(EXIT_USAGE)
    except click.ClickException as e:
        e.show()
        sys.exit(e.exit_code)
    except click.Abort:
        console.print("[yellow]Aborted[/]")
        sys.exit(EXIT_USAGE)
    sys.exit(code if isinstance(code, int) else 0)


if __name__ == "__main__":
    main()
