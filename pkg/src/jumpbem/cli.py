"""Command-line interface for jumpbem."""

import json
import sys
from pathlib import Path
from typing import List, Optional

import click
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from .config import Config, create_default_config, load_config
from .exceptions import EXIT_IO, EXIT_RESOURCE, EXIT_USAGE, ConfigurationError, JumpBEMError
from .mesh import MAX_SUBDIVISIONS, load_off, make_cube, make_icosphere, mesh_statistics, save_off
from .pipeline import Pipeline
from .version import __version__

console = Console()


def _fail(ctx: click.Context, message: str, error: BaseException) -> None:
    """Print the error and exit with the code it carries."""
    console.print(f"[red]❌ {message}: {error}[/red]")
    if ctx.obj and ctx.obj.get("debug"):
        import traceback
        console.print(traceback.format_exc())
    if isinstance(error, JumpBEMError):
        sys.exit(error.exit_code)
    if isinstance(error, MemoryError):
        sys.exit(EXIT_RESOURCE)
    sys.exit(1)


def _parse_levels(ctx: click.Context, param: click.Parameter, value: Optional[str]) -> Optional[List[int]]:
    if value is None:
        return None
    try:
        return [int(level) for level in value.split(",") if level.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}")


def _progress() -> Progress:
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        console=console,
        transient=True,
    )


@click.group()
@click.version_option(version=__version__)
@click.option(
    "--config",
    "-c",
    type=click.Path(exists=True, path_type=Path),
    help="Path to configuration file",
)
@click.option("--debug", is_flag=True, help="Enable debug mode")
@click.pass_context
def cli(ctx: click.Context, config: Optional[Path], debug: bool) -> None:
    """jumpbem: boundary-element solver for the Laplace jump problem.

    Builds surface meshes, assembles Galerkin boundary operators and solves
    for the simple and double layer densities of a field with prescribed
    jumps, sequentially or as one coupled system.
    """
    ctx.ensure_object(dict)
    ctx.obj["debug"] = debug

    config_path = config or Path("config.yaml")
    try:
        loaded = load_config(config_path)
        if debug:
            loaded.logging.level = "DEBUG"
        ctx.obj["config"] = loaded
    except Exception as e:
        console.print(f"[red]Error loading configuration: {e}[/red]")
        sys.exit(getattr(e, "exit_code", EXIT_USAGE))


@cli.group()
def mesh() -> None:
    """Generate and inspect surface meshes."""


@mesh.command("gen")
@click.option("--shape", type=click.Choice(["icosphere", "cube"]), default="icosphere", help="Generator")
@click.option(
    "--subdiv",
    type=click.IntRange(0, MAX_SUBDIVISIONS),
    default=3,
    help="Icosphere subdivision level",
)
@click.option("--radius", type=click.FloatRange(min=0.0, min_open=True), default=1.0, help="Radius or cube edge")
@click.option("--output", "-o", type=click.Path(path_type=Path), required=True, help="OFF file to write")
@click.option("--stats", type=click.Path(path_type=Path), help="Also write statistics as JSON")
@click.pass_context
def mesh_gen(ctx: click.Context, shape: str, subdiv: int, radius: float, output: Path, stats: Optional[Path]) -> None:
    """Generate a closed triangulated surface."""
    try:
        surface = make_cube(radius) if shape == "cube" else make_icosphere(subdiv, radius)
        save_off(surface, output)
        statistics = mesh_statistics(surface)
        if stats is not None:
            stats.write_text(json.dumps(statistics.dict(), indent=2, sort_keys=True) + "\n")
    except (JumpBEMError, OSError) as e:
        if isinstance(e, OSError):
            e = JumpBEMError(str(e), EXIT_IO)
        _fail(ctx, "Mesh generation failed", e)

    _print_statistics(statistics.dict(), f"{shape} → {output}")


@mesh.command("info")
@click.argument("path", type=click.Path(path_type=Path))
@click.option("--json", "as_json", is_flag=True, help="Print statistics as JSON")
@click.pass_context
def mesh_info(ctx: click.Context, path: Path, as_json: bool) -> None:
    """Validate an OFF file and print its statistics."""
    try:
        statistics = mesh_statistics(load_off(path)).dict()
    except JumpBEMError as e:
        _fail(ctx, "Cannot load mesh", e)

    if as_json:
        click.echo(json.dumps(statistics, indent=2, sort_keys=True))
    else:
        _print_statistics(statistics, str(path))


def _print_statistics(statistics: dict, title: str) -> None:
    table = Table(title=f"📐 {title}")
    table.add_column("Statistic", style="cyan")
    table.add_column("Value", style="green")
    for key, value in statistics.items():
        table.add_row(key, f"{value:.6g}" if isinstance(value, float) else str(value))
    console.print(table)


def _solver_overrides(
    eps0: Optional[float],
    eps1: Optional[float],
    subdiv: Optional[int],
    regular_degree: Optional[int],
    singular_order: Optional[int],
    threads: Optional[int],
    seed: Optional[int],
) -> dict:
    return {
        "solver.eps0": eps0,
        "solver.eps1": eps1,
        "mesh.subdivisions": subdiv,
        "quadrature.regular_degree": regular_degree,
        "quadrature.singular_order": singular_order,
        "performance.threads": threads,
        "performance.seed": seed,
    }


def common_options(function):
    """Flags shared by the numerical commands; each mirrors a config key."""
    options = [
        click.option("--eps0", type=float, help="Weight of the exterior trace"),
        click.option("--eps1", type=float, help="Weight of the exterior normal derivative"),
        click.option("--subdiv", type=click.IntRange(0, MAX_SUBDIVISIONS), help="Icosphere subdivision level"),
        click.option("--regular-degree", type=click.IntRange(1, 20), help="Regular triangle-rule degree"),
        click.option("--singular-order", type=click.IntRange(1, 20), help="Singular pair-rule order"),
        click.option("--threads", type=click.IntRange(min=1), help="Worker threads (default from JUMPBEM_THREADS)"),
        click.option("--seed", type=int, help="Seed of the sample-point rotation"),
    ]
    for option in reversed(options):
        function = option(function)
    return function


@cli.command()
@click.option("--mesh", "mesh_path", type=click.Path(path_type=Path), help="OFF file instead of the generator")
@click.option("--data", "data_path", type=click.Path(path_type=Path), help="CSV of per-vertex moments g0, g1")
@click.option("--save-data", type=click.Path(path_type=Path), help="Also write the jump data as CSV")
@click.option(
    "--method",
    type=click.Choice(["sequential", "monolithic", "both"]),
    help="Solver; 'both' also reports their difference",
)
@common_options
@click.option("--output", "-o", type=click.Path(path_type=Path), help="Solution JSON path")
@click.pass_context
def solve(
    ctx: click.Context,
    mesh_path: Optional[Path],
    data_path: Optional[Path],
    save_data: Optional[Path],
    method: Optional[str],
    eps0: Optional[float],
    eps1: Optional[float],
    subdiv: Optional[int],
    regular_degree: Optional[int],
    singular_order: Optional[int],
    threads: Optional[int],
    seed: Optional[int],
    output: Optional[Path],
) -> None:
    """Solve the manufactured jump problem and write the densities as JSON.

    With --data the moments come from a CSV file instead and no error norms
    are computed.
    """
    config: Config = ctx.obj["config"]

    console.print(Panel.fit("🧮 [bold blue]Solving jump problem[/bold blue]", border_style="blue"))

    try:
        config.apply_overrides(
            {
                **_solver_overrides(eps0, eps1, subdiv, regular_degree, singular_order, threads, seed),
                "solver.method": method,
            }
        )
        output = output or Path(config.output.data_dir) / "solution.json"
        pipeline = Pipeline(config)
        with _progress() as progress:
            progress.add_task("Assembling and solving...", total=None)
            result = pipeline.solve(
                mesh_path=mesh_path, output_path=output, data_path=data_path, save_data_path=save_data
            )
    except Exception as e:
        _fail(ctx, "Solve failed", e)

    table = Table(title="📊 Solve Results")
    table.add_column("Method", style="cyan")
    table.add_column("Compatibility defect", style="green")
    table.add_column("Block residual", style="green")
    table.add_column("Exterior error", style="yellow")
    table.add_column("Interior error (mod const)", style="yellow")
    table.add_column("Time [s]", style="magenta")
    for key, solution in result.solutions.items():
        errors = result.errors.get(key)
        table.add_row(
            key,
            f"{solution.compatibility_defect_relative:.3e}",
            f"{result.residuals[key]:.3e}",
            f"{errors.exterior_rel_l2:.3e}" if errors else "-",
            f"{errors.interior_rel_l2_mod_const:.3e}" if errors else "-",
            f"{solution.report.total_time:.3f}",
        )
    console.print(table)

    if result.method_difference is not None:
        console.print(f"[blue]Sequential vs monolithic density difference: {result.method_difference:.3e}[/blue]")
    for solution in result.solutions.values():
        for warning in solution.report.warnings:
            console.print(f"[yellow]⚠️  {warning}[/yellow]")
    console.print(f"[green]✅ Solution written to: {result.output_path}[/green]")


@cli.command()
@click.option("--levels", callback=_parse_levels, help="Comma-separated icosphere levels, at least 3")
@click.option("--method", type=click.Choice(["sequential", "monolithic"]), help="Solver")
@common_options
@click.option("--output", "-o", type=click.Path(path_type=Path), help="CSV path")
@click.pass_context
def converge(
    ctx: click.Context,
    levels: Optional[List[int]],
    method: Optional[str],
    eps0: Optional[float],
    eps1: Optional[float],
    subdiv: Optional[int],
    regular_degree: Optional[int],
    singular_order: Optional[int],
    threads: Optional[int],
    seed: Optional[int],
    output: Optional[Path],
) -> None:
    """Refine the icosphere and tabulate manufactured-solution errors."""
    config: Config = ctx.obj["config"]

    console.print(Panel.fit("📉 [bold green]Convergence study[/bold green]", border_style="green"))

    try:
        config.apply_overrides(
            {
                **_solver_overrides(eps0, eps1, subdiv, regular_degree, singular_order, threads, seed),
                "solver.method": method,
                "verification.levels": levels,
            }
        )
        if len(config.verification.levels) < 3:
            raise ConfigurationError(f"need at least 3 levels, got {len(config.verification.levels)}")
        output = output or Path(config.output.data_dir) / "convergence.csv"
        pipeline = Pipeline(config)
        with _progress() as progress:
            progress.add_task("Refining...", total=None)
            result = pipeline.converge(output_path=output)
    except Exception as e:
        _fail(ctx, "Convergence study failed", e)

    frame = result.table.frame
    table = Table(title="📉 Errors by level")
    for column in frame.columns:
        table.add_column(column, style="cyan" if column in ("level", "N") else "green")
    for row in frame.itertuples(index=False):
        table.add_row(*[f"{v:.4g}" if isinstance(v, float) else str(v) for v in row])
    console.print(table)
    console.print(f"[blue]Least-squares order: {result.table.order:.3f}[/blue]")
    console.print(f"[green]✅ Table written to: {result.output_path}[/green]")


@cli.command()
@click.option("--levels", callback=_parse_levels, help="Comma-separated icosphere levels")
@click.option("--repetitions", type=click.IntRange(min=1), help="Solves per method and level")
@common_options
@click.option("--output", "-o", type=click.Path(path_type=Path), help="CSV path")
@click.pass_context
def bench(
    ctx: click.Context,
    levels: Optional[List[int]],
    repetitions: Optional[int],
    eps0: Optional[float],
    eps1: Optional[float],
    subdiv: Optional[int],
    regular_degree: Optional[int],
    singular_order: Optional[int],
    threads: Optional[int],
    seed: Optional[int],
    output: Optional[Path],
) -> None:
    """Time the sequential and monolithic solvers against the 5/8 cost model."""
    config: Config = ctx.obj["config"]

    console.print(Panel.fit("⏱️ [bold magenta]Benchmark[/bold magenta]", border_style="magenta"))

    try:
        config.apply_overrides(
            {
                **_solver_overrides(eps0, eps1, subdiv, regular_degree, singular_order, threads, seed),
                "benchmark.levels": levels,
                "benchmark.repetitions": repetitions,
            }
        )
        output = output or Path(config.output.data_dir) / "bench.csv"
        pipeline = Pipeline(config)
        with _progress() as progress:
            progress.add_task("Timing solvers...", total=None)
            result = pipeline.bench(output_path=output)
    except Exception as e:
        _fail(ctx, "Benchmark failed", e)

    table = Table(title="⏱️ Sequential vs monolithic")
    for column in ("N", "sequential_time", "monolithic_time", "measured_ratio", "modeled_ratio", "reference_ratio"):
        table.add_column(column, style="cyan" if column == "N" else "green")
    for comparison in result.comparisons:
        table.add_row(
            str(comparison.n),
            f"{comparison.sequential_time:.3f}",
            f"{comparison.monolithic_time:.3f}",
            f"{comparison.measured_ratio:.3f}",
            f"{comparison.modeled_ratio:.3f}",
            f"{comparison.reference_ratio:.3f}",
        )
    console.print(table)
    console.print(f"[green]✅ Timings written to: {result.output_path}[/green]")


@cli.command()
@click.option("--output", "-o", type=click.Path(path_type=Path), default=Path("config.yaml"), help="Config path")
@click.option("--force", is_flag=True, help="Overwrite existing configuration")
@click.pass_context
def init(ctx: click.Context, output: Path, force: bool) -> None:
    """Write a default configuration file."""
    console.print(Panel.fit("🎯 [bold cyan]Initializing jumpbem[/bold cyan]", border_style="cyan"))

    if output.exists() and not force:
        console.print(f"[yellow]Configuration file already exists: {output}[/yellow]")
        if not click.confirm("Overwrite existing configuration?"):
            sys.exit(0)

    try:
        path = create_default_config(output)
    except JumpBEMError as e:
        _fail(ctx, "Initialization failed", e)

    console.print("[green]✅ Configuration initialized successfully![/green]")
    console.print(f"[blue]📄 Configuration file: {path}[/blue]")


def main():
    """Entry point for the CLI."""
    return cli()


if __name__ == "__main__":
    cli()
