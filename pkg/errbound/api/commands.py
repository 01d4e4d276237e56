"""
errbound/api/commands.py

Purpose: Command-line surface

- analyze: full analysis of a problem file, report files, diagnosis exit code
- check-regularity: linear and sampled metric regularity of g at x_bar
- check-shapiro: sampled contact test (epigraph of f o g, or the solution set)
- excess: e(C, D) of a polyhedron and a cone, with an optional tau certificate
- version

Exit codes: 0 holds/passed, 1 usage or IO error, 2 no error bound/failed,
3 hypotheses violated, 4 inconclusive. Diagnostics go to stderr.
"""

import math
from pathlib import Path
from typing import Optional

import typer

from errbound import __version__
from errbound.core.config import settings
from errbound.core.exceptions import ErrboundError
from errbound.core.logging import get_logger
from errbound.schemas.report import ShapiroReport
from errbound.services.analyzer_service import (
    AnalyzerService,
    ProblemInstance,
    SolutionSetOracle,
    get_analyzer_service,
)
from errbound.services.geometry_service import excess, excess_certificate, tangent_cone
from errbound.services.problem_service import builtin_instance, parse_excess_problem, parse_problem
from errbound.services.regularity_service import (
    empirical_metric_regularity,
    robinson_check,
    shapiro_epigraph_test,
    shapiro_set_test,
)
from errbound.services.report_service import (
    format_float,
    render_regularity,
    render_shapiro,
    render_text,
    write_report,
)
from errbound.utils.constants import (
    DIAGNOSIS_EXIT_CODES,
    EXIT_FAILED,
    EXIT_OK,
    EXIT_USAGE,
    SHAPIRO_SET_EPSILONS,
    VERDICT_EXIT_CODES,
)
from errbound.utils.sampling_utils import make_rng
from errbound.utils.validation_utils import parse_number_list

logger = get_logger(__name__)

BUILTIN_PREFIX = "builtin:"

app = typer.Typer(
    name="errbound",
    help="Local error bounds of composite-convex inequalities f(g(x)) <= 0.",
    add_completion=False,
    no_args_is_help=True,
)


def _usage_error(message: str) -> typer.Exit:
    typer.echo(f"error: {message}", err=True)
    return typer.Exit(code=EXIT_USAGE)


def load_instance(
    problem: str,
    seed: Optional[int] = None,
    radii: Optional[str] = None,
    samples: Optional[int] = None,
) -> ProblemInstance:
    """
    Problem file (or 'builtin:<name>') with command-line overrides applied.
    Seed precedence: --seed, then [options] seed, then ERRBOUND_SEED, then 0.
    """
    try:
        if problem.startswith(BUILTIN_PREFIX):
            instance = builtin_instance(problem[len(BUILTIN_PREFIX):], seed=settings.SEED)
        else:
            instance = parse_problem(problem)
        changes = {}
        if seed is not None:
            changes["seed"] = seed
        if radii:
            changes["radii"] = tuple(parse_number_list(radii))
        if samples is not None:
            changes["samples_per_radius"] = samples
        return instance.with_options(**changes) if changes else instance
    except (ErrboundError, KeyError, ValueError) as exc:
        raise _usage_error(str(exc).strip("'\"")) from exc


def _write_json(out: Optional[Path], name: str, model) -> None:
    if out is None:
        return
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise _usage_error(f"cannot write {out / name}: {exc.strerror or exc}") from exc


@app.command()
def analyze(
    problem: str = typer.Argument(..., help="Problem file, or builtin:<name>"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Directory for the report files"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Overrides the file seed"),
    radii: Optional[str] = typer.Option(None, "--radii", help="Comma separated, strictly decreasing"),
    samples: Optional[int] = typer.Option(None, "--samples", min=1, help="Samples per radius"),
    workers: Optional[int] = typer.Option(None, "--workers", min=1, help="Per-radius thread pool size"),
):
    """Estimate both moduli at x_bar and diagnose the local error bound."""
    instance = load_instance(problem, seed, radii, samples)
    service = AnalyzerService(workers) if workers else get_analyzer_service()
    report = service.analyze(instance)

    typer.echo(render_text(report))
    for error in report.errors:
        typer.echo(f"warning: {error}", err=True)

    out_dir = out or (Path(settings.DEFAULT_OUT_DIR) if settings.DEFAULT_OUT_DIR else None)
    if out_dir is not None:
        try:
            write_report(report, out_dir)
        except ErrboundError as exc:
            raise _usage_error(str(exc)) from exc
    raise typer.Exit(code=DIAGNOSIS_EXIT_CODES[report.diagnosis])


@app.command("check-regularity")
def check_regularity(
    problem: str = typer.Argument(..., help="Problem file, or builtin:<name>"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    radius: Optional[float] = typer.Option(None, "--radius", help="Sampling radius (default: largest radius)"),
    pairs: Optional[int] = typer.Option(None, "--pairs", min=1),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Directory for regularity.json"),
):
    """Jacobian surjectivity, sampled metric regularity and Robinson's condition at x_bar."""
    instance = load_instance(problem, seed)
    try:
        report = empirical_metric_regularity(
            instance.g, instance.x_bar, radius or instance.radii[0], pairs, instance.seed,
        )
        cone = tangent_cone(instance.solution_polyhedron, instance.g(instance.x_bar),
                            instance.tolerances.active_tol)
        robinson = robinson_check(instance.g, instance.x_bar, cone)
    except ErrboundError as exc:
        raise _usage_error(str(exc)) from exc

    typer.echo(render_regularity(report), nl=False)
    typer.echo(f"robinson        : {'yes' if robinson else 'no'}")
    _write_json(out, "regularity.json", report)
    raise typer.Exit(code=EXIT_OK if report.surjective else EXIT_FAILED)


@app.command("check-shapiro")
def check_shapiro(
    problem: str = typer.Argument(..., help="Problem file, or builtin:<name>"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    target: str = typer.Option("epigraph", "--target", help="epigraph (of f o g) or solution-set"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Directory for shapiro.json"),
):
    """Sampled first-order contact test at x_bar."""
    instance = load_instance(problem, seed)
    try:
        if target == "epigraph":
            report: ShapiroReport = shapiro_epigraph_test(
                instance.phi, instance.x_bar, settings.SHAPIRO_EPSILONS, instance.seed,
            )
        elif target == "solution-set":
            oracle = SolutionSetOracle(instance, get_analyzer_service())
            report = shapiro_set_test(oracle, instance.x_bar, SHAPIRO_SET_EPSILONS, instance.seed)
        else:
            raise _usage_error(f"unknown target '{target}' (expected epigraph or solution-set)")
    except ErrboundError as exc:
        raise _usage_error(str(exc)) from exc

    typer.echo(render_shapiro(report), nl=False)
    _write_json(out, "shapiro.json", report)
    raise typer.Exit(code=VERDICT_EXIT_CODES[report.verdict])


@app.command("excess")
def excess_command(
    problem: Path = typer.Argument(..., help="File with [C] and [D] sections"),
    tau: Optional[float] = typer.Option(None, "--tau", min=0.0, help="Certify C within D + tau B"),
):
    """Excess e(C, D) of a polyhedron over a polyhedral cone."""
    try:
        data = parse_excess_problem(problem)
        result = excess(data.C, data.D, make_rng(data.seed))
    except ErrboundError as exc:
        raise _usage_error(str(exc)) from exc

    typer.echo(f"excess = {format_float(result.value)}")
    if result.witness is not None:
        typer.echo("witness = " + " ".join(format_float(v) for v in result.witness))
    if result.escaping_ray is not None:
        typer.echo("escaping ray = " + " ".join(format_float(v) for v in result.escaping_ray))
    if result.approximate:
        typer.echo("note: approximate (enumeration limits exceeded)", err=True)

    tau = data.tau if tau is None else tau
    if tau is None:
        raise typer.Exit(code=EXIT_OK)
    certified = excess_certificate(data.C, data.D, tau, data.samples, make_rng(data.seed))
    typer.echo(f"certificate tau = {format_float(tau)}: {'pass' if certified else 'fail'}")
    consistent = certified == (result.value <= tau + 1e-9) or math.isinf(tau)
    if not consistent:
        logger.warning("Certificate disagrees with the computed excess")
    raise typer.Exit(code=EXIT_OK if certified else EXIT_FAILED)


@app.command()
def version():
    """Print the toolkit version."""
    typer.echo(f"errbound {__version__}")
