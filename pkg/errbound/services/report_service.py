"""
errbound/services/report_service.py

Purpose: Report files of an analysis

- report.txt: human-readable summary (hypotheses, moduli, diagnosis, notes)
- report.json: full AnalysisReport (machine section)
- trace.csv: per-radius sups (machine section)
- witnesses.csv: worst samples per radius (machine section)
- plot_data.csv: (distance to x_bar, ratio) of every empirical sample

Machine sections contain no timestamps or paths, so identical inputs and
seeds give byte-identical files.
"""

import csv
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

from errbound.core.config import settings
from errbound.core.exceptions import ErrboundError
from errbound.core.logging import get_logger
from errbound.schemas.report import AnalysisReport, RegularityReport, ShapiroReport, Witness
from errbound.utils.constants import (
    HYPOTHESES_TEMPLATE,
    MODULUS_TEMPLATE,
    PLOT_CSV_FILE,
    PLOT_CSV_HEADER,
    REPORT_HEADER_TEMPLATE,
    REPORT_JSON_FILE,
    REPORT_TEXT_FILE,
    REPORT_TITLE,
    TRACE_CSV_FILE,
    TRACE_CSV_HEADER,
    VECTOR_SEPARATOR,
    WITNESS_CSV_FILE,
    WITNESS_CSV_HEADER,
)

logger = get_logger(__name__)

# Witnesses kept per radius in witnesses.csv
WITNESSES_PER_RADIUS = 5


class ReportWriteError(ErrboundError):
    """A report file could not be written."""
    pass


def format_float(value: float) -> str:
    """Lossless text form (17 significant digits, 'inf' for infinity)."""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(float(value), f".{settings.FLOAT_DIGITS}g")


def _short(value: Optional[float]) -> str:
    if value is None:
        return "n/a"
    if math.isinf(value):
        return "inf"
    return f"{value:.6g}"


def _yes_no(flag: Optional[bool]) -> str:
    if flag is None:
        return "not checked"
    return "yes" if flag else "no"


def worst_witnesses(witnesses: Iterable[Witness], per_radius: int = WITNESSES_PER_RADIUS) -> List[Witness]:
    """Largest-ratio witnesses of each radius, radii in schedule order."""
    by_radius: Dict[float, List[Witness]] = {}
    for witness in witnesses:
        by_radius.setdefault(witness.radius, []).append(witness)
    selected = []
    for radius in sorted(by_radius, reverse=True):
        ranked = sorted(by_radius[radius], key=lambda w: (-w.ratio, w.distance_to_x_bar, w.x))
        selected.extend(ranked[:per_radius])
    return selected


# ============================================================================
# TEXT RENDERING
# ============================================================================

def render_text(report: AnalysisReport) -> str:
    """Human-readable report."""
    hypotheses = report.hypotheses
    regularity = hypotheses.metric_regularity
    boundary = hypotheses.boundary_condition
    shapiro = hypotheses.shapiro

    parts = [REPORT_HEADER_TEMPLATE.format(
        title=REPORT_TITLE,
        underline="=" * len(REPORT_TITLE),
        instance=report.instance,
        seed=report.seed,
        version=report.version,
        radii=", ".join(_short(r) for r in report.radii),
        samples=report.samples_per_radius,
    )]

    parts.append(HYPOTHESES_TEMPLATE.format(
        boundary=f"{boundary.verdict} ({boundary.sampled_points} points)" if boundary else "not checked",
        interior=_yes_no(hypotheses.interior_domain),
        surjective=_yes_no(regularity.surjective) if regularity else "not checked",
        sigma_min=_short(regularity.sigma_min) if regularity else "n/a",
        kappa_linear=_short(regularity.kappa_linear) if regularity else "n/a",
        pairs=regularity.sample_count if regularity else 0,
        kappa_empirical=_short(regularity.kappa_empirical) if regularity else "n/a",
        robinson=_yes_no(hypotheses.robinson),
        shapiro=shapiro.verdict if shapiro else "not checked",
    ))

    parts.append(MODULUS_TEMPLATE.format(
        tau_theoretical=_short(report.tau_theoretical),
        applicability="" if report.theoretical.applicable else " (not applicable)",
        region=report.empirical.region or "B(x_bar, r) minus S",
        tau_empirical=_short(report.tau_empirical),
        theoretical_trend=report.theoretical.trend,
        empirical_trend=report.empirical.trend,
        diverged=_yes_no(report.empirical.diverged),
        interior_flag=_yes_no(report.theoretical.interior or report.empirical.interior),
        agreement=_short(report.agreement),
        sufficiency=_short(report.sufficiency_bound),
        diagnosis=report.diagnosis,
    ))

    rows = ["", "Per-radius trace", "----------------",
            f"{'radius':>12}  {'theoretical':>14}  {'empirical':>14}  {'samples':>8}"]
    for trace in report.traces:
        rows.append(
            f"{_short(trace.radius):>12}  {_short(trace.tau_theoretical_sup):>14}  "
            f"{_short(trace.tau_empirical_sup):>14}  {trace.sample_count:>8}"
        )
    parts.append("\n".join(rows) + "\n")

    if report.kernel_inclusion is not None:
        parts.append(f"\nkernel inclusion at boundary samples: {_yes_no(report.kernel_inclusion)}\n")
    if report.notes:
        parts.append("\nNotes\n-----\n" + "\n".join(f"- {note}" for note in report.notes) + "\n")
    if report.errors:
        parts.append("\nErrors\n------\n" + "\n".join(f"- {error}" for error in report.errors) + "\n")
    return "".join(parts)


def render_regularity(report: RegularityReport) -> str:
    lines = [
        f"surjective      : {_yes_no(report.surjective)}",
        f"sigma_min       : {_short(report.sigma_min)}",
        f"kappa_linear    : {_short(report.kappa_linear)}",
        f"kappa_empirical : {_short(report.kappa_empirical)}",
        f"pairs           : {report.sample_count} ({report.failed_pairs} failed)",
    ]
    if report.worst_pair is not None:
        lines.append(f"worst pair      : x={report.worst_pair.x} y={report.worst_pair.y}")
    return "\n".join(lines) + "\n"


def render_shapiro(report: ShapiroReport) -> str:
    lines = [f"verdict           : {report.verdict}",
             f"contact ratio sup : {_short(report.contact_ratio_sup)}"]
    for epsilon, delta in zip(report.epsilon_grid, report.delta_found):
        lines.append(f"epsilon {_short(epsilon):>8} : delta {_short(delta)}")
    if report.skipped_pairs:
        lines.append(f"skipped pairs     : {report.skipped_pairs}")
    if report.note:
        lines.append(f"note: {report.note}")
    return "\n".join(lines) + "\n"


# ============================================================================
# FILES
# ============================================================================

def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    try:
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        logger.error(f"Failed to write {path}: {exc}", exc_info=True)
        raise ReportWriteError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        logger.error(f"Failed to write {path}: {exc}", exc_info=True)
        raise ReportWriteError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_plot_data(report: AnalysisReport, path: Union[str, Path]) -> Path:
    """
    CSV of (distance to x_bar, ratio) for every empirical sample, in sampling
    order; header only when no sample was taken (interior x_bar).

    Raises:
        ReportWriteError: IO failure
    """
    path = Path(path)
    rows = [(format_float(w.distance_to_x_bar), format_float(w.ratio)) for w in report.witnesses]
    _write_csv(path, PLOT_CSV_HEADER, rows)
    logger.debug(f"Wrote {len(rows)} plot rows to {path}")
    return path


def write_report(report: AnalysisReport, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """
    Writes every report file into out_dir (created if missing).

    Returns:
        File name -> path
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportWriteError(f"cannot create {out_dir}: {exc.strerror or exc}") from exc

    paths = {name: out_dir / name for name in (
        REPORT_TEXT_FILE, REPORT_JSON_FILE, TRACE_CSV_FILE, WITNESS_CSV_FILE, PLOT_CSV_FILE,
    )}

    _write_text(paths[REPORT_TEXT_FILE], render_text(report))
    _write_text(paths[REPORT_JSON_FILE], report.model_dump_json(indent=2) + "\n")
    _write_csv(paths[TRACE_CSV_FILE], TRACE_CSV_HEADER, (
        (format_float(t.radius), format_float(t.tau_theoretical_sup),
         format_float(t.tau_empirical_sup), str(t.sample_count))
        for t in report.traces
    ))
    _write_csv(paths[WITNESS_CSV_FILE], WITNESS_CSV_HEADER, (
        (format_float(w.radius), VECTOR_SEPARATOR.join(format_float(v) for v in w.x),
         format_float(w.distance), format_float(w.violation), format_float(w.ratio))
        for w in worst_witnesses(report.witnesses)
    ))
    emit_plot_data(report, paths[PLOT_CSV_FILE])

    logger.info(f"Report for {report.instance} written to {out_dir}")
    return paths
