"""Problem files (parse and write), excess files and report files."""

import csv
import json
import math

import numpy as np
import pytest

from errbound.schemas.report import AnalysisReport, Hypotheses, ModulusTrace, RadiusTrace, Witness
from errbound.services.analyzer_service import ProblemInstance, ProblemValidationError
from errbound.services.function_service import MaxAffineFunction, SmoothMap
from errbound.services.problem_service import (
    ProblemFileError,
    builtin_instance,
    parse_excess_problem,
    parse_excess_text,
    parse_problem,
    parse_problem_text,
    parse_seed_in_file,
    write_problem,
)
from errbound.services.report_service import (
    emit_plot_data,
    format_float,
    render_text,
    worst_witnesses,
    write_report,
)

CUBIC_TEXT = """\
[f]
1, -1

[g]
kind = polynomial
component = 3:1

[point]
1
"""


def _same_instance(a: ProblemInstance, b: ProblemInstance) -> None:
    np.testing.assert_array_equal(a.f.slopes, b.f.slopes)
    np.testing.assert_array_equal(a.f.intercepts, b.f.intercepts)
    np.testing.assert_array_equal(a.x_bar, b.x_bar)
    assert a.g.kind == b.g.kind
    for x in np.random.default_rng(0).uniform(-1.0, 1.0, size=(5, a.dim)):
        np.testing.assert_array_equal(a.g(x), b.g(x))
    assert a.radii == b.radii
    assert a.samples_per_radius == b.samples_per_radius
    assert a.seed == b.seed
    assert a.name == b.name
    assert a.tolerances == b.tolerances


def _witness(radius, ratio, distance_to_x_bar):
    return Witness(radius=radius, x=[distance_to_x_bar], distance=ratio * 0.5, violation=0.5,
                   ratio=ratio, distance_to_x_bar=distance_to_x_bar)


def _report(witnesses):
    radii = [1e-1, 1e-2]
    return AnalysisReport(
        instance="synthetic",
        seed=4,
        version="1.0.0",
        radii=radii,
        samples_per_radius=10,
        hypotheses=Hypotheses(),
        tau_theoretical=1.0 / 3.0,
        tau_empirical=0.34,
        theoretical=ModulusTrace(value=1.0 / 3.0, sups=[1.0 / 3.0] * 2, counts=[1, 1], trend="stable"),
        empirical=ModulusTrace(value=0.34, sups=[0.3, 0.34], counts=[4, 4], trend="increasing"),
        traces=[RadiusTrace(radius=r, tau_theoretical_sup=1.0 / 3.0, tau_empirical_sup=e, sample_count=4)
                for r, e in zip(radii, [0.3, 0.34])],
        agreement=0.005,
        diagnosis="error-bound-holds",
        witnesses=witnesses,
    )


class TestParseProblem:
    def test_catalogue_file(self, problems_dir):
        p = parse_problem(problems_dir / "cubic_regular.ini")
        assert p.name == "cubic-regular"
        assert p.radii == (1e-1, 1e-2, 1e-3)
        assert p.samples_per_radius == 200
        assert p.seed == 7
        assert p.g.kind == "polynomial"
        np.testing.assert_allclose(p.g([2.0]), [8.0])

    def test_quadratic_file(self, problems_dir):
        p = parse_problem(problems_dir / "unit_disk.ini")
        np.testing.assert_allclose(p.g([1.0, 0.0]), [0.0])
        np.testing.assert_allclose(p.g.jacobian([1.0, 0.0]), [[2.0, 0.0]])

    def test_defaults(self):
        p = parse_problem_text(CUBIC_TEXT)
        assert p.name == "instance"
        assert p.seed == 0
        assert p.radii == (1e-1, 1e-2, 1e-3)

    def test_name_from_file_stem(self, tmp_path):
        path = tmp_path / "my_cube.ini"
        path.write_text(CUBIC_TEXT, encoding="utf-8")
        assert parse_problem(path).name == "my_cube"

    def test_comments_and_case(self):
        text = "# header\n[F]\n1, -1  # piece\n[G]\nKIND = polynomial\ncomponent = 3:1\n[POINT]\n1\n"
        assert parse_problem_text(text).x_bar[0] == 1.0

    def test_seed_lookup(self, problems_dir, tmp_path):
        assert parse_seed_in_file(problems_dir / "orthant_corner.ini") == 3
        path = tmp_path / "plain.ini"
        path.write_text(CUBIC_TEXT, encoding="utf-8")
        assert parse_seed_in_file(path) is None


class TestProblemErrors:
    def test_empty_f(self):
        with pytest.raises(ProblemFileError, match="at least one piece") as excinfo:
            parse_problem_text(CUBIC_TEXT.replace("1, -1\n", ""))
        assert excinfo.value.line == 1

    def test_bad_number_is_located(self):
        with pytest.raises(ProblemFileError) as excinfo:
            parse_problem_text(CUBIC_TEXT.replace("1, -1", "1, abc"), "bad.ini")
        assert excinfo.value.line == 2
        assert excinfo.value.column == 4
        assert str(excinfo.value).startswith("bad.ini:2:4:")

    def test_ragged_pieces(self):
        with pytest.raises(ProblemFileError, match="expected 2 entries"):
            parse_problem_text(CUBIC_TEXT.replace("1, -1\n", "1, -1\n1, 2, 3\n"))

    def test_missing_section(self):
        with pytest.raises(ProblemFileError, match=r"missing section \[point\]"):
            parse_problem_text(CUBIC_TEXT.split("[point]")[0])

    def test_duplicate_section(self):
        with pytest.raises(ProblemFileError, match="duplicate section"):
            parse_problem_text(CUBIC_TEXT + "[point]\n1\n")

    def test_unknown_kind(self):
        with pytest.raises(ProblemFileError, match="unknown map kind 'spline'") as excinfo:
            parse_problem_text(CUBIC_TEXT.replace("kind = polynomial", "kind = spline"))
        assert excinfo.value.line == 5

    def test_unknown_option(self):
        with pytest.raises(ProblemFileError, match="unknown option 'colour'"):
            parse_problem_text(CUBIC_TEXT + "[options]\ncolour = 3\n")

    def test_radii_must_decrease(self):
        with pytest.raises(ProblemFileError, match="radii") as excinfo:
            parse_problem_text(CUBIC_TEXT + "[options]\nradii = 0.01, 0.1\n")
        assert excinfo.value.line == 11

    def test_negative_tolerance(self):
        with pytest.raises(ProblemFileError, match="active_tol"):
            parse_problem_text(CUBIC_TEXT + "[options]\nactive_tol = -1\n")

    def test_negative_exponent(self):
        with pytest.raises(ProblemFileError, match="non-negative integer"):
            parse_problem_text(CUBIC_TEXT.replace("3:1", "-2:1"))

    def test_point_outside_solution_set(self):
        with pytest.raises(ProblemValidationError, match="not in solution set"):
            parse_problem_text(CUBIC_TEXT.replace("[point]\n1", "[point]\n2"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ProblemFileError, match="cannot read"):
            parse_problem(tmp_path / "absent.ini")


class TestWriteProblem:
    @pytest.mark.parametrize("name", ["cubic-regular", "cubic-degenerate", "orthant-corner", "halfline"])
    def test_catalogue_round_trip(self, name):
        original = builtin_instance(name, seed=11)
        text = write_problem(original)
        parsed = parse_problem_text(text)
        _same_instance(original, parsed)
        assert write_problem(parsed) == text

    def test_quadratic_and_composite(self, rng):
        inner = SmoothMap.affine(rng.standard_normal((2, 2)), rng.standard_normal(2))
        outer = SmoothMap.quadratic(rng.standard_normal((1, 2, 2)), rng.standard_normal((1, 2)), [0.0])
        g = SmoothMap.compose(outer, inner)
        x_bar = rng.standard_normal(2)
        original = ProblemInstance(
            MaxAffineFunction([[1.0]], -g(x_bar)),
            g,
            x_bar,
            radii=(0.3, 0.03),
            samples_per_radius=17,
            name="composed",
        )
        parsed = parse_problem_text(write_problem(original))
        _same_instance(original, parsed)
        assert parsed.g.parameters["outer"].kind == "quadratic"

    def test_callables_cannot_be_written(self):
        g = SmoothMap.from_callables(lambda x: 2.0 * x, lambda x: 2.0 * np.eye(1), n=1, m=1)
        p = ProblemInstance(MaxAffineFunction([[1.0]], [0.0]), g, [0.0])
        with pytest.raises(ProblemFileError, match="cannot be written"):
            write_problem(p)


class TestExcessFiles:
    def test_catalogue_file(self, problems_dir):
        data = parse_excess_problem(problems_dir / "excess_box.ini")
        assert data.tau == 1.0
        assert data.C.dim == 2
        assert data.D.row_count == 1

    def test_empty_cone_section(self):
        data = parse_excess_text("[c]\n1, 0, 1\n[d]\n")
        assert data.D.row_count == 0
        assert data.tau is None

    def test_row_length_mismatch(self):
        with pytest.raises(ProblemFileError, match=r"\[d\] rows need 2 entries"):
            parse_excess_text("[c]\n1, 0, 1\n[d]\n1, 0, 0\n")

    def test_unknown_option(self):
        with pytest.raises(ProblemFileError, match="unknown option"):
            parse_excess_text("[c]\n1, 0, 1\n[d]\n1, 0\n[options]\nrho = 1\n")


class TestReportFiles:
    def test_format_float(self):
        assert format_float(1.0 / 3.0) == "0.33333333333333331"
        assert format_float(math.inf) == "inf"
        assert float(format_float(0.1)) == 0.1

    def test_worst_witnesses(self):
        witnesses = [_witness(1e-2, r, 0.005) for r in (0.1, 0.3, 0.2)] + [_witness(1e-1, 0.25, 0.05)]
        selected = worst_witnesses(witnesses, per_radius=2)
        assert [(w.radius, w.ratio) for w in selected] == [(1e-1, 0.25), (1e-2, 0.3), (1e-2, 0.2)]

    def test_render_text(self):
        text = render_text(_report([]))
        assert "tau_theoretical = 0.333333" in text
        assert "tau_empirical = 0.34" in text
        assert "diagnosis: error-bound-holds" in text
        assert "Jacobian surjective at x_bar           : not checked" in text

    def test_plot_data_without_samples(self, tmp_path):
        path = emit_plot_data(_report([]), tmp_path / "plot.csv")
        assert path.read_text(encoding="utf-8") == "distance_to_x_bar,ratio\n"

    def test_write_report(self, tmp_path):
        witnesses = [_witness(1e-1, 0.3, 0.07), _witness(1e-2, 0.34, 0.006)]
        paths = write_report(_report(witnesses), tmp_path / "out")
        assert sorted(p.name for p in paths.values()) == [
            "plot_data.csv", "report.json", "report.txt", "trace.csv", "witnesses.csv",
        ]

        data = json.loads(paths["report.json"].read_text(encoding="utf-8"))
        assert data["diagnosis"] == "error-bound-holds"
        assert len(data["witnesses"]) == 2

        with paths["trace.csv"].open(newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["radius", "tau_theoretical_sup", "tau_empirical_sup", "sample_count"]
        assert [float(v) for v in rows[2][:3]] == [1e-2, 1.0 / 3.0, 0.34]

        plot = paths["plot_data.csv"].read_text(encoding="utf-8").splitlines()
        assert len(plot) == 3

    def test_infinite_modulus_in_json(self, tmp_path):
        report = _report([]).model_copy(update={"tau_empirical": math.inf})
        paths = write_report(report, tmp_path)
        assert '"tau_empirical": Infinity' in paths["report.json"].read_text(encoding="utf-8")
