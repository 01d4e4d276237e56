"""Moduli, equivalence checks and end-to-end analyses of the catalogue instances."""

import math

import numpy as np
import pytest

from errbound.core.config import Settings, settings, validate_settings
from errbound.services.analyzer_service import (
    AnalyzerService,
    ProblemInstance,
    ProblemValidationError,
    _trend,
    sufficiency_bound,
)
from errbound.services.function_service import MaxAffineFunction, SmoothMap
from errbound.services.geometry_service import PolyCone, cone_projection
from errbound.services.problem_service import builtin_instance
from errbound.services.report_service import render_text
from errbound.utils.constants import NON_SURJECTIVE_NOTE, NOT_APPLICABLE_NOTE


@pytest.fixture(scope="module")
def cubic_regular_report(analyzer, cubic_regular):
    return analyzer.analyze(cubic_regular)


@pytest.fixture(scope="module")
def cubic_degenerate_report(analyzer, cubic_degenerate):
    return analyzer.analyze(cubic_degenerate)


class TestProblemInstance:
    def test_infeasible_reference_point(self):
        with pytest.raises(ProblemValidationError, match="not in solution set"):
            ProblemInstance(MaxAffineFunction([[1.0]], [0.0]), SmoothMap.identity(1), [1.0])

    def test_radii_must_decrease(self, halfline):
        with pytest.raises(ProblemValidationError, match="strictly decreasing"):
            halfline.with_options(radii=(0.1, 0.2))

    def test_boundary_samples_default(self, halfline):
        assert halfline.boundary_samples == settings.BOUNDARY_SAMPLES == 200

    def test_boundary_samples_must_be_positive(self, halfline):
        with pytest.raises(ProblemValidationError, match="sample counts"):
            halfline.with_options(boundary_samples=0)

    def test_inner_fraction_must_leave_an_annulus(self):
        with pytest.raises(ValueError, match="EMPIRICAL_INNER_FRACTION"):
            validate_settings(Settings(EMPIRICAL_INNER_FRACTION=1.0))

    def test_dimension_mismatch(self):
        with pytest.raises(ProblemValidationError):
            ProblemInstance(MaxAffineFunction(np.eye(2), [0.0, 0.0]), SmoothMap.identity(1), [0.0])

    def test_with_options_keeps_functions(self, halfline):
        changed = halfline.with_options(seed=9)
        assert changed.seed == 9
        assert changed.f is halfline.f


class TestHelpers:
    @pytest.mark.parametrize(
        "values,expected",
        [
            ([5.0], "n/a"),
            ([1.0, 1.0, 1.0], "stable"),
            ([1.0, 2.0, 3.0], "increasing"),
            ([3.0, 2.0, 1.0], "decreasing"),
            ([1.0, 3.0, 2.0], "mixed"),
            ([1.0, math.inf], "increasing"),
        ],
    )
    def test_trend(self, values, expected):
        assert _trend(values) == expected

    def test_sufficiency_bound(self):
        assert sufficiency_bound(1.0 / 3.0, 0.05) == pytest.approx(0.4 / (1.0 - 0.05 - 0.05 / 3.0))
        assert sufficiency_bound(0.0, 0.5) == pytest.approx(1.0)

    @pytest.mark.parametrize("tau,epsilon", [(math.inf, 0.1), (1.0, 1.0), (10.0, 0.5)])
    def test_sufficiency_bound_undefined(self, tau, epsilon):
        assert sufficiency_bound(tau, epsilon) is None


class TestDistance:
    def test_halfline(self, analyzer, halfline):
        distance, point = analyzer.solution_set_distance(halfline, [0.5])
        assert distance == pytest.approx(0.5, abs=1e-9)
        assert point[0] <= 0.0

    def test_feasible_point(self, analyzer, halfline):
        distance, point = analyzer.solution_set_distance(halfline, [-0.3])
        assert distance == 0.0
        np.testing.assert_allclose(point, [-0.3])

    def test_cube(self, analyzer, cubic_regular):
        distance, _ = analyzer.solution_set_distance(cubic_regular, [1.2])
        assert distance == pytest.approx(0.2, abs=1e-8)


class TestCubicRegular:
    def test_theoretical_modulus(self, cubic_regular_report):
        assert cubic_regular_report.tau_theoretical == pytest.approx(1.0 / 3.0, abs=1e-9)

    def test_empirical_modulus(self, cubic_regular_report):
        trace = cubic_regular_report.traces[1]
        assert trace.radius == pytest.approx(1e-2)
        assert trace.tau_empirical_sup == pytest.approx(1.0 / 3.0, rel=0.05)
        assert cubic_regular_report.tau_empirical == pytest.approx(1.0 / 3.0, rel=0.05)

    def test_empirical_region_is_reported(self, cubic_regular_report):
        assert cubic_regular_report.empirical.region == "0.5r <= |x - x_bar| <= r"
        assert "empirical region  : 0.5r <= |x - x_bar| <= r" in render_text(cubic_regular_report)

    def test_diagnosis(self, cubic_regular_report):
        assert cubic_regular_report.hypotheses.metric_regularity.surjective
        assert cubic_regular_report.theoretical.applicable
        assert cubic_regular_report.kernel_inclusion is True
        assert cubic_regular_report.diagnosis == "error-bound-holds"
        assert cubic_regular_report.errors == []

    def test_boundary_excess_below_empirical_modulus(self, analyzer, cubic_regular, cubic_regular_report):
        samples = analyzer.boundary_samples(cubic_regular, cubic_regular.radii[-1], 20)
        assert samples
        for sample in samples:
            assert analyzer.sample_excess(cubic_regular, sample.point) <= cubic_regular_report.tau_empirical * 1.05

    def test_witness_ratios(self, cubic_regular_report):
        # d(x, S) / (x^3 - 1) = 1 / (x^2 + x + 1) for x > 1
        for witness in cubic_regular_report.witnesses[:20]:
            x = witness.x[0]
            assert witness.ratio == pytest.approx(1.0 / (x * x + x + 1.0), rel=1e-6)


class TestCubicDegenerate:
    def test_not_surjective(self, cubic_degenerate_report):
        assert not cubic_degenerate_report.hypotheses.metric_regularity.surjective
        assert NON_SURJECTIVE_NOTE in cubic_degenerate_report.notes
        assert cubic_degenerate_report.diagnosis == "hypotheses-violated"

    def test_empirical_sups_blow_up(self, cubic_degenerate_report):
        sups = cubic_degenerate_report.empirical.sups
        # ratio 1 / x^2 on the annulus r/2 <= x <= r
        for larger, smaller in zip(sups, sups[1:]):
            assert smaller >= 50.0 * larger
        assert cubic_degenerate_report.empirical.diverged
        assert math.isinf(cubic_degenerate_report.tau_empirical)

    def test_theoretical_modulus_misses_it(self, cubic_degenerate_report):
        assert cubic_degenerate_report.tau_theoretical == pytest.approx(0.0, abs=1e-12)
        assert cubic_degenerate_report.theoretical.sups == [0.0, 0.0, 0.0]

    def test_theoretical_modulus_not_applicable(self, cubic_degenerate_report):
        assert not cubic_degenerate_report.theoretical.applicable
        assert NOT_APPLICABLE_NOTE in cubic_degenerate_report.notes
        assert "(not applicable)" in render_text(cubic_degenerate_report)

    @pytest.mark.parametrize("radius", [1e-1, 1e-2, 1e-3])
    def test_only_x_bar_is_on_the_boundary(self, analyzer, cubic_degenerate, radius):
        # bisection stops at interior points like -1e-28 where 3x^2 vanishes numerically
        samples = analyzer.boundary_samples(cubic_degenerate, radius, 40)
        assert [(s.source, s.point) for s in samples] == [("anchor", [0.0])]


class TestOrthantCorner:
    def test_excess_at_corner(self, analyzer, orthant_corner):
        assert analyzer.sample_excess(orthant_corner, [0.0, 0.0]) == pytest.approx(math.sqrt(2.0), abs=1e-9)

    def test_excess_on_a_face(self, analyzer, orthant_corner):
        assert analyzer.sample_excess(orthant_corner, [0.0, -0.5]) == pytest.approx(1.0, abs=1e-9)

    def test_moduli(self, analyzer, orthant_corner):
        theoretical = analyzer.theoretical_modulus(orthant_corner)
        assert theoretical.value == pytest.approx(math.sqrt(2.0), abs=1e-6)

        empirical, witnesses = analyzer.empirical_modulus(orthant_corner)
        assert 1.0 <= empirical.value <= math.sqrt(2.0) * (1.0 + 1e-4)
        assert all(w.distance_to_x_bar <= w.radius * (1.0 + 1e-12) for w in witnesses)

    def test_linearised_bound(self, analyzer, orthant_corner):
        tau = analyzer.dirderiv_global_error_bound(orthant_corner, [0.0, 0.0])
        assert tau == pytest.approx(math.sqrt(2.0), abs=1e-9)


class TestHalfline:
    def test_moduli(self, analyzer, halfline):
        report = analyzer.analyze(halfline)
        assert report.tau_theoretical == pytest.approx(1.0, abs=1e-9)
        assert report.tau_empirical == pytest.approx(1.0, abs=1e-6)
        assert report.diagnosis == "error-bound-holds"

    def test_linearised_bound(self, analyzer, halfline):
        assert analyzer.dirderiv_global_error_bound(halfline, [0.0]) == pytest.approx(1.0)

    def test_kernel_inclusion(self, analyzer, halfline):
        assert analyzer.kernel_inclusion(halfline, [0.0])


class TestInteriorPoint:
    def test_no_witnesses(self, analyzer):
        p = ProblemInstance(
            MaxAffineFunction([[1.0]], [-1.0]),
            SmoothMap.identity(1),
            [0.0],
            radii=(1e-1, 1e-2),
            samples_per_radius=20,
        )
        theoretical = analyzer.theoretical_modulus(p)
        empirical, witnesses = analyzer.empirical_modulus(p)
        assert theoretical.interior and empirical.interior
        assert theoretical.value == 0.0 and empirical.value == 0.0
        assert witnesses == []


class TestBoundaryCondition:
    def test_halfspaces(self, analyzer, rng):
        f = MaxAffineFunction(rng.standard_normal((4, 2)), rng.uniform(-1.0, 0.0, size=4))
        check = analyzer.check_boundary_condition(f, rng)
        assert check.verdict == "pass"
        assert check.sampled_points > 0

    def test_whole_space(self, analyzer):
        f = MaxAffineFunction([[0.0, 0.0]], [-1.0])
        assert analyzer.check_boundary_condition(f).verdict == "pass"


def _grid_hoffman(A: np.ndarray, step: float) -> float:
    """
    sup of d(x, {A x <= 0}) / [max A x]_+ over a grid of the surface of [-0.5, 0.5]^n.

    The ratio is positively homogeneous, so the surface sees every grid direction.
    """
    n = A.shape[1]
    cone = PolyCone(A)
    axis = np.linspace(-0.5, 0.5, int(round(1.0 / step)) + 1)
    mesh = np.meshgrid(*([axis] * (n - 1)), indexing="ij")
    face = np.stack([m.ravel() for m in mesh], axis=1)
    points = np.vstack([np.insert(face, k, side, axis=1) for k in range(n) for side in (-0.5, 0.5)])
    violations = np.max(points @ A.T, axis=1)
    best = 0.0
    for x, violation in zip(points, violations):
        if violation > 1e-12:
            best = max(best, cone_projection(x, cone)[0] / violation)
    return best


class TestSuites:
    def test_hoffman_constant(self, analyzer):
        """tau_theoretical of max(A x) <= 0 at x_bar = 0 matches the grid Hoffman ratio."""
        rng = np.random.default_rng(77)
        checked = 0
        while checked < 20:
            n = 2 if checked % 2 == 0 else 3
            A = rng.standard_normal((int(rng.integers(2, 5)), n))
            p = ProblemInstance(
                MaxAffineFunction(A, np.zeros(len(A))), SmoothMap.identity(n), np.zeros(n),
                radii=(1e-1,), boundary_samples=20, seed=checked,
            )
            tau = analyzer.theoretical_modulus(p).value
            if not math.isfinite(tau) or tau > 50.0:
                continue
            grid = _grid_hoffman(A, 1e-3 if n == 2 else 2e-2)
            assert grid <= tau * (1.0 + 1e-6) + 1e-9, (checked, grid, tau)
            assert grid == pytest.approx(tau, rel=0.05), (checked, A.tolist())
            checked += 1

    def test_excess_matches_pointwise_check(self, analyzer):
        rng = np.random.default_rng(2718)
        checked = 0
        while checked < 50:
            n = int(rng.integers(2, 4))
            if checked % 2:
                g = SmoothMap.affine(rng.standard_normal((2, n)), rng.standard_normal(2))
            else:
                g = SmoothMap.quadratic(rng.standard_normal((2, n, n)), rng.standard_normal((2, n)), np.zeros(2))
            x = rng.uniform(-1.0, 1.0, size=n)
            y = g(x)
            slopes = rng.standard_normal((3, 2))
            # two pieces active at g(x), one strictly inactive
            intercepts = -slopes @ y
            intercepts[2] -= 1.0
            p = ProblemInstance(MaxAffineFunction(slopes, intercepts), g, x)

            value = analyzer.sample_excess(p, x)
            if not math.isfinite(value) or value < 1e-2:
                continue
            for tau in (0.5 * value, value, 2.0 * value):
                expected = value <= tau
                assert analyzer.excess_vs_pointwise_equivalence(p, x, tau, directions=128) == expected, (checked, tau)
            checked += 1


class TestDeterminism:
    def test_same_seed_same_report(self, halfline):
        first = AnalyzerService(workers=1).analyze(halfline)
        second = AnalyzerService(workers=1).analyze(halfline)
        assert first.model_dump_json() == second.model_dump_json()

    def test_worker_count_does_not_change_results(self, orthant_corner):
        sequential = AnalyzerService(workers=1).analyze(orthant_corner)
        pooled = AnalyzerService(workers=2).analyze(orthant_corner)
        assert sequential.model_dump_json() == pooled.model_dump_json()

    def test_seed_changes_samples(self):
        a = builtin_instance("halfline", radii=(1e-1,), samples_per_radius=10, seed=1)
        b = a.with_options(seed=2)
        service = AnalyzerService(workers=1)
        assert service.empirical_modulus(a)[1] != service.empirical_modulus(b)[1]
