"""Linear and metric regularity, the tangent chain rule, contact tests and Robinson's condition."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from errbound.core.exceptions import ContractViolationError
from errbound.services.function_service import MaxAffineFunction, SmoothMap, composite_oracle
from errbound.services.geometry_service import (
    PolyCone,
    Polyhedron,
    PolyhedronSet,
    SetOracle,
    tangent_cone,
)
from errbound.services.regularity_service import (
    RegularityError,
    empirical_metric_regularity,
    linear_regularity,
    preimage_distance,
    robinson_check,
    shapiro_epigraph_test,
    shapiro_set_test,
    tangent_chain_rule,
    uniform_regularity_radius,
)
from errbound.utils.constants import SHAPIRO_SET_EPSILONS
from errbound.utils.sampling_utils import sample_ball, unit_directions

CUBE = SmoothMap.polynomial([[(3, 1.0)]])


class CrossingLines(SetOracle):
    """The two coordinate axes of the plane: nonconvex, no contact property at the origin."""

    dim = 2

    def residual(self, x):
        return float(min(abs(x[0]), abs(x[1])))

    def project(self, x):
        point = np.array(x, dtype=float)
        point[int(np.argmin(np.abs(point)))] = 0.0
        return point

    def tangent_distance(self, u, v):
        on_first, on_second = abs(u[1]) <= 1e-12, abs(u[0]) <= 1e-12
        if on_first and on_second:
            return float(min(abs(v[0]), abs(v[1])))
        return float(abs(v[1]) if on_first else abs(v[0]))


class PowerGraph(SetOracle):
    """Graph of t -> |t|^1.5: a C^1 curve, tangent cone the tangent line."""

    dim = 2

    @staticmethod
    def _point(t):
        return np.array([t, abs(t) ** 1.5])

    def residual(self, x):
        return float(abs(x[1] - abs(x[0]) ** 1.5))

    def project(self, x):
        x = np.asarray(x, dtype=float)
        reach = float(np.linalg.norm(x - self._point(x[0])))
        grid = np.linspace(x[0] - reach, x[0] + reach, 401)
        gaps = (grid - x[0]) ** 2 + (np.abs(grid) ** 1.5 - x[1]) ** 2
        best = int(np.argmin(gaps))
        step = grid[1] - grid[0] if reach > 0 else 0.0
        result = minimize_scalar(
            lambda t: (t - x[0]) ** 2 + (abs(t) ** 1.5 - x[1]) ** 2,
            bounds=(grid[best] - step, grid[best] + step),
            method="bounded",
            options={"xatol": 1e-14},
        ) if step > 0 else None
        return self._point(float(result.x) if result is not None else float(grid[best]))

    def tangent_distance(self, u, v):
        direction = np.array([1.0, 1.5 * np.sign(u[0]) * abs(u[0]) ** 0.5])
        direction /= np.linalg.norm(direction)
        return float(np.linalg.norm(v - (v @ direction) * direction))


class NoTangents(SetOracle):
    dim = 1

    def residual(self, x):
        return max(float(x[0]), 0.0)

    def project(self, x):
        return np.minimum(x, 0.0)


class TestLinearRegularity:
    def test_cube_at_one(self):
        result = linear_regularity(CUBE.jacobian([1.0]))
        assert result.surjective
        assert result.sigma_min == pytest.approx(3.0)
        assert result.kappa == pytest.approx(1.0 / 3.0, abs=1e-15)

    def test_cube_at_zero(self):
        result = linear_regularity(CUBE.jacobian([0.0]))
        assert not result.surjective
        assert math.isinf(result.kappa)

    def test_more_outputs_than_inputs(self):
        result = linear_regularity([[1.0], [2.0]])
        assert not result.surjective
        assert result.sigma_min == 0.0

    def test_wide_matrix(self):
        result = linear_regularity([[3.0, 0.0, 0.0], [0.0, 4.0, 0.0]])
        assert result.surjective
        assert result.kappa == pytest.approx(1.0 / 3.0)


class TestUniformRadius:
    def test_cube(self):
        # 1 / (3 x^2) <= 1/2 exactly for x >= sqrt(2/3)
        radius = uniform_regularity_radius(CUBE, [1.0], 0.5)
        assert radius == pytest.approx(1.0 - math.sqrt(2.0 / 3.0), abs=1e-6)

    def test_target_below_linear_modulus(self):
        with pytest.raises(ContractViolationError):
            uniform_regularity_radius(CUBE, [1.0], 0.3)

    def test_not_surjective(self):
        with pytest.raises(RegularityError):
            uniform_regularity_radius(CUBE, [0.0], 10.0)


class TestMetricRegularity:
    def test_preimage_distance(self):
        distance = preimage_distance(CUBE, np.array([1.0]), np.array([8.0]), np.random.default_rng(0))
        assert distance == pytest.approx(1.0, abs=1e-8)

    def test_cube_at_one(self):
        report = empirical_metric_regularity(CUBE, [1.0], radius=0.1, pairs=400, seed=5)
        closed_form = 1.0 / (3.0 * 0.9 ** 2)
        assert report.surjective
        assert report.kappa_linear == pytest.approx(1.0 / 3.0, abs=1e-15)
        assert report.kappa_empirical == pytest.approx(closed_form, rel=0.15)
        assert report.kappa_empirical <= closed_form
        assert report.failed_pairs == 0
        assert report.worst_pair.ratio == report.kappa_empirical

    def test_cube_at_zero_is_not_surjective(self):
        report = empirical_metric_regularity(CUBE, [0.0], radius=0.1, pairs=50, seed=5)
        assert not report.surjective
        assert math.isinf(report.kappa_linear)

    @pytest.mark.parametrize("g", [
        SmoothMap.quadratic(
            [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.5], [0.5, 0.0]]], [[1.0, 0.5], [0.2, 1.0]], [0.0, 0.0]
        ),
        SmoothMap.affine([[1.0, 0.5], [0.2, 1.0]], [0.3, -0.1]),
    ], ids=["quadratic", "affine"])
    def test_bounded_by_worst_linear_modulus_nearby(self, g):
        x_bar, radius = np.array([0.3, -0.2]), 0.02
        nearby = sample_ball(np.random.default_rng(8), x_bar, 5.0 * radius, 2000)
        bound = max(linear_regularity(g.jacobian(x)).kappa for x in nearby)
        report = empirical_metric_regularity(g, x_bar, radius=radius, pairs=200, seed=9)
        assert report.failed_pairs == 0
        assert 0.0 < report.kappa_empirical <= 1.15 * bound

    def test_radius_must_be_positive(self):
        with pytest.raises(ContractViolationError):
            empirical_metric_regularity(CUBE, [1.0], radius=0.0)


class TestTangentChainRule:
    def test_preimage_cone(self):
        rng = np.random.default_rng(31)
        checked = 0
        while checked < 50:
            n = int(rng.integers(2, 4))
            if checked % 2:
                g = SmoothMap.affine(rng.standard_normal((2, n)), rng.standard_normal(2))
            else:
                g = SmoothMap.quadratic(rng.standard_normal((2, n, n)), rng.standard_normal((2, n)), np.zeros(2))
            x = rng.uniform(-1.0, 1.0, size=n)
            J = g.jacobian(x)
            if not linear_regularity(J).surjective:
                continue
            y = g(x)
            slopes = rng.standard_normal((2, 2))
            f = MaxAffineFunction(slopes, -slopes @ y)
            T = tangent_cone(f.sublevel_set(), y)
            D = tangent_chain_rule(g, x, T)

            # curve check: directions d with f(g(x + t d)) <= 0
            t = 1e-8
            for d in unit_directions(rng, n, 200):
                if f(g(x + t * d)) <= 0.0:
                    assert np.all(D.normals @ d <= 1e-6)

            # cone members map into the outer tangent cone
            for h in unit_directions(rng, n, 200):
                if D.contains(h):
                    assert np.all(T.normals @ (J @ h) <= 1e-6)
            checked += 1

    def test_whole_space(self):
        D = tangent_chain_rule(CUBE, [1.0], PolyCone.whole_space(1))
        assert D.row_count == 0


class TestShapiroSetTest:
    def test_convex_polyhedron_passes(self):
        square = PolyhedronSet(Polyhedron.box([0.0, 0.0], [1.0, 1.0]))
        report = shapiro_set_test(square, [1.0, 1.0], SHAPIRO_SET_EPSILONS, seed=3)
        assert report.verdict == "pass"
        assert report.contact_ratio_sup <= 1e-9

    def test_crossing_lines_fail(self):
        report = shapiro_set_test(CrossingLines(), [0.0, 0.0], SHAPIRO_SET_EPSILONS, seed=3)
        assert report.verdict == "fail"
        assert report.contact_ratio_sup > 0.1
        assert math.isinf(report.delta_found[-1])

    def test_smooth_curve_passes(self):
        report = shapiro_set_test(PowerGraph(), [0.0, 0.0], SHAPIRO_SET_EPSILONS, seed=3, pairs=20, levels=14)
        assert report.verdict == "pass"
        assert report.contact_ratio_sup <= 0.1

    def test_reference_point_outside(self):
        square = PolyhedronSet(Polyhedron.box([0.0, 0.0], [1.0, 1.0]))
        with pytest.raises(ContractViolationError):
            shapiro_set_test(square, [2.0, 2.0])

    def test_needs_tangent_oracle(self):
        with pytest.raises(RegularityError):
            shapiro_set_test(NoTangents(), [0.0], seed=1)


class TestShapiroEpigraphTest:
    def test_convex_function_passes(self):
        f = MaxAffineFunction([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]], [0.0, 0.0, 0.0])
        report = shapiro_epigraph_test(composite_oracle(f, SmoothMap.identity(2)), [0.0, 0.0], seed=2)
        assert report.verdict == "pass"
        assert report.note is not None

    def test_concave_kink_fails(self):
        phi = composite_oracle(MaxAffineFunction([[1.0]], [0.0]), SmoothMap.identity(1))

        def negative_abs(x):
            return -abs(phi(x))

        report = shapiro_epigraph_test(negative_abs, [0.0], epsilons=[0.1], seed=2)
        assert report.verdict == "fail"


class TestRobinson:
    def test_identity_satisfies(self):
        f = MaxAffineFunction([[1.0]], [0.0])
        cone = tangent_cone(f.sublevel_set(), [0.0])
        assert robinson_check(SmoothMap.identity(1), [0.0], cone)

    def test_degenerate_cube_violates(self):
        f = MaxAffineFunction([[1.0]], [0.0])
        cone = tangent_cone(f.sublevel_set(), [0.0])
        assert not robinson_check(CUBE, [0.0], cone)

    def test_column_map_into_orthant_violates(self):
        # g(x_bar) + range(J) - A = {y2 <= 0} misses (0, r)
        assert not robinson_check(SmoothMap.affine([[1.0], [0.0]]), [0.0], PolyCone(-np.eye(2)))

    def test_monotone_under_cone_enlargement(self):
        g = SmoothMap.affine([[1.0], [0.5]])
        rng = np.random.default_rng(17)
        passes = 0
        for _ in range(60):
            rows = rng.standard_normal((int(rng.integers(1, 4)), 2))
            if robinson_check(g, [0.0], PolyCone(rows)):
                passes += 1
                assert robinson_check(g, [0.0], PolyCone(rows[:1]))
        assert passes > 0
