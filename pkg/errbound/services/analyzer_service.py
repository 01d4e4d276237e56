"""
errbound/services/analyzer_service.py

Purpose: Local error-bound analysis of f(g(x)) <= 0 at x_bar

- Problem instances (f, g, x_bar, radius schedule, tolerances, seed)
- Distance to the solution set S = {x : f(g(x)) <= 0}
- Boundary sampling of S near x_bar
- Theoretical modulus: limsup over boundary points of
  e({h : d+f(g(x); J h) <= 1}, J^-1(T^B(S_f, g(x))))
- Empirical modulus: per-radius sup of d(x, S) / [f(g(x))]_+
- Pointwise and linearised equivalence checks, hypothesis checks
- End-to-end analysis with a diagnosis
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np

from errbound import __version__
from errbound.core.config import settings
from errbound.core.exceptions import ErrboundError
from errbound.core.logging import LogContext, get_logger
from errbound.schemas.problem import Tolerances
from errbound.schemas.report import (
    AnalysisReport,
    BoundaryCheck,
    BoundarySample,
    Hypotheses,
    ModulusTrace,
    RadiusTrace,
    Witness,
)
from errbound.services.function_service import (
    CompositeOracle,
    MaxAffineFunction,
    SmoothMap,
    composite_dirderiv,
    composite_oracle,
    sublevel_polyhedron,
)
from errbound.services.geometry_service import (
    EmptyPolyhedronError,
    GeometryError,
    PolyCone,
    SetOracle,
    UnsupportedSizeError,
    boundary_anchor,
    distance_to_polyhedron,
    excess,
    tangent_cone,
    tangent_cone_distance,
    vertices_and_rays,
)
from errbound.services.regularity_service import (
    empirical_metric_regularity,
    robinson_check,
    shapiro_epigraph_test,
    tangent_chain_rule,
)
from errbound.utils.constants import (
    MSG_NOT_IN_SOLUTION_SET,
    MSG_RADII_DECREASING,
    NON_SURJECTIVE_NOTE,
    NOT_APPLICABLE_NOTE,
)
from errbound.utils.optimize_utils import bisect_boundary, nearest_point
from errbound.utils.sampling_utils import (
    axis_directions,
    grid_points,
    make_rng,
    points_per_axis,
    sample_annulus,
    sample_ball,
    spawn_rngs,
    unit_directions,
)
from errbound.utils.validation_utils import as_vector, check_dim, is_strictly_decreasing

logger = get_logger(__name__)

# Gamma used when anchoring boundary samples at nearest points
ANCHOR_GAMMA = 0.5


class AnalyzerError(ErrboundError):
    """Base exception for the analyzer."""
    pass


class ProblemValidationError(AnalyzerError):
    """A problem instance violates one of its invariants."""
    pass


class SearchBoxError(AnalyzerError):
    """No feasible point was found while computing a distance to S."""
    pass


# ============================================================================
# PROBLEM INSTANCE
# ============================================================================

@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """
    f(g(x)) <= 0 near x_bar, with the sampling schedule of one analysis.

    Invariants: f.dim == g.m, x_bar in R^n with f(g(x_bar)) <= feasibility tol,
    radii positive and strictly decreasing.
    """

    f: MaxAffineFunction
    g: SmoothMap
    x_bar: np.ndarray
    radii: Tuple[float, ...] = field(default_factory=lambda: tuple(settings.DEFAULT_RADII))
    samples_per_radius: int = field(default_factory=lambda: settings.SAMPLES_PER_RADIUS)
    tolerances: Tolerances = field(default_factory=Tolerances)
    seed: int = 0
    name: str = "instance"
    boundary_samples: int = field(default_factory=lambda: settings.BOUNDARY_SAMPLES)

    def __post_init__(self):
        try:
            check_dim("f dimension vs g output", self.g.m, self.f.dim)
            object.__setattr__(self, "x_bar", as_vector(self.x_bar, "x_bar", dim=self.g.n))
        except ErrboundError as exc:
            raise ProblemValidationError(str(exc)) from exc
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        if not is_strictly_decreasing(self.radii):
            raise ProblemValidationError(MSG_RADII_DECREASING)
        if self.samples_per_radius < 1 or self.boundary_samples < 1:
            raise ProblemValidationError("sample counts must be positive")
        value = self.phi(self.x_bar)
        if not value <= self.tolerances.feasibility_tol:
            raise ProblemValidationError(MSG_NOT_IN_SOLUTION_SET.format(value=value))

    @property
    def phi(self) -> CompositeOracle:
        return composite_oracle(self.f, self.g)

    @property
    def dim(self) -> int:
        return self.g.n

    @property
    def solution_polyhedron(self):
        """S_f = {y : f(y) <= 0}."""
        return self.f.sublevel_set()

    def active_gradient_norm(self, x) -> float:
        """Largest |J(x)^T slope_i| over pieces of f active at g(x)."""
        x = as_vector(x, "x", dim=self.dim)
        active = self.f.active_set(self.g(x), self.tolerances.active_tol)
        rows = self.f.slopes[list(active.indices)] @ self.g.jacobian(x)
        return float(np.max(np.linalg.norm(rows, axis=1)))

    def with_options(self, **changes) -> "ProblemInstance":
        return replace(self, **changes)


class SolutionSetOracle(SetOracle):
    """S = {x : f(g(x)) <= 0} as a set oracle; tangent cones via the chain rule."""

    def __init__(self, problem: ProblemInstance, service: "AnalyzerService"):
        self.problem = problem
        self.service = service
        self.dim = problem.dim

    def residual(self, x):
        return max(self.problem.phi(x), 0.0)

    def project(self, x):
        return self.service.solution_set_distance(self.problem, x)[1]

    def tangent_distance(self, u, v):
        return tangent_cone_distance(v, self.service.chain_rule_cone(self.problem, u))


def _trend(values: Sequence[float]) -> str:
    if len(values) < 2:
        return "n/a"
    finite = [v for v in values if math.isfinite(v)]
    if len(finite) != len(values):
        return "increasing" if math.isinf(values[-1]) else "mixed"
    scale = max(1e-12, max(abs(v) for v in values))
    steps = np.diff(values) / scale
    if np.all(np.abs(steps) <= 0.01):
        return "stable"
    if np.all(steps >= -0.01):
        return "increasing"
    if np.all(steps <= 0.01):
        return "decreasing"
    return "mixed"


def sufficiency_bound(tau: float, epsilon: float) -> Optional[float]:
    """
    max{eps/(1 - eps), (tau + eps + tau*eps)/(1 - eps - tau*eps)}: the error-bound
    constant implied by a contact property with this epsilon; None when undefined.
    """
    if not math.isfinite(tau) or not 0.0 <= epsilon < 1.0:
        return None
    denominator = 1.0 - epsilon - tau * epsilon
    if denominator <= 0.0:
        return None
    return max(epsilon / (1.0 - epsilon), (tau + epsilon + tau * epsilon) / denominator)


# ============================================================================
# ANALYZER SERVICE
# ============================================================================

class AnalyzerService:
    """
    Runs the modulus computations and the full analysis of a ProblemInstance.
    Holds no per-instance state; safe to share across threads.
    """

    def __init__(self, workers: Optional[int] = None):
        self.workers = workers or settings.WORKERS

    # ---- distances ---------------------------------------------------------

    def solution_set_distance(self, p: ProblemInstance, x) -> Tuple[float, np.ndarray]:
        """
        d(x, S) and a minimiser z in S.

        Seeds: bisection from x towards x_bar, the closest feasible points of a
        grid (n <= 3) or of random draws (n > 3) in the ball of radius |x - x_bar|
        around x, and x_bar itself. Each seed is refined by SLSQP on the
        piecewise constraints a_i . g(z) + b_i <= 0; an infeasible refinement is
        pulled back to its seed by bisection.

        Raises:
            SearchBoxError: No feasible point in the search box
        """
        x = as_vector(x, "x", dim=p.dim)
        phi = p.phi
        if phi(x) <= 0.0:
            return 0.0, x.copy()

        x_bar = p.x_bar
        reach = 1.05 * float(np.linalg.norm(x - x_bar))
        seeds: List[np.ndarray] = []
        if phi(x_bar) <= 0.0:
            seeds.append(x_bar.copy())
            seeds.append(bisect_boundary(phi, x_bar, x))

        if p.dim <= 3:
            per_axis = points_per_axis(p.dim, settings.DISTANCE_GRID_BUDGET, settings.GRID_POINTS_PER_AXIS)
            candidates = grid_points(x, reach, per_axis)
        else:
            candidates = sample_ball(make_rng(p.seed), x, reach, settings.DISTANCE_GRID_BUDGET)
        feasible = candidates[phi.many(candidates) <= 0.0]
        if feasible.size:
            order = np.argsort(np.linalg.norm(feasible - x, axis=1))
            seeds.extend(feasible[order[: settings.DISTANCE_STARTS]])

        if not seeds:
            raise SearchBoxError(f"no feasible point within {reach:.3g} of x")

        slopes, intercepts = p.f.slopes, p.f.intercepts

        def constraint(z):
            return -(slopes @ p.g(z) + intercepts)

        def constraint_jac(z):
            return -(slopes @ p.g.jacobian(z))

        best_distance, best_point = math.inf, None
        for seed in seeds:
            candidate = nearest_point(x, seed, constraint, constraint_jac)
            if candidate is None:
                candidate = seed
            elif phi(candidate) > 0.0:
                candidate = bisect_boundary(phi, seed, candidate)
            for point in (candidate, seed):
                distance = float(np.linalg.norm(x - point))
                if distance < best_distance:
                    best_distance, best_point = distance, point
        return best_distance, best_point

    # ---- boundary --------------------------------------------------------

    def boundary_samples(
        self,
        p: ProblemInstance,
        radius: float,
        count: int,
        rng: Optional[np.random.Generator] = None,
    ) -> List[BoundarySample]:
        """
        Points of bd(S) within radius of x_bar: nearest points of S to random
        infeasible points (anchored), zero crossings of f o g on random segments,
        and x_bar itself when it lies on the boundary. Non-anchor candidates whose
        active gradients are all below the division guard are dropped.
        """
        rng = rng or make_rng(p.seed)
        phi = p.phi
        tol = p.tolerances.boundary_tol
        x_bar = p.x_bar
        samples: List[BoundarySample] = []

        def accept(point: np.ndarray, source: str) -> None:
            value = abs(phi(point))
            if value > tol or np.linalg.norm(point - x_bar) > radius:
                return
            # a feasible-side stop where every active gradient vanishes need not lie on bd(S)
            if source != "anchor" and p.active_gradient_norm(point) <= p.tolerances.division_guard:
                logger.debug(f"Boundary candidate dropped: active gradients vanish at {point.tolist()}")
                return
            samples.append(BoundarySample(point=point.tolist(), residual=value, source=source))

        accept(x_bar, "anchor")

        oracle = SolutionSetOracle(p, self)
        projection_count = count // 2
        for x in sample_ball(rng, x_bar, radius, projection_count):
            if phi(x) <= p.tolerances.division_guard:
                continue
            try:
                anchor = boundary_anchor(x, oracle, ANCHOR_GAMMA, tol=p.tolerances.feasibility_tol)
            except (ErrboundError, ValueError) as exc:
                logger.debug(f"Boundary projection skipped: {exc}")
                continue
            accept(anchor.point, "projection")

        ends = sample_ball(rng, x_bar, radius, 2 * (count - projection_count))
        values = phi.many(ends)
        for (a, value_a), (b, value_b) in zip(zip(ends[0::2], values[0::2]), zip(ends[1::2], values[1::2])):
            if value_a <= 0.0 < value_b:
                accept(bisect_boundary(phi, a, b), "bisection")
            elif value_b <= 0.0 < value_a:
                accept(bisect_boundary(phi, b, a), "bisection")

        if len(samples) <= 1:
            logger.info(f"Few boundary points within radius {radius:g} (x_bar interior or isolated)")
        return samples

    def check_boundary_condition(self, f: MaxAffineFunction, rng: Optional[np.random.Generator] = None,
                                 count: int = 64, tol: Optional[float] = None) -> BoundaryCheck:
        """
        Sampled check of bd(S_f) in f^-1(0): vertices of S_f and projections of
        random points onto S_f and onto each facet hyperplane within S_f.
        """
        rng = rng or make_rng(0)
        tol = settings.BOUNDARY_TOL if tol is None else tol
        polyhedron = f.sublevel_set()
        if not polyhedron.row_count:
            # S_f is the whole space: empty boundary
            return BoundaryCheck(verdict="pass", sampled_points=0)
        points: List[np.ndarray] = []

        try:
            points.extend(vertices_and_rays(polyhedron).vertices)
        except EmptyPolyhedronError:
            return BoundaryCheck(verdict="inconclusive", sampled_points=0)
        except UnsupportedSizeError:
            pass

        scale = 1.0 + float(np.max(np.abs(polyhedron.offsets))) if polyhedron.row_count else 1.0
        for y in scale * rng.standard_normal((count, f.dim)):
            projection = distance_to_polyhedron(y, polyhedron)
            if projection.distance > 0.0:
                points.append(projection.point)
            for normal, offset in zip(polyhedron.normals, polyhedron.offsets):
                on_facet = y - (normal @ y - offset) * normal
                if polyhedron.contains(on_facet, settings.ACTIVE_TOL):
                    points.append(on_facet)

        if not points:
            return BoundaryCheck(verdict="inconclusive", sampled_points=0)
        # points sit on bd(S_f); a strictly negative value marks an interior point
        worst = max(max(-f(y), 0.0) for y in points)
        verdict = "pass" if worst <= tol * (1.0 + scale) else "fail"
        return BoundaryCheck(verdict=verdict, sampled_points=len(points), worst_value=worst)

    # ---- cones at boundary points -----------------------------------------

    def chain_rule_cone(self, p: ProblemInstance, x) -> PolyCone:
        """D(x) = J(x)^-1 T^B(S_f, g(x))."""
        x = as_vector(x, "x", dim=p.dim)
        outer = tangent_cone(p.solution_polyhedron, p.g(x), p.tolerances.active_tol)
        return tangent_chain_rule(p.g, x, outer)

    def level_polyhedron(self, p: ProblemInstance, x, level: float = 1.0):
        """C(x) = {h : d+f(g(x); J h) <= level}."""
        return sublevel_polyhedron(p.f, p.g, x, level, p.tolerances.active_tol)

    def sample_excess(self, p: ProblemInstance, x, rng: Optional[np.random.Generator] = None) -> float:
        """e(C(x), D(x)) at one boundary point."""
        return excess(self.level_polyhedron(p, x), self.chain_rule_cone(p, x), rng).value

    # ---- moduli -------------------------------------------------------------

    def _boundary_by_radius(self, p: ProblemInstance) -> List[List[BoundarySample]]:
        rngs = spawn_rngs(p.seed, 2 * len(p.radii))[len(p.radii):]
        count = p.boundary_samples

        def run(index: int) -> List[BoundarySample]:
            with LogContext(instance=p.name, radius=p.radii[index], operation="boundary_samples"):
                return self.boundary_samples(p, p.radii[index], count, rngs[index])

        return self._map(run, range(len(p.radii)))

    def _map(self, fn: Callable[[int], Any], indices) -> List[Any]:
        indices = list(indices)
        if self.workers > 1 and len(indices) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(fn, indices))
        return [fn(i) for i in indices]

    def theoretical_modulus(
        self,
        p: ProblemInstance,
        samples_by_radius: Optional[List[List[BoundarySample]]] = None,
        hypotheses_hold: bool = True,
    ) -> ModulusTrace:
        """
        Per-radius max of e(C(x), D(x)) over boundary samples; the value is the
        smallest-radius sup. No boundary samples at all gives 0 with the interior flag.
        Samples whose excess computation fails are flagged and excluded. With
        hypotheses_hold False the values are still computed but the trace is
        marked not applicable.
        """
        if samples_by_radius is None:
            samples_by_radius = self._boundary_by_radius(p)

        sups, counts, flagged = [], [], 0
        for radius, samples in zip(p.radii, samples_by_radius):
            values = []
            for sample in samples:
                try:
                    values.append(self.sample_excess(p, sample.point))
                except GeometryError as exc:
                    flagged += 1
                    logger.warning(f"Excess failed at a boundary sample (radius {radius:g}): {exc}")
            sups.append(max(values) if values else 0.0)
            counts.append(len(values))

        if not any(counts):
            return ModulusTrace(
                value=0.0, sups=sups, counts=counts, interior=True, flagged=flagged, applicable=hypotheses_hold,
            )
        return ModulusTrace(
            value=sups[-1],
            sups=sups,
            counts=counts,
            trend=_trend(sups),
            diverged=math.isinf(sups[-1]),
            flagged=flagged,
            applicable=hypotheses_hold,
        )

    def empirical_modulus(self, p: ProblemInstance) -> Tuple[ModulusTrace, List[Witness]]:
        """
        Per-radius sup of d(x, S) / [f(g(x))]_+ over samples of
        EMPIRICAL_INNER_FRACTION*r <= |x - x_bar| <= r, the whole ball B(x_bar, r)
        when the fraction is 0 (samples with [f(g(x))]_+ below the division guard
        are discarded). The value is the smallest-radius sup, or +inf when
        the last sup reaches DIVERGENCE_FLOOR after growing DIVERGENCE_GROWTH-fold.
        """
        rngs = spawn_rngs(p.seed, 2 * len(p.radii))[: len(p.radii)]
        guard = p.tolerances.division_guard
        phi = p.phi
        inner = settings.EMPIRICAL_INNER_FRACTION
        region = f"{inner:g}r <= |x - x_bar| <= r" if inner > 0.0 else None

        def run(index: int) -> Tuple[float, int, List[Witness]]:
            radius = p.radii[index]
            with LogContext(instance=p.name, radius=radius, operation="empirical_modulus"):
                points = sample_annulus(rngs[index], p.x_bar, inner * radius, radius, p.samples_per_radius)
                values = phi.many(points)
                witnesses = []
                for x, value in zip(points, values):
                    if not value > guard:
                        continue
                    try:
                        distance, _ = self.solution_set_distance(p, x)
                    except AnalyzerError as exc:
                        logger.warning(f"Distance failed: {exc}")
                        continue
                    witnesses.append(Witness(
                        radius=radius,
                        x=x.tolist(),
                        distance=distance,
                        violation=float(value),
                        ratio=distance / float(value),
                        distance_to_x_bar=float(np.linalg.norm(x - p.x_bar)),
                    ))
                sup = max((w.ratio for w in witnesses), default=0.0)
                logger.info(f"Empirical sup {sup:.6g} from {len(witnesses)} samples")
                return sup, len(witnesses), witnesses

        results = self._map(run, range(len(p.radii)))
        sups = [r[0] for r in results]
        counts = [r[1] for r in results]
        witnesses = [w for r in results for w in r[2]]

        if not any(counts):
            return ModulusTrace(value=0.0, sups=sups, counts=counts, interior=True, region=region), witnesses

        diverged = (
            len(sups) >= 2
            and sups[-1] >= settings.DIVERGENCE_FLOOR
            and sups[-1] >= settings.DIVERGENCE_GROWTH * sups[-2]
        )
        trace = ModulusTrace(
            value=math.inf if diverged else sups[-1],
            sups=sups,
            counts=counts,
            trend=_trend(sups),
            diverged=diverged,
            region=region,
        )
        return trace, witnesses

    # ---- equivalences -------------------------------------------------------

    def _test_directions(self, p: ProblemInstance, x, directions: int, rng: np.random.Generator) -> np.ndarray:
        """Random unit directions, signed axes and the normalised generators of C(x)."""
        stacked = [unit_directions(rng, p.dim, directions), axis_directions(p.dim)]
        try:
            vertices, rays = vertices_and_rays(self.level_polyhedron(p, x))
            generators = [v for v in vertices + rays if np.linalg.norm(v) > 0.0]
            if generators:
                stacked.append(np.array([v / np.linalg.norm(v) for v in generators]))
        except GeometryError:
            pass
        return np.vstack(stacked)

    def excess_vs_pointwise_equivalence(
        self,
        p: ProblemInstance,
        x,
        tau: float,
        directions: Optional[int] = None,
        seed: int = 0,
    ) -> bool:
        """
        Checks d(h, D(x)) <= tau * max{phi'(x; h), 0} + tol on unit directions h;
        agrees with e(C(x), D(x)) <= tau.
        """
        if math.isinf(tau):
            return True
        point = as_vector(x.point if isinstance(x, BoundarySample) else x, "x", dim=p.dim)
        directions = settings.DIRECTIONS if directions is None else directions
        cone = self.chain_rule_cone(p, point)
        tol = p.tolerances.equivalence_tol
        for h in self._test_directions(p, point, directions, make_rng(seed)):
            slope = composite_dirderiv(p.f, p.g, point, h, p.tolerances.active_tol)
            if tangent_cone_distance(h, cone) > tau * max(slope, 0.0) + tol:
                return False
        return True

    def dirderiv_global_error_bound(
        self,
        p: ProblemInstance,
        x,
        directions: Optional[int] = None,
        seed: int = 0,
    ) -> float:
        """
        Least tau over the test directions with d(h, S') <= tau * max{phi'(x; h), 0},
        S' = {h : phi'(x; h) <= 0} the sublevel cone of the linearised inequality.
        """
        point = as_vector(x.point if isinstance(x, BoundarySample) else x, "x", dim=p.dim)
        directions = settings.DIRECTIONS if directions is None else directions
        cone = self.level_polyhedron(p, point, 0.0)
        best = 0.0
        for h in self._test_directions(p, point, directions, make_rng(seed)):
            slope = composite_dirderiv(p.f, p.g, point, h, p.tolerances.active_tol)
            gap = tangent_cone_distance(h, cone)
            if slope > 0.0:
                best = max(best, gap / slope)
            elif gap > p.tolerances.equivalence_tol:
                return math.inf
        return best

    def kernel_inclusion(self, p: ProblemInstance, x) -> bool:
        """{h : phi'(x; h) <= 0} inside the chain-rule tangent cone D(x)."""
        point = as_vector(x.point if isinstance(x, BoundarySample) else x, "x", dim=p.dim)
        kernel = self.level_polyhedron(p, point, 0.0)
        return excess(kernel, self.chain_rule_cone(p, point)).value <= p.tolerances.equivalence_tol

    # ---- full analysis ------------------------------------------------------

    @staticmethod
    def _capture(errors: List[str], label: str, fn: Callable, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except Exception as exc:
            logger.error(f"{label} failed: {exc}", exc_info=True)
            errors.append(f"{label}: {exc}")
            return None

    def analyze(self, p: ProblemInstance) -> AnalysisReport:
        """
        Hypothesis checks, both moduli and the diagnosis. Never raises: every
        sub-operation failure is recorded in the report's errors.
        """
        errors: List[str] = []
        notes: List[str] = []
        capture = self._capture

        with LogContext(instance=p.name, seed=p.seed, operation="analyze"):
            logger.info(f"Analyzing {p.name} (n={p.dim}, radii={list(p.radii)})")

            boundary = capture(errors, "boundary condition", self.check_boundary_condition, p.f, make_rng(p.seed))
            regularity = capture(
                errors, "metric regularity", empirical_metric_regularity,
                p.g, p.x_bar, p.radii[0], settings.REGULARITY_PAIRS, p.seed,
            )
            robinson = capture(
                errors, "Robinson qualification", lambda: robinson_check(
                    p.g, p.x_bar,
                    tangent_cone(p.solution_polyhedron, p.g(p.x_bar), p.tolerances.active_tol),
                ),
            )
            shapiro = capture(
                errors, "epigraphical contact test", shapiro_epigraph_test,
                p.phi, p.x_bar, settings.SHAPIRO_EPSILONS, p.seed,
            )

            hypotheses_hold = not (
                (regularity is not None and not regularity.surjective)
                or (boundary is not None and boundary.verdict == "fail")
                or (shapiro is not None and shapiro.verdict == "fail")
            )
            samples_by_radius = capture(errors, "boundary sampling", self._boundary_by_radius, p)
            theoretical = None
            if samples_by_radius is not None:
                theoretical = capture(
                    errors, "theoretical modulus", self.theoretical_modulus, p, samples_by_radius, hypotheses_hold,
                )
            empirical_result = capture(errors, "empirical modulus", self.empirical_modulus, p)
            empirical, witnesses = empirical_result if empirical_result else (None, [])

            kernel = None
            if samples_by_radius:
                last = samples_by_radius[-1]
                checks = [capture(errors, "kernel inclusion", self.kernel_inclusion, p, s.point) for s in last]
                checks = [c for c in checks if c is not None]
                kernel = all(checks) if checks else None

        theoretical = theoretical or ModulusTrace(
            value=0.0, sups=[0.0] * len(p.radii), counts=[0] * len(p.radii), applicable=hypotheses_hold,
        )
        empirical = empirical or ModulusTrace(value=0.0, sups=[0.0] * len(p.radii), counts=[0] * len(p.radii))

        if regularity is not None and not regularity.surjective:
            notes.append(NON_SURJECTIVE_NOTE)
        if shapiro is not None and shapiro.note:
            notes.append(shapiro.note)
        if not theoretical.applicable:
            notes.append(NOT_APPLICABLE_NOTE)
        if theoretical.interior or empirical.interior:
            notes.append("x_bar is interior to the solution set at the sampled radii")

        tau_t, tau_e = theoretical.value, empirical.value
        if math.isinf(tau_t) and math.isinf(tau_e):
            agreement = 0.0
        elif math.isinf(tau_t) or math.isinf(tau_e):
            agreement = math.inf
        else:
            agreement = abs(tau_t - tau_e) / (1.0 + tau_t)

        diagnosis = self._diagnose(boundary, regularity, shapiro, theoretical, empirical, agreement, errors)
        traces = [
            RadiusTrace(radius=r, tau_theoretical_sup=t, tau_empirical_sup=e, sample_count=c)
            for r, t, e, c in zip(p.radii, theoretical.sups, empirical.sups, empirical.counts)
        ]

        report = AnalysisReport(
            instance=p.name,
            seed=p.seed,
            version=__version__,
            radii=list(p.radii),
            samples_per_radius=p.samples_per_radius,
            hypotheses=Hypotheses(
                boundary_condition=boundary,
                interior_domain=True,
                metric_regularity=regularity,
                robinson=robinson,
                shapiro=shapiro,
            ),
            tau_theoretical=tau_t,
            tau_empirical=tau_e,
            theoretical=theoretical,
            empirical=empirical,
            traces=traces,
            agreement=agreement,
            sufficiency_bound=sufficiency_bound(tau_t, settings.CONTACT_EPSILON),
            kernel_inclusion=kernel,
            diagnosis=diagnosis,
            notes=notes,
            errors=errors,
            witnesses=witnesses,
        )
        logger.info(f"Diagnosis for {p.name}: {diagnosis}")
        return report

    @staticmethod
    def _diagnose(boundary, regularity, shapiro, theoretical, empirical, agreement, errors) -> str:
        if regularity is not None and not regularity.surjective:
            return "hypotheses-violated"
        if boundary is not None and boundary.verdict == "fail":
            return "hypotheses-violated"
        if shapiro is not None and shapiro.verdict == "fail":
            return "hypotheses-violated"
        if empirical.diverged:
            return "no-error-bound"
        if errors:
            return "inconclusive"
        if (math.isfinite(theoretical.value) and math.isfinite(empirical.value)
                and agreement <= settings.AGREEMENT_GAP):
            return "error-bound-holds"
        return "inconclusive"


# Global analyzer service instance
_analyzer_service: Optional[AnalyzerService] = None


def get_analyzer_service() -> AnalyzerService:
    """Get or create the global analyzer service instance."""
    global _analyzer_service
    if _analyzer_service is None:
        _analyzer_service = AnalyzerService()
    return _analyzer_service
