"""
errbound/services/regularity_service.py

Purpose: Testers for the hypotheses behind the modulus formula

- Linear regularity of a Jacobian (smallest singular value)
- Radius on which the linearised modulus stays below a target
- Sampled metric regularity of g (multistart preimage solves)
- Tangent-cone chain rule for preimages under g
- Shapiro contact tests for sets and for epigraphs
- Robinson qualification by linear feasibility of interior test points

The sampled tests are falsifiers: a "pass" is tentative, a "fail" is backed
by explicit pairs.
"""

import math
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from errbound.core.config import settings
from errbound.core.exceptions import ContractViolationError, ErrboundError
from errbound.core.logging import get_logger
from errbound.schemas.report import RegularityReport, ShapiroReport, WorstPair
from errbound.services.function_service import (
    EstimatorUndefinedError,
    SamplingSchedule,
    SmoothMap,
    hadamard_lower_dirderiv,
)
from errbound.services.geometry_service import PolyCone, SetOracle
from errbound.utils.constants import EPIGRAPH_IMPLICATION_NOTE
from errbound.utils.optimize_utils import levenberg_marquardt, nearest_point
from errbound.utils.sampling_utils import (
    axis_directions,
    grid_points,
    make_rng,
    points_per_axis,
    sample_ball,
    unit_directions,
)
from errbound.utils.validation_utils import as_matrix, as_vector, check_dim

logger = get_logger(__name__)

# Pairs closer than this are not used in ratio estimates
_MIN_SEPARATION = 1e-14


class RegularityError(ErrboundError):
    """Base exception for regularity testers."""
    pass


class LinearRegularity(NamedTuple):
    surjective: bool
    sigma_min: float
    kappa: float


# ============================================================================
# METRIC REGULARITY
# ============================================================================

def linear_regularity(J) -> LinearRegularity:
    """
    Surjectivity and modulus of a linear map y = J h.

    sigma_min is the m-th singular value (0 when m > n); kappa = 1/sigma_min is
    the least constant with d(u, J^-1(v)) <= kappa |J u - v|.
    """
    J = as_matrix(J, "J")
    m, n = J.shape
    singular = np.linalg.svd(J, compute_uv=False)
    sigma_min = float(singular[m - 1]) if m <= n else 0.0
    norm = float(singular[0]) if singular.size else 0.0
    surjective = sigma_min > 0.0 and sigma_min > settings.RANK_TOL * norm
    kappa = 1.0 / sigma_min if surjective else math.inf
    return LinearRegularity(surjective, sigma_min, kappa)


def uniform_regularity_radius(g: SmoothMap, x_bar, mu_target: float, probes: int = 16) -> float:
    """
    Largest radius delta (at most MAX_SEARCH_RADIUS) such that 1/sigma_min(J(x)) <= mu_target
    at every probe point of B(x_bar, delta).

    Probes are the signed axis directions and `probes` seeded unit directions,
    each at 1/4, 1/2, 3/4 and all of delta.

    Raises:
        RegularityError: J(x_bar) not surjective
        ContractViolationError: mu_target not above 1/sigma_min(J(x_bar))
    """
    x_bar = as_vector(x_bar, "x_bar", dim=g.n)
    base = linear_regularity(g.jacobian(x_bar))
    if not base.surjective:
        raise RegularityError("Jacobian at x_bar is not surjective")
    if mu_target <= base.kappa:
        raise ContractViolationError(
            f"mu_target {mu_target:.6g} must exceed 1/sigma_min = {base.kappa:.6g}"
        )

    directions = np.vstack([axis_directions(g.n), unit_directions(np.random.default_rng(0), g.n, probes)])
    fractions = np.array([0.25, 0.5, 0.75, 1.0])

    def accepts(delta: float) -> bool:
        for scale in fractions * delta:
            for direction in directions:
                if linear_regularity(g.jacobian(x_bar + scale * direction)).kappa > mu_target:
                    return False
        return True

    high = settings.MAX_SEARCH_RADIUS
    if accepts(high):
        return high
    low = 0.0
    for _ in range(50):
        middle = 0.5 * (low + high)
        if accepts(middle):
            low = middle
        else:
            high = middle
    return low


def preimage_distance(g: SmoothMap, x: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> Optional[float]:
    """
    d(x, g^-1(y)) by multistart Levenberg-Marquardt from near x, each solution
    refined towards x on the level set; a grid search seeds a last attempt for
    n <= 3. None when no start reaches the residual tolerance.
    """
    tol = settings.LM_RESIDUAL_TOL

    def residual_and_jacobian(z):
        return g(z) - y, g.jacobian(z)

    def solve_from(start) -> Optional[float]:
        result = levenberg_marquardt(
            residual_and_jacobian, start,
            lambda0=settings.LM_LAMBDA0, max_iter=settings.LM_MAX_ITER, tol=tol,
        )
        if not result.converged:
            return None
        best = float(np.linalg.norm(result.x - x))
        if g.n > g.m:
            refined = nearest_point(
                x, result.x,
                lambda z: g(z) - y,
                lambda z: g.jacobian(z),
                equality=True,
            )
            if refined is not None and np.linalg.norm(g(refined) - y) <= 10.0 * tol:
                best = min(best, float(np.linalg.norm(refined - x)))
        return best

    spread = 0.1 * (1.0 + float(np.linalg.norm(y - g(x))))
    starts = [x] + [x + spread * rng.standard_normal(g.n) for _ in range(settings.LM_STARTS - 1)]
    distances = [d for d in (solve_from(s) for s in starts) if d is not None]

    if not distances and g.n <= 3:
        per_axis = points_per_axis(g.n, settings.GRID_BUDGET, settings.GRID_POINTS_PER_AXIS)
        grid = grid_points(x, settings.PREIMAGE_SEARCH_HALFWIDTH, per_axis)
        gaps = np.linalg.norm(g(grid) - y, axis=1)
        seed_point = grid[int(np.argmin(gaps))]
        fallback = solve_from(seed_point)
        if fallback is not None:
            distances.append(fallback)

    return min(distances) if distances else None


def empirical_metric_regularity(
    g: SmoothMap,
    x_bar,
    radius: float,
    pairs: Optional[int] = None,
    seed: int = 0,
) -> RegularityReport:
    """
    Samples (x, y) in B(x_bar, radius) x B(g(x_bar), radius) and reports the
    largest ratio d(x, g^-1(y)) / |g(x) - y| next to the linear modulus.

    Pairs whose preimage solve fails are flagged and counted, never used.
    """
    if radius <= 0:
        raise ContractViolationError("radius must be positive")
    pairs = settings.REGULARITY_PAIRS if pairs is None else pairs
    x_bar = as_vector(x_bar, "x_bar", dim=g.n)
    rng = make_rng(seed)
    linear = linear_regularity(g.jacobian(x_bar))

    xs = sample_ball(rng, x_bar, radius, pairs)
    ys = sample_ball(rng, g(x_bar), radius, pairs)

    kappa, worst, counted, failed = 0.0, None, 0, 0
    for x, y in zip(xs, ys):
        gap = float(np.linalg.norm(g(x) - y))
        if gap <= settings.DIVISION_GUARD:
            continue
        distance = preimage_distance(g, x, y, rng)
        if distance is None:
            failed += 1
            logger.warning(f"Preimage solve failed for y={np.round(y, 6).tolist()}")
            continue
        counted += 1
        ratio = distance / gap
        if ratio > kappa or worst is None:
            kappa = max(kappa, ratio)
            worst = WorstPair(x=x.tolist(), y=y.tolist(), ratio=ratio)

    logger.info(
        f"Metric regularity: sigma_min={linear.sigma_min:.6g}, kappa_empirical={kappa:.6g} "
        f"({counted} pairs, {failed} failed)"
    )
    return RegularityReport(
        surjective=linear.surjective,
        sigma_min=linear.sigma_min,
        kappa_linear=linear.kappa,
        kappa_empirical=kappa,
        sample_count=counted,
        failed_pairs=failed,
        worst_pair=worst,
    )


def tangent_chain_rule(g: SmoothMap, x, T: PolyCone) -> PolyCone:
    """
    Preimage cone {h : n_i^T J(x) h <= 0} of T = {v : n_i . v <= 0}.

    Equals the tangent cone of g^-1(A) at x when g is metrically regular there
    and T is the tangent cone of A at g(x); callers check regularity.
    """
    check_dim("chain-rule cone", g.m, T.dim)
    x = as_vector(x, "x", dim=g.n)
    if not T.row_count:
        return PolyCone.whole_space(g.n)
    return PolyCone(T.normals @ g.jacobian(x), dim=g.n)


# ============================================================================
# SHAPIRO CONTACT TESTS
# ============================================================================

def _delta_levels(initial: Optional[float], shrink: Optional[float], levels: Optional[int]) -> np.ndarray:
    initial = settings.SHAPIRO_INITIAL_RADIUS if initial is None else initial
    shrink = settings.SHAPIRO_SHRINK if shrink is None else shrink
    levels = settings.SHAPIRO_LEVELS if levels is None else levels
    return initial * shrink ** np.arange(levels, dtype=float)


def _pair_indices(rng: np.random.Generator, count: int, pairs: int) -> List[tuple]:
    if count < 2:
        return []
    first = rng.integers(0, count, size=pairs)
    second = (first + rng.integers(1, count, size=pairs)) % count
    return list(zip(first.tolist(), second.tolist()))


def _shapiro_verdict(
    deltas: np.ndarray,
    level_sups: List[Optional[float]],
    epsilons: Sequence[float],
    skipped: int = 0,
    note: Optional[str] = None,
) -> ShapiroReport:
    """
    Per epsilon, delta_found is the largest delta from which every smaller
    sampled level satisfies the inequality (inf when the smallest level fails).
    pass: every epsilon holds at the smallest level; fail: some epsilon is
    violated at every level; inconclusive otherwise.
    """
    valid = [(d, s) for d, s in zip(deltas, level_sups) if s is not None]
    if not valid:
        return ShapiroReport(
            epsilon_grid=list(epsilons),
            delta_found=[math.inf] * len(epsilons),
            contact_ratio_sup=0.0,
            verdict="inconclusive",
            skipped_pairs=skipped,
            note=note,
        )

    found, held, always_violated = [], [], []
    for epsilon in epsilons:
        delta = math.inf
        for level_delta, level_sup in reversed(valid):
            if level_sup > epsilon:
                break
            delta = float(level_delta)
        found.append(delta)
        held.append(valid[-1][1] <= epsilon)
        always_violated.append(all(s > epsilon for _, s in valid))

    if all(held):
        verdict = "pass"
    elif any(always_violated):
        verdict = "fail"
    else:
        verdict = "inconclusive"

    return ShapiroReport(
        epsilon_grid=list(epsilons),
        delta_found=found,
        contact_ratio_sup=float(valid[-1][1]),
        verdict=verdict,
        skipped_pairs=skipped,
        note=note,
    )


def shapiro_set_test(
    A: SetOracle,
    a,
    epsilons: Optional[Sequence[float]] = None,
    seed: int = 0,
    pairs: Optional[int] = None,
    initial_radius: Optional[float] = None,
    shrink: Optional[float] = None,
    levels: Optional[int] = None,
) -> ShapiroReport:
    """
    Sampled test of d(x - u, T^B(A, u)) <= epsilon |x - u| for x, u in A near a.

    Raises:
        ContractViolationError: a not in A
        RegularityError: A has no tangent-cone oracle
    """
    a = as_vector(a, "a", dim=A.dim)
    if not A.contains(a, settings.FEASIBILITY_TOL):
        raise ContractViolationError("reference point is not in the set")
    epsilons = list(settings.SHAPIRO_EPSILONS if epsilons is None else epsilons)
    pairs = settings.SHAPIRO_PAIRS if pairs is None else pairs
    rng = make_rng(seed)
    deltas = _delta_levels(initial_radius, shrink, levels)

    level_sups: List[Optional[float]] = []
    for delta in deltas:
        points = np.vstack([a[None, :], A.sample(a, float(delta), 2 * pairs, rng)])
        ratios = []
        for i, j in _pair_indices(rng, len(points), pairs):
            x, u = points[i], points[j]
            separation = float(np.linalg.norm(x - u))
            if separation <= _MIN_SEPARATION:
                continue
            try:
                ratios.append(A.tangent_distance(u, x - u) / separation)
            except NotImplementedError as exc:
                raise RegularityError(f"tangent-cone oracle unavailable: {exc}") from exc
        level_sups.append(max(ratios) if len(ratios) >= max(3, pairs // 4) else None)
        logger.debug(f"Shapiro set level delta={delta:.3g}: sup={level_sups[-1]}")

    return _shapiro_verdict(deltas, level_sups, epsilons)


def shapiro_epigraph_test(
    phi: Callable,
    x_bar,
    epsilons: Optional[Sequence[float]] = None,
    seed: int = 0,
    pairs: Optional[int] = None,
    initial_radius: Optional[float] = None,
    shrink: Optional[float] = None,
    levels: Optional[int] = None,
    schedule: Optional[SamplingSchedule] = None,
) -> ShapiroReport:
    """
    Sampled test of phi'_H(u; x - u) <= phi(x) - phi(u) + epsilon (|x - u| + |phi(x) - phi(u)|)
    for x, u in B_phi(x_bar, delta) = {x in B(x_bar, delta) : |phi(x) - phi(x_bar)| < delta}.

    Only this derivative inequality is checked; the report note states what a
    pass does and does not imply.
    """
    x_bar = as_vector(x_bar, "x_bar")
    base = float(phi(x_bar))
    if not math.isfinite(base):
        raise ContractViolationError("phi must be finite at x_bar")
    epsilons = list(settings.SHAPIRO_EPSILONS if epsilons is None else epsilons)
    pairs = settings.SHAPIRO_PAIRS if pairs is None else pairs
    rng = make_rng(seed)
    deltas = _delta_levels(initial_radius, shrink, levels)

    skipped = 0
    level_sups: List[Optional[float]] = []
    for delta in deltas:
        candidates = sample_ball(rng, x_bar, float(delta), 4 * pairs)
        values = np.array([float(phi(c)) for c in candidates])
        keep = np.isfinite(values) & (np.abs(values - base) < delta)
        points = np.vstack([x_bar[None, :], candidates[keep]])
        values = np.concatenate([[base], values[keep]])

        violations = []
        for i, j in _pair_indices(rng, len(points), pairs):
            x, u = points[i], points[j]
            step = x - u
            separation = float(np.linalg.norm(step))
            if separation <= _MIN_SEPARATION:
                continue
            try:
                derivative = hadamard_lower_dirderiv(phi, u, step, schedule, rng)
            except EstimatorUndefinedError:
                skipped += 1
                continue
            change = values[i] - values[j]
            violations.append(max((derivative - change) / (separation + abs(change)), 0.0))
        level_sups.append(max(violations) if len(violations) >= max(3, pairs // 4) else None)
        logger.debug(f"Shapiro epigraph level delta={delta:.3g}: sup={level_sups[-1]}")

    return _shapiro_verdict(deltas, level_sups, epsilons, skipped, note=EPIGRAPH_IMPLICATION_NOTE)


# ============================================================================
# ROBINSON QUALIFICATION
# ============================================================================

def robinson_check(g: SmoothMap, x_bar, A: PolyCone, radius: Optional[float] = None) -> bool:
    """
    Sampled test of 0 in int(g(x_bar) + range(J) - A).

    Each point p = +/- r e_i must be written as g(x_bar) + J u - a with a in A;
    feasibility is an LP in (u, a). r defaults to ROBINSON_RADIUS_FACTOR * (1 + |g(x_bar)|).
    """
    check_dim("Robinson cone", g.m, A.dim)
    x_bar = as_vector(x_bar, "x_bar", dim=g.n)
    value = g(x_bar)
    J = g.jacobian(x_bar)
    if radius is None:
        radius = settings.ROBINSON_RADIUS_FACTOR * (1.0 + float(np.linalg.norm(value)))

    m, n = g.m, g.n
    equality = np.hstack([J, -np.eye(m)])
    inequality = np.hstack([np.zeros((A.row_count, n)), A.normals]) if A.row_count else None
    upper = np.zeros(A.row_count) if A.row_count else None

    for target in radius * axis_directions(m):
        result = linprog(
            np.zeros(n + m),
            A_ub=inequality,
            b_ub=upper,
            A_eq=equality,
            b_eq=target - value,
            bounds=[(None, None)] * (n + m),
            method="highs",
        )
        if result.status != 0:
            logger.debug(f"Robinson point {target.tolist()} infeasible")
            return False
    return True
