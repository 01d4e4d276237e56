"""
errbound/services/geometry_service.py

Purpose: Polyhedral geometry at desk scale

- H-represented polyhedra and polyhedral cones (canonicalized, immutable)
- Euclidean distances and projections (active-set enumeration, Dykstra, NNLS for cones)
- Bouligand tangent cones of polyhedra (active rows)
- Vertex/ray enumeration by basis enumeration on the pointed part
- Excess of a polyhedron beyond a cone and its sampling certificate
- Set oracles and boundary anchors (nearest points with a tangent-cone check)

All norms are Euclidean. Every value is immutable and every operation is a
pure function, so concurrent calls need no locking.
"""

import itertools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional

import numpy as np
from scipy.optimize import linprog, nnls

from errbound.core.config import settings
from errbound.core.exceptions import ContractViolationError, ErrboundError
from errbound.core.logging import get_logger
from errbound.utils.optimize_utils import bisect_boundary, nearest_point
from errbound.utils.sampling_utils import sample_ball, unit_directions
from errbound.utils.validation_utils import as_matrix, as_vector, check_dim

logger = get_logger(__name__)

# Rows closer than this (after normalisation) are merged
_DEDUPE_DECIMALS = 12
# Bases with a worse condition number are treated as singular
_MAX_CONDITION = 1e12


class GeometryError(ErrboundError):
    """Base exception for geometry failures."""
    pass


class InfeasiblePointError(GeometryError):
    """A point expected in a polyhedron violates it beyond tolerance."""

    def __init__(self, residual: float):
        super().__init__(f"point violates the polyhedron by {residual:.3g}")
        self.residual = residual


class UnsupportedSizeError(GeometryError):
    """Exact enumeration requested beyond the configured limits."""
    pass


class EmptyPolyhedronError(GeometryError):
    """The polyhedron has no points."""
    pass


class ProjectionError(GeometryError):
    """A numerical projection did not converge; carries the best iterate."""

    def __init__(self, message: str, best_iterate: Optional[np.ndarray] = None):
        super().__init__(message)
        self.best_iterate = best_iterate


# ============================================================================
# TYPES
# ============================================================================

class Polyhedron:
    """
    {x : normal_i . x <= offset_i for every row i} in R^dim.

    Rows are normalised to unit normals, vacuous rows (zero normal, offset >= 0)
    are dropped and duplicates removed. A zero normal with a negative offset is
    rejected.
    """

    __slots__ = ("_normals", "_offsets", "_dim")

    def __init__(self, normals, offsets, dim: Optional[int] = None):
        normals = np.asarray(normals, dtype=float)
        if normals.size == 0:
            if dim is None:
                raise ContractViolationError("dim is required for a polyhedron without rows")
            normals = np.zeros((0, dim))
        normals = as_matrix(normals, "normals") if normals.shape[0] else normals
        offsets = np.atleast_1d(np.asarray(offsets, dtype=float)) if normals.shape[0] else np.zeros(0)
        dim = normals.shape[1] if dim is None else dim
        if dim < 1:
            raise ContractViolationError("polyhedron dimension must be positive")
        check_dim("polyhedron normals", dim, normals.shape[1])
        check_dim("polyhedron offsets", normals.shape[0], offsets.size)
        if not np.all(np.isfinite(offsets)):
            raise ContractViolationError("offsets have non-finite entries")

        norms = np.linalg.norm(normals, axis=1)
        zero = norms == 0.0
        if np.any(offsets[zero] < 0.0):
            raise ContractViolationError("a zero normal requires a non-negative offset")
        normals = normals[~zero] / norms[~zero, None]
        offsets = offsets[~zero] / norms[~zero]

        if normals.shape[0] > 1:
            stacked = np.round(np.hstack([normals, offsets[:, None]]), _DEDUPE_DECIMALS)
            _, first = np.unique(stacked, axis=0, return_index=True)
            keep = np.sort(first)
            normals, offsets = normals[keep], offsets[keep]

        normals.setflags(write=False)
        offsets.setflags(write=False)
        self._normals = normals
        self._offsets = offsets
        self._dim = int(dim)

    @classmethod
    def whole_space(cls, dim: int) -> "Polyhedron":
        return cls(np.zeros((0, dim)), np.zeros(0), dim=dim)

    @classmethod
    def empty(cls, dim: int) -> "Polyhedron":
        first = np.zeros(dim)
        first[0] = 1.0
        return cls(np.vstack([first, -first]), np.array([-1.0, -1.0]))

    @classmethod
    def box(cls, lower, upper) -> "Polyhedron":
        lower = as_vector(lower, "lower")
        upper = as_vector(upper, "upper", dim=lower.size)
        eye = np.eye(lower.size)
        return cls(np.vstack([eye, -eye]), np.concatenate([upper, -lower]))

    @property
    def normals(self) -> np.ndarray:
        return self._normals

    @property
    def offsets(self) -> np.ndarray:
        return self._offsets

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def rows(self) -> List[tuple]:
        return [(a.copy(), float(b)) for a, b in zip(self._normals, self._offsets)]

    @property
    def row_count(self) -> int:
        return self._normals.shape[0]

    @property
    def is_cone(self) -> bool:
        return bool(np.all(self._offsets == 0.0))

    def residual(self, x) -> float:
        """Largest row violation max_i (a_i.x - b_i)_+ (0 inside)."""
        x = as_vector(x, "x", dim=self._dim)
        if not self.row_count:
            return 0.0
        return float(max(np.max(self._normals @ x - self._offsets), 0.0))

    def contains(self, x, tol: float = 0.0) -> bool:
        x = as_vector(x, "x", dim=self._dim)
        if not self.row_count:
            return True
        return bool(np.all(self._normals @ x - self._offsets <= tol * (1.0 + np.abs(self._offsets))))

    def active_rows(self, z, tol: float) -> np.ndarray:
        """Boolean mask of rows with |a_i.z - b_i| <= tol * (1 + |b_i|)."""
        z = as_vector(z, "z", dim=self._dim)
        gaps = np.abs(self._normals @ z - self._offsets)
        return gaps <= tol * (1.0 + np.abs(self._offsets))

    def intersect(self, other: "Polyhedron") -> "Polyhedron":
        check_dim("intersected polyhedron", self._dim, other.dim)
        return Polyhedron(
            np.vstack([self._normals, other.normals]),
            np.concatenate([self._offsets, other.offsets]),
            dim=self._dim,
        )

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self._dim}, rows={self.row_count})"


class PolyCone(Polyhedron):
    """Polyhedral cone {h : normal_i . h <= 0}."""

    __slots__ = ()

    def __init__(self, normals, dim: Optional[int] = None):
        normals = np.asarray(normals, dtype=float)
        if normals.size == 0:
            if dim is None:
                raise ContractViolationError("dim is required for a cone without rows")
            normals = np.zeros((0, dim))
        normals = np.atleast_2d(normals)
        super().__init__(normals, np.zeros(normals.shape[0]), dim=dim)

    @classmethod
    def whole_space(cls, dim: int) -> "PolyCone":
        return cls(np.zeros((0, dim)), dim=dim)

    @classmethod
    def from_polyhedron(cls, polyhedron: Polyhedron) -> "PolyCone":
        if not polyhedron.is_cone:
            raise ContractViolationError("polyhedron has non-zero offsets")
        return cls(polyhedron.normals, dim=polyhedron.dim)


class Projection(NamedTuple):
    distance: float
    point: Optional[np.ndarray]


class Decomposition(NamedTuple):
    vertices: List[np.ndarray]
    rays: List[np.ndarray]


@dataclass(frozen=True)
class ExcessResult:
    """Excess value with the vertex (or recession ray) realising it."""
    value: float
    witness: Optional[np.ndarray] = None
    escaping_ray: Optional[np.ndarray] = None
    approximate: bool = False

    def __float__(self) -> float:
        return self.value

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)


@dataclass(frozen=True)
class AnchorResult:
    """Nearest point z of a set to x, with the tangent-cone inequality outcome."""
    point: np.ndarray
    distance: float
    tangent_check: Optional[bool]


# ============================================================================
# FEASIBILITY AND DISTANCES
# ============================================================================

def is_empty(polyhedron: Polyhedron) -> bool:
    """
    LP feasibility test of the H-representation.

    Raises:
        GeometryError: If the LP solver fails for numerical reasons
    """
    if not polyhedron.row_count:
        return False
    result = linprog(
        np.zeros(polyhedron.dim),
        A_ub=polyhedron.normals,
        b_ub=polyhedron.offsets,
        bounds=[(None, None)] * polyhedron.dim,
        method="highs",
    )
    if result.status == 2:
        return True
    if result.status in (0, 3):
        return False
    raise GeometryError(f"feasibility LP failed: {result.message}")


def cone_projection(x, cone: Polyhedron) -> Projection:
    """
    Projection onto {h : A h <= 0} by non-negative least squares on the polar cone.

    x = P_K(x) + P_polar(x) with P_polar(x) = A^T lambda, lambda = argmin ||A^T lambda - x||.
    """
    x = as_vector(x, "x", dim=cone.dim)
    if not cone.row_count or np.all(cone.normals @ x <= 0.0):
        return Projection(0.0, x.copy())
    weights, _ = nnls(cone.normals.T, x)
    polar_part = cone.normals.T @ weights
    return Projection(float(np.linalg.norm(polar_part)), x - polar_part)


def tangent_cone_distance(v, cone: Polyhedron) -> float:
    """d(v, cone) for a polyhedral cone (offsets zero)."""
    return cone_projection(v, cone).distance


def _project_by_enumeration(x: np.ndarray, polyhedron: Polyhedron) -> Optional[np.ndarray]:
    """KKT point search over linearly independent active sets; None if over budget."""
    normals, offsets = polyhedron.normals, polyhedron.offsets
    rows, dim = normals.shape
    budget = sum(math.comb(rows, size) for size in range(1, min(dim, rows) + 1))
    if budget > settings.ENUMERATION_MAX_BASES:
        return None

    feasibility_tol = 1e-9 * (1.0 + float(np.max(np.abs(offsets))))
    violated_first = np.argsort(-(normals @ x - offsets), kind="stable")
    for size in range(1, min(dim, rows) + 1):
        for subset in itertools.combinations(violated_first, size):
            block = normals[list(subset)]
            gram = block @ block.T
            if np.linalg.cond(gram) > _MAX_CONDITION:
                continue
            multipliers = np.linalg.solve(gram, block @ x - offsets[list(subset)])
            if np.any(multipliers < -1e-12):
                continue
            candidate = x - block.T @ multipliers
            if np.all(normals @ candidate - offsets <= feasibility_tol):
                return candidate
    return None


def _project_by_dykstra(x: np.ndarray, polyhedron: Polyhedron) -> np.ndarray:
    """Dykstra's alternating projections onto the halfspaces of the polyhedron."""
    normals, offsets = polyhedron.normals, polyhedron.offsets
    point = x.copy()
    increments = np.zeros_like(normals)
    for _ in range(settings.PROJECTION_MAX_ITER):
        previous = point.copy()
        for i, (normal, offset) in enumerate(zip(normals, offsets)):
            shifted = point + increments[i]
            violation = normal @ shifted - offset
            point = shifted - max(violation, 0.0) * normal
            increments[i] = shifted - point
        if np.linalg.norm(point - previous) <= settings.PROJECTION_TOL * (1.0 + np.linalg.norm(point)):
            return point
    raise ProjectionError("Dykstra projection did not converge", best_iterate=point)


def distance_to_polyhedron(x, polyhedron: Polyhedron) -> Projection:
    """
    Euclidean distance from x to a polyhedron and the nearest point.

    Args:
        x: Point of R^dim
        polyhedron: Target set

    Returns:
        Projection(distance, point); (inf, None) iff the polyhedron is empty

    Raises:
        ContractViolationError: Dimension mismatch
        ProjectionError: Iterative projection failed to converge
    """
    x = as_vector(x, "x")
    check_dim("distance_to_polyhedron point", polyhedron.dim, x.size)

    if polyhedron.residual(x) <= 0.0:
        return Projection(0.0, x.copy())
    if polyhedron.is_cone:
        return cone_projection(x, polyhedron)
    if is_empty(polyhedron):
        return Projection(math.inf, None)

    point = None
    if polyhedron.dim <= settings.PROJECTION_ENUM_MAX_DIM:
        point = _project_by_enumeration(x, polyhedron)
    if point is None:
        logger.debug(f"Projection by Dykstra (dim={polyhedron.dim}, rows={polyhedron.row_count})")
        point = _project_by_dykstra(x, polyhedron)
    return Projection(float(np.linalg.norm(x - point)), point)


# ============================================================================
# TANGENT CONES AND ENUMERATION
# ============================================================================

def tangent_cone(polyhedron: Polyhedron, z, tol: Optional[float] = None) -> PolyCone:
    """
    Bouligand tangent cone of a polyhedron at z: the cone of the active rows.

    Args:
        polyhedron: Set P
        z: Point of P (up to tol)
        tol: Active-row tolerance, default settings.ACTIVE_TOL

    Returns:
        {h : a_i.h <= 0 for rows active at z}; the whole space when none is active

    Raises:
        InfeasiblePointError: z violates P beyond tol
    """
    tol = settings.ACTIVE_TOL if tol is None else tol
    z = as_vector(z, "z")
    check_dim("tangent_cone point", polyhedron.dim, z.size)
    if not polyhedron.row_count:
        return PolyCone.whole_space(polyhedron.dim)

    gaps = polyhedron.normals @ z - polyhedron.offsets
    scale = 1.0 + np.abs(polyhedron.offsets)
    if np.any(gaps > tol * scale):
        raise InfeasiblePointError(float(np.max(gaps)))
    active = np.abs(gaps) <= tol * scale
    return PolyCone(polyhedron.normals[active], dim=polyhedron.dim)


def _unique_points(points: List[np.ndarray], tol: float = 1e-9) -> List[np.ndarray]:
    unique: List[np.ndarray] = []
    for point in points:
        if not any(np.linalg.norm(point - kept) <= tol * (1.0 + np.linalg.norm(kept)) for kept in unique):
            unique.append(point)
    unique.sort(key=lambda p: tuple(np.round(p, 12)))
    return unique


def vertices_and_rays(polyhedron: Polyhedron) -> Decomposition:
    """
    Minkowski decomposition P = conv(vertices) + cone(rays).

    The lineality space is split off and returned as paired +/- rays; on the
    pointed remainder vertices come from every nonsingular row basis and
    extreme rays from every rank-deficient-by-one row subset.

    Raises:
        UnsupportedSizeError: Dimension, rows or basis count above the limits
        EmptyPolyhedronError: P has no points
    """
    dim, rows = polyhedron.dim, polyhedron.row_count
    if dim > settings.ENUMERATION_MAX_DIM or rows > settings.ENUMERATION_MAX_ROWS:
        raise UnsupportedSizeError(
            f"enumeration limited to dim <= {settings.ENUMERATION_MAX_DIM} and "
            f"rows <= {settings.ENUMERATION_MAX_ROWS} (got dim={dim}, rows={rows})"
        )
    if is_empty(polyhedron):
        raise EmptyPolyhedronError("cannot decompose an empty polyhedron")

    if not rows:
        eye = np.eye(dim)
        return Decomposition([np.zeros(dim)], [row for row in eye] + [-row for row in eye])

    normals, offsets = polyhedron.normals, polyhedron.offsets
    _, singular, vt = np.linalg.svd(normals)
    rank = int(np.sum(singular > 1e-10 * singular[0]))
    row_basis = vt[:rank].T
    lineality = vt[rank:]
    reduced = normals @ row_basis

    if math.comb(rows, rank) + math.comb(rows, rank - 1) > settings.ENUMERATION_MAX_BASES:
        raise UnsupportedSizeError(f"{rows} rows in rank {rank} exceed the basis budget")

    feasibility_tol = 1e-9 * (1.0 + np.abs(offsets))
    vertices = []
    for subset in itertools.combinations(range(rows), rank):
        block = reduced[list(subset)]
        if np.linalg.cond(block) > _MAX_CONDITION:
            continue
        y = np.linalg.solve(block, offsets[list(subset)])
        if np.all(reduced @ y - offsets <= feasibility_tol):
            vertices.append(row_basis @ y)

    rays = []
    for subset in itertools.combinations(range(rows), rank - 1):
        if subset:
            block = reduced[list(subset)]
            _, block_singular, block_vt = np.linalg.svd(block)
            if np.sum(block_singular > 1e-10 * block_singular[0]) != rank - 1:
                continue
            direction = block_vt[-1]
        else:
            direction = np.ones(1)
        for sign in (1.0, -1.0):
            candidate = sign * direction
            if np.all(reduced @ candidate <= 1e-10):
                ray = row_basis @ candidate
                rays.append(ray / np.linalg.norm(ray))

    for direction in lineality:
        rays.extend([direction.copy(), -direction])

    return Decomposition(_unique_points(vertices), _unique_points(rays))


# ============================================================================
# EXCESS
# ============================================================================

def _lp_vertex(polyhedron: Polyhedron, objective: np.ndarray, box: float) -> Optional[np.ndarray]:
    """argmax objective.y over P intersected with the box |y|_inf <= box."""
    result = linprog(
        -objective,
        A_ub=polyhedron.normals if polyhedron.row_count else None,
        b_ub=polyhedron.offsets if polyhedron.row_count else None,
        bounds=[(-box, box)] * polyhedron.dim,
        method="highs-ds",
    )
    return np.asarray(result.x) if result.status == 0 else None


def _edge_neighbours(normals: np.ndarray, offsets: np.ndarray, vertex: np.ndarray) -> List[np.ndarray]:
    """
    Far ends of the edges of {y : normals y <= offsets} leaving a vertex.

    Edges are spanned by n - 1 linearly independent active rows; at a
    degenerate vertex at most EXCESS_EDGE_BUDGET row subsets are tried.
    """
    dim = vertex.size
    slack = offsets - normals @ vertex
    scale = 1.0 + np.abs(offsets)
    active = np.flatnonzero(slack <= 1e-9 * scale)
    if active.size < dim:
        return []

    neighbours = []
    for subset in itertools.islice(itertools.combinations(active, dim - 1), settings.EXCESS_EDGE_BUDGET):
        if dim == 1:
            direction = np.ones(1)
        else:
            _, singular, vt = np.linalg.svd(normals[list(subset)])
            if singular[-1] <= singular[0] / _MAX_CONDITION:
                continue
            direction = vt[-1]
        for edge in (direction, -direction):
            if np.any(normals[active] @ edge > 1e-10):
                continue
            rates = normals @ edge
            blocking = rates > 1e-12
            if not np.any(blocking):
                continue
            step = float(np.min(slack[blocking] / rates[blocking]))
            if step > 1e-12:
                neighbours.append(vertex + step * edge)
    return neighbours


def _escaping_ray(C: Polyhedron, D: PolyCone, point: np.ndarray) -> Optional[np.ndarray]:
    """
    Recession direction of C along which d(., D) grows, taken from an LP over
    the recession cone {r : normals r <= 0, |r|_inf <= 1} in the ascent direction at point.
    """
    projection = cone_projection(point, D)
    if projection.distance <= 0.0:
        return None
    gradient = (point - projection.point) / projection.distance
    result = linprog(
        -gradient,
        A_ub=C.normals if C.row_count else None,
        b_ub=np.zeros(C.row_count) if C.row_count else None,
        bounds=[(-1.0, 1.0)] * C.dim,
        method="highs-ds",
    )
    if result.status != 0:
        return None
    ray = np.asarray(result.x)
    norm = np.linalg.norm(ray)
    if norm == 0.0 or tangent_cone_distance(ray / norm, D) <= settings.INFINITE_EXCESS_THRESHOLD:
        return None
    return ray / norm


def _approximate_excess(C: Polyhedron, D: PolyCone, rng: np.random.Generator) -> ExcessResult:
    """
    Multistart ascent of d(., D) over C inside the box |y|_inf <= EXCESS_FALLBACK_BOX.

    Each start is an LP vertex for a random or signed-axis objective. d(., D)
    is convex, so the ascent first follows linearised LP steps and then walks
    to the best edge neighbour until no neighbour improves (a local maximum
    over the vertex graph). A vertex reaching the box marks recession escape.
    """
    box = settings.EXCESS_FALLBACK_BOX
    normals = np.vstack([C.normals.reshape(-1, C.dim), np.eye(C.dim), -np.eye(C.dim)])
    offsets = np.concatenate([C.offsets, np.full(2 * C.dim, box)])
    objectives = np.vstack([
        unit_directions(rng, C.dim, settings.EXCESS_FALLBACK_STARTS), np.eye(C.dim), -np.eye(C.dim),
    ])

    best_value, best_point = 0.0, None
    for objective in objectives:
        start = _lp_vertex(C, objective, box)
        if start is None:
            continue
        point = start
        value = tangent_cone_distance(point, D)
        for _ in range(50):
            projection = cone_projection(point, D)
            if projection.distance <= 0.0:
                break
            gradient = (point - projection.point) / projection.distance
            candidate = _lp_vertex(C, gradient, box)
            if candidate is None:
                break
            candidate_value = tangent_cone_distance(candidate, D)
            if candidate_value <= value + 1e-12:
                break
            point, value = candidate, candidate_value

        for _ in range(settings.EXCESS_ASCENT_STEPS):
            scored = [(tangent_cone_distance(nb, D), nb) for nb in _edge_neighbours(normals, offsets, point)]
            if not scored:
                break
            candidate_value, candidate = max(scored, key=lambda item: item[0])
            if candidate_value <= value + 1e-12:
                break
            point, value = candidate, candidate_value

        if np.max(np.abs(point)) >= box * (1.0 - 1e-9):
            ray = _escaping_ray(C, D, point)
            if ray is not None:
                return ExcessResult(math.inf, escaping_ray=ray, approximate=True)
        if value > best_value or best_point is None:
            best_value, best_point = value, point
    return ExcessResult(best_value, witness=best_point, approximate=True)


def excess(C: Polyhedron, D: PolyCone, rng: Optional[np.random.Generator] = None) -> ExcessResult:
    """
    e(C, D) = sup over x in C of d(x, D).

    A recession ray of C at distance above INFINITE_EXCESS_THRESHOLD from D
    makes the excess infinite (d(., D) is positively homogeneous); otherwise
    the sup of the convex function d(., D) is attained at a vertex of C.
    e(empty, D) = 0.

    Args:
        C: Polyhedron
        D: Polyhedral cone of the same dimension
        rng: Generator for the approximate fall-back (beyond enumeration limits)

    Returns:
        ExcessResult; approximate=True when the fall-back was used
    """
    check_dim("excess sets", C.dim, D.dim)
    if not D.is_cone:
        raise ContractViolationError("D must be a cone (offsets zero)")

    try:
        decomposition = vertices_and_rays(C)
    except EmptyPolyhedronError:
        return ExcessResult(0.0)
    except UnsupportedSizeError as exc:
        logger.warning(f"Excess falls back to approximate maximisation: {exc}")
        return _approximate_excess(C, D, rng or np.random.default_rng(0))

    for ray in decomposition.rays:
        if tangent_cone_distance(ray, D) > settings.INFINITE_EXCESS_THRESHOLD:
            return ExcessResult(math.inf, escaping_ray=ray)

    best_value, best_vertex = 0.0, None
    for vertex in decomposition.vertices:
        value = tangent_cone_distance(vertex, D)
        if best_vertex is None or value > best_value:
            best_value, best_vertex = value, vertex
    return ExcessResult(best_value, witness=best_vertex)


def excess_certificate(
    C: Polyhedron,
    D: PolyCone,
    tau: float,
    samples: int = 256,
    rng: Optional[np.random.Generator] = None,
    tol: float = 1e-9,
) -> bool:
    """
    Sampling check of C within D + tau*B.

    Points: the vertices, random convex combinations plus random conic
    combinations of rays, and along each ray escaping D a point far enough to
    exceed tau. True iff every point has d(point, D) <= tau + tol.
    """
    check_dim("excess_certificate sets", C.dim, D.dim)
    if tau < 0:
        raise ContractViolationError("tau must be non-negative")
    if math.isinf(tau):
        return True
    rng = rng or np.random.default_rng(0)

    try:
        vertices, rays = vertices_and_rays(C)
    except EmptyPolyhedronError:
        return True
    except UnsupportedSizeError:
        vertices = [v for v in (_lp_vertex(C, c, settings.EXCESS_FALLBACK_BOX)
                                for c in unit_directions(rng, C.dim, samples)) if v is not None]
        rays = []

    points = list(vertices)
    if vertices:
        stacked = np.array(vertices)
        weights = rng.dirichlet(np.ones(len(vertices)), size=samples)
        mixed = weights @ stacked
        if rays:
            ray_stack = np.array(rays)
            mixed = mixed + rng.exponential(1.0, size=(samples, len(rays))) @ ray_stack
        points.extend(mixed)
        for ray in rays:
            ray_distance = tangent_cone_distance(ray, D)
            if ray_distance > tol:
                points.append(vertices[0] + 2.0 * (tau + 1.0) / ray_distance * ray)

    return all(tangent_cone_distance(point, D) <= tau + tol for point in points)


# ============================================================================
# SET ORACLES AND BOUNDARY ANCHORS
# ============================================================================

class SetOracle(ABC):
    """
    Closed set accessed through membership residual, projection and,
    optionally, tangent-cone distances.
    """

    dim: int

    @abstractmethod
    def residual(self, x: np.ndarray) -> float:
        """0 on the set, positive violation outside."""

    @abstractmethod
    def project(self, x: np.ndarray) -> np.ndarray:
        """A (possibly local) nearest point of the set to x."""

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return self.residual(x) <= tol

    def distance(self, x: np.ndarray) -> float:
        if self.contains(x):
            return 0.0
        return float(np.linalg.norm(x - self.project(x)))

    def tangent_distance(self, u: np.ndarray, v: np.ndarray) -> float:
        """d(v, T^B(set, u)); sets without tangent information raise NotImplementedError."""
        raise NotImplementedError(f"{type(self).__name__} has no tangent-cone oracle")

    def sample(self, center: np.ndarray, radius: float, count: int, rng: np.random.Generator) -> np.ndarray:
        """
        Points of the set near center: ball samples that are members, plus
        projections of non-members that land back in the ball (boundary points).
        """
        points = []
        for candidate in sample_ball(rng, center, radius, count):
            if not self.contains(candidate):
                try:
                    candidate = self.project(candidate)
                except ProjectionError:
                    continue
                if np.linalg.norm(candidate - center) > radius:
                    continue
            points.append(candidate)
        return np.array(points).reshape(-1, center.size)


class PolyhedronSet(SetOracle):
    """Set oracle backed by an exact polyhedron."""

    def __init__(self, polyhedron: Polyhedron, tol: Optional[float] = None):
        self.polyhedron = polyhedron
        self.dim = polyhedron.dim
        self.tol = settings.ACTIVE_TOL if tol is None else tol

    def residual(self, x):
        return self.polyhedron.residual(x)

    def project(self, x):
        projection = distance_to_polyhedron(x, self.polyhedron)
        if projection.point is None:
            raise ProjectionError("cannot project onto an empty polyhedron")
        return projection.point

    def tangent_distance(self, u, v):
        return tangent_cone_distance(v, tangent_cone(self.polyhedron, u, self.tol))


class SublevelSet(SetOracle):
    """
    {x : psi(x) <= 0} for a C^1 function psi with gradient oracle.

    Projections are multistart SLSQP solves; `anchor` (a known member) lets
    slightly infeasible solver output be pulled back by bisection. The tangent
    cone at a boundary point with non-zero gradient is {v : grad.v <= 0}.
    """

    def __init__(
        self,
        psi: Callable[[np.ndarray], float],
        gradient: Callable[[np.ndarray], np.ndarray],
        dim: int,
        anchor=None,
        starts: int = 4,
        seed: int = 0,
        tol: float = 1e-10,
    ):
        self.psi = psi
        self.gradient = gradient
        self.dim = dim
        self.anchor = None if anchor is None else as_vector(anchor, "anchor", dim=dim)
        self.starts = starts
        self.seed = seed
        self.tol = tol

    def residual(self, x):
        return max(float(self.psi(np.asarray(x, dtype=float))), 0.0)

    def project(self, x):
        x = as_vector(x, "x", dim=self.dim)
        if self.psi(x) <= 0.0:
            return x.copy()

        rng = np.random.default_rng(self.seed)
        grad = np.asarray(self.gradient(x), dtype=float)
        starts = [x.copy()]
        if np.linalg.norm(grad) > 0:
            starts.append(x - self.psi(x) / float(grad @ grad) * grad)
        spread = 0.1 * (1.0 + np.linalg.norm(x))
        starts.extend(x + spread * rng.standard_normal((self.starts, self.dim)))

        best, best_distance = None, math.inf
        for start in starts:
            candidate = nearest_point(
                x, start,
                lambda z: np.atleast_1d(-self.psi(z)),
                lambda z: -np.atleast_2d(self.gradient(z)),
            )
            if candidate is None:
                continue
            if self.psi(candidate) > 0.0 and self.anchor is not None:
                candidate = bisect_boundary(self.psi, self.anchor, candidate)
            if self.psi(candidate) > self.tol:
                continue
            distance = float(np.linalg.norm(candidate - x))
            if distance < best_distance:
                best, best_distance = candidate, distance
        if best is None:
            raise ProjectionError("no feasible projection found", best_iterate=x)
        return best

    def tangent_distance(self, u, v):
        u = as_vector(u, "u", dim=self.dim)
        if self.psi(u) < -self.tol:
            return 0.0
        grad = np.asarray(self.gradient(u), dtype=float)
        norm = np.linalg.norm(grad)
        if norm == 0.0:
            raise GeometryError("vanishing gradient: tangent cone not determined by first-order data")
        return max(float(grad @ np.asarray(v, dtype=float)), 0.0) / float(norm)


def boundary_anchor(x, omega: SetOracle, gamma: float, tol: float = 1e-9) -> AnchorResult:
    """
    Nearest point z of Omega to an outside point x, checked against
    gamma*|x - z| <= min{d(x, Omega), d(x - z, T^B(Omega, z))}.

    Args:
        x: Point outside Omega
        omega: Set oracle
        gamma: Factor in (0, 1)
        tol: Membership tolerance

    Returns:
        AnchorResult; tangent_check is None when omega has no tangent oracle

    Raises:
        ContractViolationError: x in Omega or gamma outside (0, 1)
        ProjectionError: The projection failed (carries the best iterate)
    """
    x = as_vector(x, "x", dim=omega.dim)
    if not 0.0 < gamma < 1.0:
        raise ContractViolationError("gamma must lie in (0, 1)")
    if omega.contains(x, tol):
        raise ContractViolationError("boundary_anchor needs a point outside the set")

    z = omega.project(x)
    if not omega.contains(z, tol):
        raise ProjectionError("projection left the set", best_iterate=z)

    # z is a nearest point, so gamma*|x - z| <= d(x, Omega) holds; only the tangent part is tested
    distance = float(np.linalg.norm(x - z))

    try:
        tangent_gap = omega.tangent_distance(z, x - z)
        tangent_check = bool(gamma * distance <= tangent_gap + tol)
    except NotImplementedError:
        tangent_check = None

    if tangent_check is False:
        logger.info(f"Anchor tangent-cone inequality failed at distance {distance:.3g}")
    return AnchorResult(z, distance, tangent_check)
