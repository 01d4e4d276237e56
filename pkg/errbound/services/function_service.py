"""
errbound/services/function_service.py

Purpose: The convex outer function f and the smooth inner map g

- Max-affine functions with exact one-sided directional derivatives
- Smooth maps of built-in kinds (affine, polynomial, quadratic, composite)
  and checked callable oracles, with exact Jacobians
- The composite chain rule phi'(x; h) = d+f(g(x); J(x) h)
- A sampled estimator of the lower Hadamard directional derivative
- Sublevel polyhedra {h : d+f(g(x); J h) <= level}
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from errbound.core.config import settings
from errbound.core.exceptions import ContractViolationError, ErrboundError
from errbound.core.logging import get_logger
from errbound.services.geometry_service import PolyCone, Polyhedron
from errbound.utils.constants import MSG_AT_LEAST_ONE_PIECE
from errbound.utils.sampling_utils import unit_directions
from errbound.utils.validation_utils import as_matrix, as_vector, check_dim

logger = get_logger(__name__)

# Fewer finite steps than this leave the liminf estimate undefined
MIN_FINITE_STEPS = 3


class FunctionError(ErrboundError):
    """Base exception for function representations."""
    pass


class JacobianCheckError(FunctionError):
    """Analytic Jacobian disagrees with central differences."""
    pass


class EstimatorUndefinedError(FunctionError):
    """Too few steps of the directional-derivative estimator gave a finite quotient."""
    pass


# ============================================================================
# MAX-AFFINE FUNCTIONS
# ============================================================================

@dataclass(frozen=True)
class ActiveSet:
    indices: Tuple[int, ...]
    point: np.ndarray
    tol: float

    def __contains__(self, index: int) -> bool:
        return index in self.indices

    def __len__(self) -> int:
        return len(self.indices)


class MaxAffineFunction:
    """
    f(y) = max_i (slope_i . y + intercept_i) on R^dim.

    Convex, finite everywhere, Lipschitz with constant max |slope_i|.
    """

    def __init__(self, slopes, intercepts):
        slopes = np.asarray(slopes, dtype=float)
        if slopes.size == 0:
            raise ContractViolationError(MSG_AT_LEAST_ONE_PIECE)
        self._slopes = as_matrix(slopes, "slopes")
        self._intercepts = as_vector(intercepts, "intercepts", dim=self._slopes.shape[0])

    @classmethod
    def affine(cls, slope, intercept: float) -> "MaxAffineFunction":
        return cls([as_vector(slope, "slope")], [intercept])

    @property
    def slopes(self) -> np.ndarray:
        return self._slopes

    @property
    def intercepts(self) -> np.ndarray:
        return self._intercepts

    @property
    def dim(self) -> int:
        return self._slopes.shape[1]

    @property
    def piece_count(self) -> int:
        return self._slopes.shape[0]

    @property
    def pieces(self) -> List[Tuple[np.ndarray, float]]:
        return [(s.copy(), float(c)) for s, c in zip(self._slopes, self._intercepts)]

    @property
    def lipschitz(self) -> float:
        return float(np.max(np.linalg.norm(self._slopes, axis=1)))

    def piece_values(self, y) -> np.ndarray:
        return self._slopes @ np.asarray(y, dtype=float) + self._intercepts

    def __call__(self, y):
        """Value at one point (m,) or at a batch (k, m)."""
        y = np.asarray(y, dtype=float)
        if y.ndim == 2:
            check_dim("f argument", self.dim, y.shape[1])
            return np.max(y @ self._slopes.T + self._intercepts, axis=1)
        check_dim("f argument", self.dim, y.size)
        return float(np.max(self.piece_values(y)))

    def active_set(self, y, tol: Optional[float] = None) -> ActiveSet:
        tol = settings.ACTIVE_TOL if tol is None else tol
        y = as_vector(y, "y", dim=self.dim)
        values = self.piece_values(y)
        indices = tuple(int(i) for i in np.flatnonzero(values.max() - values <= tol))
        return ActiveSet(indices, y, tol)

    def sublevel_set(self, level: float = 0.0) -> Polyhedron:
        """S_f = {y : f(y) <= level} as an H-represented polyhedron."""
        return Polyhedron(self._slopes, level - self._intercepts, dim=self.dim)

    def __repr__(self) -> str:
        return f"MaxAffineFunction(pieces={self.piece_count}, dim={self.dim})"


def eval_f(f: MaxAffineFunction, y) -> float:
    return f(as_vector(y, "y", dim=f.dim))


def dirderiv_f(f: MaxAffineFunction, y, d, tol: Optional[float] = None) -> float:
    """
    d+f(y; d) = max over pieces active at y of slope_i . d.

    Positively homogeneous and sublinear in d.
    """
    d = as_vector(d, "d", dim=f.dim)
    active = f.active_set(y, tol)
    return float(np.max(f.slopes[list(active.indices)] @ d))


# ============================================================================
# SMOOTH MAPS
# ============================================================================

BatchFn = Callable[[np.ndarray], np.ndarray]


class SmoothMap:
    """
    C^1 map g: R^n -> R^m with value and Jacobian oracles.

    Build through the kind constructors; every map is checked against
    central differences at seeded random points on construction.
    """

    KINDS = ("affine", "polynomial", "quadratic", "composite", "oracle")

    def __init__(
        self,
        kind: str,
        n: int,
        m: int,
        evaluate: BatchFn,
        jacobian: Callable[[np.ndarray], np.ndarray],
        parameters: Optional[Dict] = None,
        check: bool = True,
    ):
        if kind not in self.KINDS:
            raise ContractViolationError(f"unknown map kind '{kind}'")
        if n < 1 or m < 1:
            raise ContractViolationError("map dimensions must be positive")
        self.kind = kind
        self.n = n
        self.m = m
        self._evaluate = evaluate
        self._jacobian = jacobian
        self.parameters = parameters or {}
        if check:
            check_jacobian(self)

    # ---- evaluation -------------------------------------------------------

    def __call__(self, x) -> np.ndarray:
        """g(x) for x of shape (n,) or a batch (k, n)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            check_dim("map argument", self.n, x.shape[1])
            return np.asarray(self._evaluate(x), dtype=float).reshape(x.shape[0], self.m)
        check_dim("map argument", self.n, x.size)
        return np.asarray(self._evaluate(x.reshape(1, -1)), dtype=float).reshape(self.m)

    def jacobian(self, x) -> np.ndarray:
        x = as_vector(x, "x", dim=self.n)
        return np.asarray(self._jacobian(x), dtype=float).reshape(self.m, self.n)

    # ---- constructors -----------------------------------------------------

    @classmethod
    def affine(cls, matrix, offset=None) -> "SmoothMap":
        """g(x) = M x + c."""
        matrix = as_matrix(matrix, "matrix")
        m, n = matrix.shape
        offset = np.zeros(m) if offset is None else as_vector(offset, "offset", dim=m)
        return cls(
            "affine", n, m,
            lambda X: X @ matrix.T + offset,
            lambda x: matrix,
            parameters={"matrix": matrix, "offset": offset},
        )

    @classmethod
    def identity(cls, n: int) -> "SmoothMap":
        return cls.affine(np.eye(n))

    @classmethod
    def polynomial(cls, components: Sequence[Sequence[Tuple[int, float]]]) -> "SmoothMap":
        """
        Componentwise polynomial g_j(x) = sum_k coef_k * x_j ** exp_k (m = n).

        Args:
            components: For each coordinate, its (exponent, coefficient) terms
        """
        if not components:
            raise ContractViolationError("polynomial map needs at least one component")
        terms: List[List[Tuple[int, float]]] = []
        for j, component in enumerate(components):
            parsed = []
            for exponent, coefficient in component:
                if int(exponent) != exponent or exponent < 0:
                    raise ContractViolationError(
                        f"component {j}: exponent {exponent} is not a non-negative integer"
                    )
                if not math.isfinite(coefficient):
                    raise ContractViolationError(f"component {j}: non-finite coefficient")
                parsed.append((int(exponent), float(coefficient)))
            terms.append(parsed)
        n = len(terms)

        def evaluate(X):
            out = np.zeros_like(X)
            for j, component in enumerate(terms):
                for exponent, coefficient in component:
                    out[:, j] += coefficient * X[:, j] ** exponent
            return out

        def jacobian(x):
            diagonal = np.zeros(n)
            for j, component in enumerate(terms):
                for exponent, coefficient in component:
                    if exponent:
                        diagonal[j] += coefficient * exponent * x[j] ** (exponent - 1)
            return np.diag(diagonal)

        return cls("polynomial", n, n, evaluate, jacobian, parameters={"components": terms})

    @classmethod
    def quadratic(cls, matrices, linear, constants) -> "SmoothMap":
        """g_j(x) = x^T Q_j x + q_j . x + c_j."""
        matrices = np.asarray(matrices, dtype=float)
        if matrices.ndim == 2:
            matrices = matrices[None]
        if matrices.ndim != 3 or matrices.shape[1] != matrices.shape[2]:
            raise ContractViolationError("quadratic matrices must be square and stacked (m, n, n)")
        if not np.all(np.isfinite(matrices)):
            raise ContractViolationError("quadratic matrices have non-finite entries")
        m, n, _ = matrices.shape
        linear = as_matrix(linear, "linear", shape=(m, n))
        constants = as_vector(constants, "constants", dim=m)
        symmetric = matrices + np.transpose(matrices, (0, 2, 1))

        return cls(
            "quadratic", n, m,
            lambda X: np.einsum("ki,jil,kl->kj", X, matrices, X) + X @ linear.T + constants,
            lambda x: symmetric @ x + linear,
            parameters={"matrices": matrices, "linear": linear, "constants": constants},
        )

    @classmethod
    def compose(cls, outer: "SmoothMap", inner: "SmoothMap") -> "SmoothMap":
        """(outer o inner)(x) with the product Jacobian."""
        check_dim("composite inner output", outer.n, inner.m)
        return cls(
            "composite", inner.n, outer.m,
            lambda X: outer(inner(X)),
            lambda x: outer.jacobian(inner(x)) @ inner.jacobian(x),
            parameters={"outer": outer, "inner": inner},
            check=False,
        )

    @classmethod
    def from_callables(cls, evaluate, jacobian, n: int, m: int) -> "SmoothMap":
        """
        Wraps user callables x -> g(x) (shape (m,)) and x -> J(x) (shape (m, n)).
        The Jacobian is checked like the built-in kinds.
        """
        def batch(X):
            return np.array([np.asarray(evaluate(row), dtype=float).reshape(m) for row in X])

        return cls("oracle", n, m, batch, jacobian)

    def __repr__(self) -> str:
        return f"SmoothMap(kind={self.kind}, n={self.n}, m={self.m})"


def central_difference_jacobian(g: SmoothMap, x: np.ndarray) -> np.ndarray:
    steps = 1e-6 * (1.0 + np.abs(x))
    columns = []
    for i in range(g.n):
        shift = np.zeros(g.n)
        shift[i] = steps[i]
        columns.append((g(x + shift) - g(x - shift)) / (2.0 * steps[i]))
    return np.stack(columns, axis=1)


def check_jacobian(g: SmoothMap, points: Optional[int] = None, rtol: Optional[float] = None, seed: int = 0) -> None:
    """
    Compares the analytic Jacobian with central differences at seeded points of [-1, 1]^n.

    Raises:
        JacobianCheckError: Relative disagreement above rtol * max(1, |J|)
    """
    points = settings.JACOBIAN_CHECK_POINTS if points is None else points
    rtol = settings.JACOBIAN_CHECK_RTOL if rtol is None else rtol
    rng = np.random.default_rng(seed)
    for x in rng.uniform(-1.0, 1.0, size=(points, g.n)):
        try:
            analytic = g.jacobian(x)
            numeric = central_difference_jacobian(g, x)
        except (ArithmeticError, ValueError) as exc:
            raise JacobianCheckError(f"{g.kind} map failed to evaluate at {x}: {exc}") from exc
        scale = max(1.0, float(np.linalg.norm(analytic)))
        gap = float(np.linalg.norm(analytic - numeric))
        if not gap <= rtol * scale:
            raise JacobianCheckError(
                f"{g.kind} map: Jacobian differs from central differences by {gap:.3g} at {x}"
            )


# ============================================================================
# COMPOSITE FUNCTION
# ============================================================================

class CompositeOracle:
    """phi = f o g, callable on a point or on a batch of points."""

    def __init__(self, f: MaxAffineFunction, g: SmoothMap):
        check_dim("f and g", f.dim, g.m)
        self.f = f
        self.g = g
        self.dim = g.n

    def __call__(self, x) -> float:
        return self.f(self.g(as_vector(x, "x", dim=self.dim)))

    def many(self, points: np.ndarray) -> np.ndarray:
        return self.f(self.g(np.atleast_2d(points)))


def composite_oracle(f: MaxAffineFunction, g: SmoothMap) -> CompositeOracle:
    return CompositeOracle(f, g)


def composite_dirderiv(f: MaxAffineFunction, g: SmoothMap, x, h, tol: Optional[float] = None) -> float:
    """phi'(x; h) = d+f(g(x); J(x) h)."""
    check_dim("f and g", f.dim, g.m)
    x = as_vector(x, "x", dim=g.n)
    h = as_vector(h, "h", dim=g.n)
    return dirderiv_f(f, g(x), g.jacobian(x) @ h, tol)


def sublevel_polyhedron(f: MaxAffineFunction, g: SmoothMap, x, level: float, tol: Optional[float] = None) -> Polyhedron:
    """
    {h : slope_i^T J h <= level for pieces i active at g(x)}; level 0 gives a PolyCone.
    """
    if not math.isfinite(level):
        raise ContractViolationError("level must be finite")
    check_dim("f and g", f.dim, g.m)
    x = as_vector(x, "x", dim=g.n)
    active = f.active_set(g(x), tol)
    rows = f.slopes[list(active.indices)] @ g.jacobian(x)
    if level == 0.0:
        return PolyCone(rows, dim=g.n)
    if level < 0.0 and np.any(np.linalg.norm(rows, axis=1) == 0.0):
        return Polyhedron.empty(g.n)
    return Polyhedron(rows, np.full(rows.shape[0], float(level)), dim=g.n)


# ============================================================================
# LOWER HADAMARD DIRECTIONAL DERIVATIVE
# ============================================================================

@dataclass(frozen=True)
class SamplingSchedule:
    """Step sizes t = 2^-k for k0 <= k <= k1 and perturbation count per step."""
    k0: int
    k1: int
    perturbations: int

    @classmethod
    def from_settings(cls) -> "SamplingSchedule":
        return cls(settings.LIMINF_K0, settings.LIMINF_K1, settings.LIMINF_PERTURBATIONS)

    @property
    def steps(self) -> np.ndarray:
        return 2.0 ** -np.arange(self.k0, self.k1 + 1, dtype=float)


def _evaluate_many(phi, points: np.ndarray) -> np.ndarray:
    many = getattr(phi, "many", None)
    if many is not None:
        return np.asarray(many(points), dtype=float)
    return np.array([float(phi(p)) for p in points])


def hadamard_lower_dirderiv(
    phi,
    x,
    h,
    schedule: Optional[SamplingSchedule] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """
    Estimates liminf over t -> 0+, h' -> h of (phi(x + t h') - phi(x)) / t.

    The same perturbations u_j (|u_j| <= 1, u_0 = 0) are used at every step,
    with h' = h + t u_j. m(t) is the smallest finite quotient, R(t) = 2 m(t/2) - m(t)
    removes the first-order bias, and the R with the smallest change between
    consecutive steps is returned. This is an estimator, not an exact value.

    Args:
        phi: Scalar oracle (optionally with a vectorised `many`)
        x: Base point, phi(x) finite
        h: Direction
        schedule: Step grid, default from settings
        rng: Source of the perturbations

    Raises:
        ContractViolationError: phi(x) is not finite
        EstimatorUndefinedError: Fewer than MIN_FINITE_STEPS steps gave a finite quotient
    """
    schedule = schedule or SamplingSchedule.from_settings()
    rng = rng or np.random.default_rng(0)
    x = as_vector(x, "x")
    h = as_vector(h, "h", dim=x.size)

    base = float(phi(x))
    if not math.isfinite(base):
        raise ContractViolationError("phi must be finite at the base point")

    radii = rng.random(schedule.perturbations)
    perturbations = np.vstack([
        np.zeros(x.size),
        unit_directions(rng, x.size, schedule.perturbations) * radii[:, None],
    ])

    minima = []
    for t in schedule.steps:
        trial_points = x + t * (h + t * perturbations)
        quotients = (_evaluate_many(phi, trial_points) - base) / t
        finite = quotients[np.isfinite(quotients)]
        minima.append(float(finite.min()) if finite.size else math.nan)
    minima = np.array(minima)

    finite_steps = int(np.count_nonzero(np.isfinite(minima)))
    if finite_steps == 0:
        raise EstimatorUndefinedError("phi is infinite at every trial point")
    if finite_steps < MIN_FINITE_STEPS:
        raise EstimatorUndefinedError(
            f"only {finite_steps} of {minima.size} steps gave a finite quotient (need {MIN_FINITE_STEPS})"
        )

    extrapolated = 2.0 * minima[1:] - minima[:-1]
    extrapolated = extrapolated[np.isfinite(extrapolated)]
    if extrapolated.size == 0:
        return float(np.nanmin(minima))
    if extrapolated.size == 1:
        return float(extrapolated[0])

    changes = np.abs(np.diff(extrapolated))
    best = int(np.argmin(changes))
    return float(extrapolated[best + 1])
