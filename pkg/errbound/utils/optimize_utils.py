"""
errbound/utils/optimize_utils.py

Purpose: Small optimisation kernels shared by the services

- Bisection to a zero-level crossing along a segment
- Damped Gauss-Newton (Levenberg-Marquardt) with adaptive damping
- Nearest point under smooth constraints (scipy SLSQP)
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

ScalarFn = Callable[[np.ndarray], float]
VectorFn = Callable[[np.ndarray], np.ndarray]


def bisect_boundary(
    phi: ScalarFn,
    feasible: np.ndarray,
    infeasible: np.ndarray,
    iterations: int = 80,
) -> np.ndarray:
    """
    Bisection on the segment [feasible, infeasible] for the crossing of phi <= 0.

    Args:
        phi: Scalar function, phi(feasible) <= 0 < phi(infeasible)
        feasible: Segment end inside the sublevel set
        infeasible: Segment end outside it
        iterations: Halvings of the bracket

    Returns:
        The feasible end of the final bracket (phi <= 0 holds exactly there)
    """
    inside = np.array(feasible, dtype=float)
    outside = np.array(infeasible, dtype=float)
    for _ in range(iterations):
        middle = 0.5 * (inside + outside)
        if np.array_equal(middle, inside) or np.array_equal(middle, outside):
            break
        if phi(middle) <= 0.0:
            inside = middle
        else:
            outside = middle
    return inside


@dataclass(frozen=True)
class LeastSquaresResult:
    x: np.ndarray
    residual: float
    converged: bool
    iterations: int


def levenberg_marquardt(
    residual_and_jacobian: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]],
    x0: np.ndarray,
    lambda0: float = 1e-3,
    max_iter: int = 50,
    tol: float = 1e-10,
) -> LeastSquaresResult:
    """
    Damped Gauss-Newton on ||r(x)||.

    The damping is absolute (J^T J + lambda I), divided by 3 after an accepted
    step and multiplied by 4 after a rejected one.

    Args:
        residual_and_jacobian: x -> (r(x), J(x)) with J of shape (len(r), len(x))
        x0: Starting point
        lambda0: Initial damping
        max_iter: Iteration cap
        tol: Residual norm treated as solved

    Returns:
        LeastSquaresResult with the best iterate
    """
    x = np.array(x0, dtype=float)
    residual, jacobian = residual_and_jacobian(x)
    cost = float(np.linalg.norm(residual))
    damping = lambda0
    eye = np.eye(x.size)

    iteration = 0
    for iteration in range(1, max_iter + 1):
        if cost <= tol:
            return LeastSquaresResult(x, cost, True, iteration - 1)

        normal = jacobian.T @ jacobian + damping * eye
        gradient = jacobian.T @ residual
        step, *_ = np.linalg.lstsq(normal, -gradient, rcond=None)

        candidate = x + step
        new_residual, new_jacobian = residual_and_jacobian(candidate)
        new_cost = float(np.linalg.norm(new_residual))

        if np.isfinite(new_cost) and new_cost < cost:
            x, residual, jacobian, cost = candidate, new_residual, new_jacobian, new_cost
            damping = max(damping / 3.0, 1e-15)
        else:
            damping *= 4.0

        if np.linalg.norm(step) <= 1e-15 * (1.0 + np.linalg.norm(x)) and damping > 1e12:
            break

    return LeastSquaresResult(x, cost, cost <= tol, iteration)


def nearest_point(
    target: np.ndarray,
    start: np.ndarray,
    constraint: VectorFn,
    constraint_jac: VectorFn,
    equality: bool = False,
    max_iter: int = 200,
) -> Optional[np.ndarray]:
    """
    Local solution of min 0.5*||z - target||^2 s.t. constraint(z) >= 0 (or == 0).

    Returns:
        The last SLSQP iterate (callers verify feasibility), or None if it is not finite
    """
    def objective(z):
        diff = z - target
        return 0.5 * float(diff @ diff), diff

    result = minimize(
        objective,
        np.array(start, dtype=float),
        jac=True,
        method="SLSQP",
        constraints=[{
            "type": "eq" if equality else "ineq",
            "fun": constraint,
            "jac": constraint_jac,
        }],
        options={"maxiter": max_iter, "ftol": 1e-14},
    )
    if not np.all(np.isfinite(result.x)):
        return None
    return np.asarray(result.x, dtype=float)
