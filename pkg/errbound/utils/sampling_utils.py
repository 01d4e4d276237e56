"""
errbound/utils/sampling_utils.py

Purpose: Seeded sampling helpers

- Generator construction and per-task spawning (reproducible under threads)
- Uniform sampling in balls, annuli and on spheres
- Structured direction sets and regular grids
"""

import math
from typing import List, Optional

import numpy as np


def make_rng(seed: Optional[int]) -> np.random.Generator:
    """Generator for an instance-level seed."""
    return np.random.default_rng(seed)


def spawn_rngs(seed: int, count: int) -> List[np.random.Generator]:
    """
    Independent generators derived from one seed.
    Child i depends only on (seed, i), never on evaluation order.
    """
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(child) for child in children]


def unit_directions(rng: np.random.Generator, dim: int, count: int) -> np.ndarray:
    """Uniform random points on the unit sphere, shape (count, dim)."""
    raw = rng.standard_normal((count, dim))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return raw / norms


def axis_directions(dim: int) -> np.ndarray:
    """The 2*dim signed basis vectors, shape (2*dim, dim)."""
    eye = np.eye(dim)
    return np.vstack([eye, -eye])


def sample_ball(rng: np.random.Generator, center: np.ndarray, radius: float, count: int) -> np.ndarray:
    """Uniform samples of the closed Euclidean ball B(center, radius)."""
    dim = center.size
    directions = unit_directions(rng, dim, count)
    scales = radius * rng.random(count) ** (1.0 / dim)
    return center + directions * scales[:, None]


def sample_annulus(
    rng: np.random.Generator,
    center: np.ndarray,
    inner: float,
    outer: float,
    count: int,
) -> np.ndarray:
    """
    Uniform samples of {x : inner <= |x - center| <= outer}.
    """
    dim = center.size
    directions = unit_directions(rng, dim, count)
    low, high = inner ** dim, outer ** dim
    scales = (low + (high - low) * rng.random(count)) ** (1.0 / dim)
    return center + directions * scales[:, None]


def grid_points(center: np.ndarray, halfwidth: float, per_axis: int) -> np.ndarray:
    """Regular grid on the box center +/- halfwidth, shape (per_axis**dim, dim)."""
    axes = [np.linspace(c - halfwidth, c + halfwidth, per_axis) for c in center]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def points_per_axis(dim: int, budget: int, cap: int) -> int:
    """Per-axis resolution so that per_axis**dim stays within budget."""
    return max(3, min(cap, int(math.floor(budget ** (1.0 / dim)))))
