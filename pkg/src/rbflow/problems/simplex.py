"""The simplex domain of the convection-diffusion benchmark.

Omega = { x in R^d : x_i >= -3/d for all i, sum_i x_i <= 0 } is a regular
simplex with d+1 facets and implied coordinate bounds x_i in [-3/d, 3-3/d].
Interior points are uniform via a Dirichlet barycentric draw; boundary
points pick one of the d+1 facets with equal probability and then sample
uniformly with respect to surface area within it (each facet is itself a
(d-1)-simplex spanned by d of the vertices).
"""

from __future__ import annotations

import numpy as np


def simplex_vertices(d: int) -> np.ndarray:
    """(d+1, d) vertices: v0 = (-3/d, ..., -3/d), v_k = v0 + 3 e_k."""
    if d < 2:
        raise ValueError("simplex domain needs d >= 2")
    v = np.full((d + 1, d), -3.0 / d)
    v[1:] += 3.0 * np.eye(d)
    return v


def sample_simplex_interior(rng: np.random.Generator, d: int, n: int = 1) -> np.ndarray:
    verts = simplex_vertices(d)
    lam = rng.dirichlet(np.ones(d + 1), size=n)
    return lam @ verts


def sample_simplex_boundary(rng: np.random.Generator, d: int, n: int = 1) -> np.ndarray:
    """Facet index k drops vertex k: k=0 is the sum(x)=0 face spanned by v1..vd,
    k>=1 is the x_k = -3/d face spanned by the remaining vertices."""
    verts = simplex_vertices(d)
    facet = rng.integers(0, d + 1, size=n)
    lam = rng.dirichlet(np.ones(d), size=n)
    out = np.empty((n, d))
    for k in range(d + 1):
        rows = facet == k
        if not np.any(rows):
            continue
        out[rows] = lam[rows] @ np.delete(verts, k, axis=0)
    return out


class SimplexDomain:
    def __init__(self, d: int):
        if d < 2:
            raise ValueError("simplex domain needs d >= 2")
        self.d = d
        self.vertices = simplex_vertices(d)

    def contains(self, xs: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        xs = np.atleast_2d(xs)
        return np.all(xs >= -3.0 / self.d - tol, axis=1) & (xs.sum(axis=1) <= tol)

    def sample_interior(self, rng: np.random.Generator, n: int = 1) -> np.ndarray:
        return sample_simplex_interior(rng, self.d, n)

    def sample_boundary(self, rng: np.random.Generator, n: int = 1) -> np.ndarray:
        return sample_simplex_boundary(rng, self.d, n)

    def coordinate_bounds(self) -> tuple[float, float]:
        return -3.0 / self.d, 3.0 - 3.0 / self.d
