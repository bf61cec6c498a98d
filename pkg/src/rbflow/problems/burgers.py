"""Coupled 2D Burgers benchmark on the unit square.

    du/dt = -u du/dx1 - v du/dx2 + mu * lap(u)
    dv/dt = -u dv/dx1 - v dv/dx2 + mu * lap(v)

with u(x,0) = sin(pi x1) cos(pi x2), v(x,0) = cos(pi x1) sin(pi x2).  The
Cole-Hopf potential phi = exp(2 lambda cos(pi x1) cos(pi x2)), lambda =
1/(4 mu pi), evolves under the heat kernel, giving the double-cosine-series
solution

    u = 2 pi mu * [sum n A C E sin(n pi x1) cos(m pi x2)] / phi-series
    v = 2 pi mu * [sum m A C E cos(n pi x1) sin(m pi x2)] / phi-series

with C the cosine coefficients of the initial potential (tensor
Gauss-Legendre quadrature), E_mn(t) = exp(-(n^2+m^2) pi^2 mu t), and A the
usual 1/2/2/4 cosine normalization.  Dirichlet data is the restriction of
this series to the boundary.
"""

from __future__ import annotations

import numpy as np

from ..rbf import KernelTables, RbfState, field_primitives, field_primitives_vjp
from .base import Problem
from .fitting import latin_hypercube


class SeriesError(ArithmeticError):
    """Raised when the series denominator is too small to divide by."""


class BurgersSeries:
    """Truncated Cole-Hopf series oracle for the coupled Burgers system."""

    def __init__(self, mu: float = 0.1, trunc: int = 24, quad_points: int = 64):
        if trunc < 1:
            raise ValueError("truncation must be at least 1")
        self.mu = float(mu)
        self.trunc = int(trunc)
        self.lam = 1.0 / (4.0 * self.mu * np.pi)
        k = np.arange(trunc + 1)
        # A_mn: 1 when both indices vanish, 4 when neither does, 2 otherwise
        a = np.where(k == 0, 1.0, 2.0)
        self.A = np.outer(a, a)
        self.C = self._cosine_coeffs(quad_points)
        self.decay = (k[:, None] ** 2 + k[None, :] ** 2) * np.pi**2 * self.mu

    def _cosine_coeffs(self, quad_points: int) -> np.ndarray:
        """C[n, m] = integral of exp(2 lam cos(pi x1) cos(pi x2)) cos(n pi x1) cos(m pi x2)."""
        nodes, weights = np.polynomial.legendre.leggauss(quad_points)
        x = 0.5 * (nodes + 1.0)
        w = 0.5 * weights
        kernel = np.exp(2.0 * self.lam * np.outer(np.cos(np.pi * x), np.cos(np.pi * x)))
        k = np.arange(self.trunc + 1)
        cos_tab = np.cos(np.pi * np.outer(k, x)) * w[None, :]      # (K+1, Q)
        return cos_tab @ kernel @ cos_tab.T

    def evaluate(self, xs, t: float) -> np.ndarray:
        """(P, 2) velocity fields at time t."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        k = np.arange(self.trunc + 1)
        coef = self.A * self.C * np.exp(-self.decay * t)           # (K+1, K+1) over (n, m)
        cos1 = np.cos(np.pi * np.outer(xs[:, 0], k))               # (P, K+1)
        sin1 = np.sin(np.pi * np.outer(xs[:, 0], k))
        cos2 = np.cos(np.pi * np.outer(xs[:, 1], k))
        sin2 = np.sin(np.pi * np.outer(xs[:, 1], k))
        denom = np.einsum("pn,nm,pm->p", cos1, coef, cos2)
        num_u = np.einsum("pn,nm,pm->p", sin1, coef * k[:, None], cos2)
        num_v = np.einsum("pn,nm,pm->p", cos1, coef * k[None, :], sin2)
        if np.any(np.abs(denom) < 1e-12):
            raise SeriesError("series denominator below 1e-12; solution ill-conditioned here")
        scale = 2.0 * np.pi * self.mu
        return np.stack([scale * num_u / denom, scale * num_v / denom], axis=1)

    def truncation_gap(self, probe_t: float = 0.1, grid: int = 9) -> float:
        """Max |K vs K+4| difference on a probe grid (truncation adequacy check)."""
        finer = BurgersSeries(self.mu, self.trunc + 4, quad_points=64 + 16)
        x = np.linspace(0.05, 0.95, grid)
        pts = np.stack(np.meshgrid(x, x), axis=-1).reshape(-1, 2)
        return float(np.max(np.abs(self.evaluate(pts, probe_t) - finer.evaluate(pts, probe_t))))


def analytic_example2(x, t: float, mu: float = 0.1, trunc: int = 24) -> np.ndarray:
    """Single-point convenience wrapper: (2,) velocities."""
    return BurgersSeries(mu, trunc).evaluate(np.asarray(x, dtype=float)[None, :], t)[0]


class Burgers2D(Problem):
    name = "burgers_2d"
    dim = 2
    n_fields = 2
    metric_mode = "time_averaged"
    horizon = 1.0

    def __init__(self, mu: float = 0.1, trunc: int = 24, horizon: float = 1.0):
        self.mu = float(mu)
        self.horizon = float(horizon)
        self.series = BurgersSeries(mu, trunc)

    # -- sampling -----------------------------------------------------------

    def sample_interior(self, rng, n):
        return rng.uniform(0.0, 1.0, size=(n, 2))

    def sample_boundary(self, rng, n):
        """One of the four edges with equal probability, uniform along it."""
        edge = rng.integers(0, 4, size=n)
        s = rng.uniform(0.0, 1.0, size=n)
        out = np.empty((n, 2))
        out[:, 0] = np.where(edge == 0, 0.0, np.where(edge == 1, 1.0, s))
        out[:, 1] = np.where(edge == 2, 0.0, np.where(edge == 3, 1.0, s))
        return out

    def contains(self, xs):
        xs = np.atleast_2d(xs)
        return np.all((xs >= -1e-9) & (xs <= 1.0 + 1e-9), axis=1)

    def center_init(self, rng, n):
        return latin_hypercube(rng, n, 2)

    # -- data ---------------------------------------------------------------

    def initial(self, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        u = np.sin(np.pi * xs[:, 0]) * np.cos(np.pi * xs[:, 1])
        v = np.cos(np.pi * xs[:, 0]) * np.sin(np.pi * xs[:, 1])
        return np.stack([u, v], axis=1)

    def boundary_values(self, ys, t):
        return self.series.evaluate(ys, t)

    def oracle(self, xs, t):
        return self.series.evaluate(xs, t)

    # -- operator -----------------------------------------------------------

    def operator_bundle(self, state: RbfState, xs, t, tables: KernelTables | None = None):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        tab = tables or KernelTables(state, xs)
        val, grad, lap = field_primitives(state, tab)
        # velocity components are the fields themselves: advection -sum_j val_j d_j u_f
        adv = np.einsum("pj,pfj->pf", val, grad)
        vals = -adv + self.mu * lap.sum(axis=2)

        def vjp(w):
            w_val = -np.einsum("pf,pfj->pj", w, grad)
            w_grad = -w[:, :, None] * val[:, None, :]
            w_lap = np.broadcast_to(self.mu * w[:, :, None], w_grad.shape)
            return field_primitives_vjp(tab, w_val, w_grad, w_lap)

        return vals, vjp
