"""Convection-diffusion benchmark on a simplex domain.

    du/dt = (1/2) sum_i d2u/dx_i^2 - sum_i b_i du/dx_i + S(x, t)

with a separable source S chosen so that

    u(x, t) = sum_i exp(-(x_i - b_i t)^2 / (2 (t + a_i))) * sin(x_i)

solves the equation exactly; initial and Dirichlet boundary data are the
restriction of u.  Defaults a_i = 0.5 + 0.5 i, b_i = 0.05 i (i = 1..d).

The family variant draws (a, b) per instance and exposes them as extra
network inputs.
"""

from __future__ import annotations

import numpy as np

from ..rbf import KernelTables, RbfState, field_primitives, field_primitives_vjp
from .base import Problem
from .fitting import latin_hypercube
from .simplex import SimplexDomain


def default_params(d: int) -> tuple[np.ndarray, np.ndarray]:
    i = np.arange(1, d + 1, dtype=float)
    return 0.5 + 0.5 * i, 0.05 * i


def analytic_example1(xs, t: float, a, b) -> np.ndarray:
    """Exact solution, (P, 1)."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    z = xs - b[None, :] * t
    phi = np.exp(-z * z / (2.0 * (t + a)[None, :]))
    return (phi * np.sin(xs)).sum(axis=1, keepdims=True)


def source_example1(xs, t: float, a, b) -> np.ndarray:
    """The two explicit source sums of the model equation, (P,)."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    tau = t + a
    z = xs - b[None, :] * t
    phi = np.exp(-z * z / (2.0 * tau[None, :]))
    cos_term = (z / tau[None, :] + b[None, :]) * phi * np.cos(xs)
    sin_term = (0.5 / tau[None, :] + 0.5) * phi * np.sin(xs)
    return (cos_term + sin_term).sum(axis=1)


class ConvectionDiffusion(Problem):
    name = "convection_diffusion"
    n_fields = 1
    metric_mode = "at_time"
    horizon = 2.0

    def __init__(self, d: int = 3, a=None, b=None, horizon: float = 2.0,
                 as_net_inputs: bool = False):
        a_def, b_def = default_params(d)
        self.dim = d
        self.a = np.asarray(a if a is not None else a_def, dtype=float)
        self.b = np.asarray(b if b is not None else b_def, dtype=float)
        if self.a.shape != (d,) or self.b.shape != (d,):
            raise ValueError("parameter vectors must have length d")
        self.horizon = float(horizon)
        self.domain = SimplexDomain(d)
        if as_net_inputs:
            self.net_inputs = np.concatenate([self.a, self.b])

    # -- sampling -----------------------------------------------------------

    def sample_interior(self, rng, n):
        return self.domain.sample_interior(rng, n)

    def sample_boundary(self, rng, n):
        return self.domain.sample_boundary(rng, n)

    def contains(self, xs):
        return self.domain.contains(xs)

    def center_init(self, rng, n):
        """Latin-hypercube over the domain: stratified cube draws pushed to the
        simplex through the sorted-spacings map (measure preserving)."""
        u = latin_hypercube(rng, n, self.dim)
        spaced = np.diff(np.sort(u, axis=1), prepend=0.0, append=1.0)  # Dirichlet(1,..,1)
        return spaced @ self.domain.vertices

    # -- data ---------------------------------------------------------------

    def initial(self, xs):
        return analytic_example1(xs, 0.0, self.a, self.b)

    def boundary_values(self, ys, t):
        return analytic_example1(ys, t, self.a, self.b)

    def oracle(self, xs, t):
        return analytic_example1(xs, t, self.a, self.b)

    # -- operator -----------------------------------------------------------

    def operator_bundle(self, state: RbfState, xs, t, tables: KernelTables | None = None):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        tab = tables or KernelTables(state, xs)
        _, grad, lap = field_primitives(state, tab)
        src = source_example1(xs, t, self.a, self.b)
        vals = 0.5 * lap.sum(axis=2) - np.einsum("pfd,d->pf", grad, self.b) + src[:, None]

        def vjp(w):
            w_grad = -w[:, :, None] * self.b[None, None, :]
            w_lap = np.broadcast_to(0.5 * w[:, :, None], w_grad.shape)
            return field_primitives_vjp(tab, None, w_grad, w_lap)

        return vals, vjp
