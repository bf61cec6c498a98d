"""Kinetic swarming benchmark: 4D phase-space transport with a nonlocal force.

Coordinates are ordered (x1, x2, v1, v2).  The density obeys

    du/dt = -v . grad_x u - div_v[(alpha - beta |v|^2) v u] + F(x) . grad_v u

where F(x) = integral of grad U(y) * rho(x - y) dy, rho the spatial marginal,
and U the Morse interaction with attractive and repulsive exponentials.  The
friction divergence expands exactly to

    (alpha - beta |v|^2) v . grad_v u + (2 alpha - 4 beta |v|^2) u.

For a Gaussian expansion rho is a Gaussian mixture, so F reduces to per-basis
convolutions of grad U with 2D Gaussians.  Sampling grad U at quadrature
nodes does not converge (the repulsive exponential is a spike of amplitude
C_r/l_r = 240 at width 0.1, and the radial direction is non-smooth at the
origin), so each exponential is lifted exactly into a Gaussian scale mixture,

    exp(-r/l) = (1/sqrt(pi)) * int_0^inf exp(-u)/sqrt(u) * exp(-r^2/(4 u l^2)) du,

turning the convolution into a 1D integral of closed-form Gaussian-Gaussian
convolutions.  That integrand is an analytic bump on a log axis, so a fixed
log-spaced trapezoid rule converges geometrically: ~1e-7 relative force
accuracy at 48 nodes (validated against dense polar quadrature of the raw
convolution).

All mass sits in infinity-vanishing Gaussians, so there is no boundary term;
training instead regularizes total-mass drift (closed form: the coefficient
sum).
"""

from __future__ import annotations

import numpy as np

from ..rbf import (KernelTables, RbfState, ScaleMap, field_primitives,
                   field_primitives_vjp, join_flat)
from .base import Problem

C_ATTRACT = 8.0
C_REPEL = 24.0
ELL_ATTRACT = 3.0
ELL_REPEL = 0.1
ALPHA = 0.05
BETA = 0.1
SCALE_FLOOR = 0.1
SAMPLE_SIGMA = 1.25


def morse_potential(r):
    r = np.asarray(r, dtype=float)
    return -C_ATTRACT * np.exp(-r / ELL_ATTRACT) + C_REPEL * np.exp(-r / ELL_REPEL)


def _morse_du(r):
    return (C_ATTRACT / ELL_ATTRACT) * np.exp(-r / ELL_ATTRACT) \
        - (C_REPEL / ELL_REPEL) * np.exp(-r / ELL_REPEL)


def _morse_ddu(r):
    return -(C_ATTRACT / ELL_ATTRACT**2) * np.exp(-r / ELL_ATTRACT) \
        + (C_REPEL / ELL_REPEL**2) * np.exp(-r / ELL_REPEL)


def morse_potential_grad(r_vec) -> np.ndarray:
    """grad U as a function of the 2-vector separation; zero at the origin
    (the radial direction is undefined there and the convolution is symmetric)."""
    r_vec = np.asarray(r_vec, dtype=float)
    r = np.linalg.norm(r_vec, axis=-1, keepdims=True)
    safe = np.where(r > 0.0, r, 1.0)
    return np.where(r > 0.0, _morse_du(safe) / safe, 0.0) * r_vec


def _morse_grad_and_hess(r_vec):
    """grad U (..., 2) and Hessian (..., 2, 2) at a batch of separations."""
    r = np.linalg.norm(r_vec, axis=-1)
    safe = np.where(r > 0.0, r, 1.0)
    du_over_r = np.where(r > 0.0, _morse_du(safe) / safe, 0.0)
    grad = du_over_r[..., None] * r_vec
    e = r_vec / safe[..., None]
    outer = e[..., :, None] * e[..., None, :]
    eye = np.eye(2)
    hess = _morse_ddu(safe)[..., None, None] * outer \
        + du_over_r[..., None, None] * (eye - outer)
    hess = np.where((r > 0.0)[..., None, None], hess, 0.0)
    return grad, hess


class VlasovSwarm(Problem):
    name = "vlasov_swarm"
    dim = 4
    n_fields = 1
    metric_mode = "mass"
    has_boundary = False
    horizon = 12.0
    scale_map = ScaleMap(floor=SCALE_FLOOR)
    init_scale = max(1.0, SCALE_FLOOR)

    def __init__(self, horizon: float = 12.0, quad_order: int = 8):
        if quad_order < 2:
            raise ValueError("convolution quadrature order must be at least 2")
        self.horizon = float(horizon)
        self.quad_order = int(quad_order)
        # log-spaced trapezoid nodes for the Gaussian scale-mixture variable
        tau = np.linspace(-14.0, 4.2, 6 * self.quad_order)
        self._mix_u = np.exp(tau)
        self._mix_w = (tau[1] - tau[0]) * np.exp(-self._mix_u) \
            * np.sqrt(self._mix_u) / np.sqrt(np.pi)

    # -- sampling -----------------------------------------------------------

    def sample_interior(self, rng, n):
        return SAMPLE_SIGMA * rng.standard_normal((n, 4))

    def sample_boundary(self, rng, n):
        raise NotImplementedError("unbounded domain: no boundary sampling")

    def contains(self, xs):
        return np.all(np.isfinite(np.atleast_2d(xs)), axis=1)

    def center_init(self, rng, n):
        """i.i.d. draws from the collocation sampling law."""
        return self.sample_interior(rng, n)

    # -- data ---------------------------------------------------------------

    def initial(self, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return ((4.0 / np.pi**2) * np.exp(-2.0 * (xs**2).sum(axis=1)))[:, None]

    # -- force field ----------------------------------------------------------

    def force_bundle(self, state: RbfState, xs_spatial: np.ndarray):
        """F at spatial points (P, 2) plus its flat-parameter cotangent closure.

        Per basis and Morse component, the convolution is a scale mixture of
        Gaussian-Gaussian convolutions: with per-dim variance sig2 = 1/(2 eps^2)
        and mixture variance v(u) = 2 u l^2 + sig2,

            (exp(-|.|/l) * rho_i)(x)
              = int w(u) * 4 pi u l^2 * prod_j N(x_j; mu_ij, v_j(u)) du,

        and F is the spatial gradient of -C_a(attractive) + C_r(repulsive)
        terms, weighted by the basis coefficients.
        """
        xs_spatial = np.atleast_2d(np.asarray(xs_spatial, dtype=float))
        c = state.coeffs[0]                                         # (N,)
        mu = state.centers[:, :2]                                   # (N, 2)
        eps = state.scales[:, :2]
        sig2 = 1.0 / (2.0 * eps * eps)                              # (N, 2)
        diff = xs_spatial[:, None, :] - mu[None, :, :]              # (P, N, 2)
        u, wq = self._mix_u, self._mix_w

        pieces = []
        q = 0.0
        for sign, amp, ell in ((-1.0, C_ATTRACT, ELL_ATTRACT), (1.0, C_REPEL, ELL_REPEL)):
            v = 2.0 * u[None, :, None] * ell**2 + sig2[:, None, :]  # (N, K, 2)
            z = diff[:, :, None, :] / v[None]                       # (P, N, K, 2)
            pn = np.exp(-0.5 * np.einsum("pnkj,pnj->pnk", z, diff)) \
                / (2.0 * np.pi * np.sqrt(v[:, :, 0] * v[:, :, 1]))[None]   # (P, N, K)
            scale = sign * amp * wq * 4.0 * np.pi * u * ell**2      # (K,)
            q = q + np.einsum("k,pnk,pnkc->pnc", scale, pn, -z)
            pieces.append((scale, v, z, pn))
        force = np.einsum("n,pnc->pc", c, q)

        def vjp(w_force):
            """w_force (P, 2) -> flat theta cotangent of sum w . F."""
            coeff_bar = np.zeros_like(state.coeffs)
            coeff_bar[0] = np.einsum("pc,pnc->n", w_force, q)
            mubar2 = np.zeros_like(mu)
            ebar2 = np.zeros_like(eps)
            for scale, v, z, pn in pieces:
                w0 = np.einsum("pc,pnkc->pnk", w_force, -z)         # sum_c wF_c q_c
                common = scale[None, None, :] * pn
                # d(grad term)/d center_j = pn (q_c z_j + delta_cj / v_j)
                s1 = common[..., None] * (w0[..., None] * z
                                          + w_force[:, None, None, :] / v[None])
                mubar2 += np.einsum("n,pnkj->nj", c, s1)
                # d/d v_j = pn [ w0 (z_j^2/2 - 1/(2 v_j)) + wF_j z_j / v_j ]
                s2 = common[..., None] * (
                    w0[..., None] * 0.5 * (z * z - 1.0 / v[None])
                    + w_force[:, None, None, :] * z / v[None])
                ebar2 += np.einsum("n,pnkj->nj", c, s2) * (-1.0 / eps**3)
            mubar = np.zeros_like(state.centers)
            mubar[:, :2] = mubar2
            ebar = np.zeros_like(state.centers)
            ebar[:, :2] = ebar2
            sbar = state.scale_map.deriv(state.scales_raw) * ebar
            return join_flat(coeff_bar, mubar, sbar)

        return force, vjp, q

    def force_field(self, state: RbfState, xs_spatial: np.ndarray) -> np.ndarray:
        force, _, _ = self.force_bundle(state, xs_spatial)
        return force

    # -- diagnostics ----------------------------------------------------------

    @staticmethod
    def spatial_density(state: RbfState, xs_spatial) -> np.ndarray:
        from ..rbf import marginal_density
        return np.atleast_1d(marginal_density(state, (0, 1), xs_spatial))

    @staticmethod
    def weighted_velocity(state: RbfState, xs_spatial, density_floor: float = 1e-6):
        """Velocity-moment field (P, 2) = first v-moments over the density,
        plus the mask of points where the density is large enough to divide."""
        from ..rbf import marginal_density, moment_weighted_marginal
        rho = np.atleast_1d(marginal_density(state, (0, 1), xs_spatial))
        m1 = np.atleast_1d(moment_weighted_marginal(state, 2, (0, 1), xs_spatial))
        m2 = np.atleast_1d(moment_weighted_marginal(state, 3, (0, 1), xs_spatial))
        ok = np.abs(rho) > density_floor
        safe = np.where(ok, rho, 1.0)
        vel = np.stack([m1 / safe, m2 / safe], axis=1)
        return vel, ok

    @staticmethod
    def angular_momentum_proxy(state: RbfState, xs_spatial) -> float:
        """sum over usable eval points of (x cross weighted velocity)_z."""
        xs_spatial = np.atleast_2d(xs_spatial)
        vel, ok = VlasovSwarm.weighted_velocity(state, xs_spatial)
        cross = xs_spatial[:, 0] * vel[:, 1] - xs_spatial[:, 1] * vel[:, 0]
        return float(cross[ok].sum())

    # -- operator -----------------------------------------------------------

    def operator_bundle(self, state: RbfState, xs, t, tables: KernelTables | None = None):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        tab = tables or KernelTables(state, xs)
        val, grad, _ = field_primitives(state, tab)
        v = xs[:, 2:]
        speed2 = (v**2).sum(axis=1)
        friction = ALPHA - BETA * speed2                            # (P,)
        force, force_vjp, q = self.force_bundle(state, xs[:, :2])

        # grad weights: -v on spatial slots, F - friction*v on velocity slots
        gw = np.empty((xs.shape[0], 4))
        gw[:, :2] = -v
        gw[:, 2:] = force - friction[:, None] * v
        vw = -(2.0 * ALPHA - 4.0 * BETA * speed2)                   # (P,)
        vals = (np.einsum("pd,pd->p", gw, grad[:, 0, :]) + vw * val[:, 0])[:, None]

        def vjp(w):
            w1 = w[:, 0]                                            # m = 1
            w_val = (w1 * vw)[:, None]
            w_grad = (w1[:, None] * gw)[:, None, :]
            theta_bar = field_primitives_vjp(tab, w_val, w_grad, None)
            # force enters through the velocity-gradient weights
            w_force = w1[:, None] * grad[:, 0, 2:]
            theta_bar += force_vjp(w_force)
            return theta_bar

        return vals, vjp
