"""Closed-form algebra of anisotropic Gaussian expansions.

An expansion with ``N`` terms, ``d`` dimensions and ``m`` fields is

    u_f(x) = sum_i c[f,i] * prod_j (eps[i,j]/sqrt(pi)) * exp(-eps[i,j]^2 * (x_j - mu[i,j])^2)

Every one-dimensional factor integrates to one over the real line, so the
integral of ``u_f`` over R^d is exactly ``sum_i c[f,i]``, and integrating out
any subset of dimensions simply removes those factors.  All spatial and
parameter derivatives needed elsewhere (operators, collocation losses,
fitting) are exact Gaussian formulas assembled from the shared tables
computed here.

Scales stay positive by evolving an unconstrained variable ``s`` per scale:
``eps = exp(s)``, or ``eps = floor + softplus(s)`` when a problem declares a
minimum scale.  The flat parameter vector used by the time integrator is
``[coeffs, centers, raw scales]`` and round-trips bijectively.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.special import expit

SQRT_PI = np.sqrt(np.pi)


@dataclass(frozen=True)
class ScaleMap:
    """Bijection between the unconstrained raw variable and a positive scale.

    ``floor=None`` uses eps = exp(s); otherwise eps = floor + softplus(s),
    which guarantees eps >= floor for every real s.
    """

    floor: float | None = None

    def value(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.floor is None:
            return np.exp(s)
        return self.floor + _softplus(s)

    def deriv(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.floor is None:
            return np.exp(s)
        return expit(s)

    def second_deriv(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.floor is None:
            return np.exp(s)
        sig = expit(s)
        return sig * (1.0 - sig)

    def inverse(self, eps: np.ndarray) -> np.ndarray:
        eps = np.asarray(eps, dtype=float)
        if self.floor is None:
            if np.any(eps <= 0):
                raise ValueError("scales must be strictly positive")
            return np.log(eps)
        gap = eps - self.floor
        if np.any(gap <= 0):
            raise ValueError(f"scales must exceed the declared floor {self.floor}")
        # inverse softplus, stable for large gaps
        return np.where(gap > 30.0, gap, np.log(np.expm1(np.minimum(gap, 30.0))))


def _softplus(s: np.ndarray) -> np.ndarray:
    return np.where(s > 30.0, s, np.log1p(np.exp(np.minimum(s, 30.0))))


@dataclass
class RbfState:
    """Parameters of one Gaussian expansion at a single time.

    coeffs      (m, N) per-field coefficients
    centers     (N, d) kernel centers, same units as spatial coordinates
    scales_raw  (N, d) unconstrained scale variables (see ScaleMap)

    Fields share centers and scales; only coefficients are per-field.  The
    same container also carries parameter *derivatives* (then ``scales_raw``
    holds d(raw)/dt and ``scales`` is meaningless).
    """

    coeffs: np.ndarray
    centers: np.ndarray
    scales_raw: np.ndarray
    scale_map: ScaleMap = field(default_factory=ScaleMap)

    def __post_init__(self):
        self.coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.scales_raw = np.atleast_2d(np.asarray(self.scales_raw, dtype=float))
        n, d = self.centers.shape
        if self.coeffs.shape[1] != n or self.scales_raw.shape != (n, d):
            raise ValueError(
                f"inconsistent shapes: coeffs {self.coeffs.shape}, "
                f"centers {self.centers.shape}, scales_raw {self.scales_raw.shape}"
            )

    @property
    def n_basis(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def n_fields(self) -> int:
        return self.coeffs.shape[0]

    @property
    def n_params(self) -> int:
        return self.n_basis * (2 * self.dim + self.n_fields)

    @property
    def scales(self) -> np.ndarray:
        return self.scale_map.value(self.scales_raw)

    @classmethod
    def from_scales(cls, coeffs, centers, scales, scale_map: ScaleMap | None = None) -> "RbfState":
        scale_map = scale_map or ScaleMap()
        return cls(coeffs, centers, scale_map.inverse(np.asarray(scales, dtype=float)), scale_map)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.coeffs.ravel(), self.centers.ravel(), self.scales_raw.ravel()])

    @classmethod
    def unflatten(cls, vec, n_basis: int, dim: int, n_fields: int,
                  scale_map: ScaleMap | None = None) -> "RbfState":
        c, mu, s = split_flat(np.asarray(vec, dtype=float), n_basis, dim, n_fields)
        return cls(c.copy(), mu.copy(), s.copy(), scale_map or ScaleMap())

    def like(self, vec: np.ndarray) -> "RbfState":
        """New state with this state's shape and scale map, parameters from ``vec``."""
        return RbfState.unflatten(vec, self.n_basis, self.dim, self.n_fields, self.scale_map)

    def copy(self) -> "RbfState":
        return replace(self, coeffs=self.coeffs.copy(), centers=self.centers.copy(),
                       scales_raw=self.scales_raw.copy())

    def check_finite(self):
        for name, arr in (("coeffs", self.coeffs), ("centers", self.centers),
                          ("scales_raw", self.scales_raw)):
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(f"non-finite values in {name}")


def split_flat(vec: np.ndarray, n_basis: int, dim: int, n_fields: int):
    """Views (coeffs, centers, scales_raw) into a flat parameter vector."""
    nc = n_fields * n_basis
    nx = n_basis * dim
    if vec.shape[-1] != nc + 2 * nx:
        raise ValueError(f"flat vector of length {vec.shape[-1]} does not match "
                         f"N={n_basis}, d={dim}, m={n_fields}")
    c = vec[..., :nc].reshape(*vec.shape[:-1], n_fields, n_basis)
    mu = vec[..., nc:nc + nx].reshape(*vec.shape[:-1], n_basis, dim)
    s = vec[..., nc + nx:].reshape(*vec.shape[:-1], n_basis, dim)
    return c, mu, s


def join_flat(coeffs: np.ndarray, centers: np.ndarray, scales_raw: np.ndarray) -> np.ndarray:
    return np.concatenate([np.ravel(coeffs), np.ravel(centers), np.ravel(scales_raw)])


class KernelTables:
    """Shared arrays for one (state, point batch) pair.

    Shapes: ``xs`` (P, d); ``B`` (P, N); ``D``, ``gc``, ``ge``, ``hxx``
    (P, N, d).  The g/h tables are logarithmic derivatives: the actual kernel
    derivative is the table entry times ``B``.

        gc  = dB/d(center_j) / B =  2 eps^2 (x_j - mu_j)
        ge  = dB/d(eps_j)    / B =  1/eps - 2 eps (x_j - mu_j)^2
        hxx = d2B/dx_j^2     / B =  4 eps^4 (x_j - mu_j)^2 - 2 eps^2

    and dB/dx_j = -gc * B.
    """

    def __init__(self, state: RbfState, xs: np.ndarray):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if xs.shape[1] != state.dim:
            raise ValueError(f"points have dim {xs.shape[1]}, state has dim {state.dim}")
        self.state = state
        self.xs = xs
        self.E = state.scales                       # (N, d)
        self.E2 = self.E * self.E
        self.Ep = state.scale_map.deriv(state.scales_raw)
        self.Epp = state.scale_map.second_deriv(state.scales_raw)
        self.D = xs[:, None, :] - state.centers[None, :, :]
        expo = np.einsum("nd,pnd->pn", self.E2, self.D * self.D)
        pref = np.prod(self.E / SQRT_PI, axis=1)    # (N,)
        self.B = pref[None, :] * np.exp(-expo)

    @cached_property
    def gc(self) -> np.ndarray:
        return 2.0 * self.E2[None] * self.D

    @cached_property
    def ge(self) -> np.ndarray:
        return 1.0 / self.E[None] - 2.0 * self.E[None] * self.D * self.D

    @cached_property
    def hxx(self) -> np.ndarray:
        return 4.0 * (self.E2 * self.E2)[None] * self.D * self.D - 2.0 * self.E2[None]


# ---------------------------------------------------------------------------
# point evaluations (spec-level scalar API)
# ---------------------------------------------------------------------------

def kernel_eval(scales, center, x) -> float:
    """One normalized Gaussian factor product; strictly positive, peaks at x=center."""
    scales = np.asarray(scales, dtype=float)
    center = np.asarray(center, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(scales <= 0):
        raise ValueError("kernel scales must be strictly positive")
    diff = x - center
    return float(np.prod(scales / SQRT_PI) * np.exp(-np.sum(scales**2 * diff**2)))


def _check_field(state: RbfState, fld: int):
    if not 0 <= fld < state.n_fields:
        raise IndexError(f"field {fld} out of range for m={state.n_fields}")


def rbf_eval(state: RbfState, fld: int, x) -> float:
    _check_field(state, fld)
    tab = KernelTables(state, np.asarray(x, dtype=float)[None, :])
    return float(tab.B[0] @ state.coeffs[fld])


def rbf_grad(state: RbfState, fld: int, x) -> np.ndarray:
    """Exact spatial gradient (d,) of field ``fld`` at ``x``."""
    _check_field(state, fld)
    tab = KernelTables(state, np.asarray(x, dtype=float)[None, :])
    return np.einsum("i,id,i->d", state.coeffs[fld], -tab.gc[0], tab.B[0])


def rbf_laplacian_diag(state: RbfState, fld: int, x) -> np.ndarray:
    """Per-dimension second derivatives (d,) of field ``fld`` at ``x``."""
    _check_field(state, fld)
    tab = KernelTables(state, np.asarray(x, dtype=float)[None, :])
    return np.einsum("i,id,i->d", state.coeffs[fld], tab.hxx[0], tab.B[0])


def rbf_time_derivative(state: RbfState, state_dot: RbfState, fld: int, x) -> float:
    """Exact chain-rule du_f/dt at ``x`` under parameter velocities ``state_dot``.

    ``state_dot.scales_raw`` holds d(raw)/dt; the eps-dependence of both the
    exponent and the normalizing prefactor is included via the scale map.
    """
    _check_field(state, fld)
    tab = KernelTables(state, np.asarray(x, dtype=float)[None, :])
    out = flow_derivative(state, tab, state_dot.flatten())
    return float(out[0, fld])


# ---------------------------------------------------------------------------
# marginals, moments, mass
# ---------------------------------------------------------------------------

def _keep_factor(state: RbfState, keep_dims, x_keep) -> np.ndarray:
    keep = tuple(keep_dims)
    if len(set(keep)) != len(keep) or any(j < 0 or j >= state.dim for j in keep):
        raise ValueError(f"keep_dims {keep} must be distinct indices in [0, {state.dim})")
    x_keep = np.atleast_2d(np.asarray(x_keep, dtype=float))
    if x_keep.shape[1] != len(keep):
        raise ValueError("x_keep width must match keep_dims")
    E = state.scales[:, keep]                      # (N, k)
    mu = state.centers[:, keep]
    diff = x_keep[:, None, :] - mu[None, :, :]
    expo = np.einsum("nk,pnk->pn", E * E, diff * diff)
    pref = np.prod(E / SQRT_PI, axis=1)
    return pref[None, :] * np.exp(-expo)           # (P, N)


def marginal_density(state: RbfState, keep_dims, x_keep, fld: int = 0) -> np.ndarray | float:
    """Integrate all dims not in ``keep_dims`` out of field ``fld`` (closed form)."""
    _check_field(state, fld)
    fac = _keep_factor(state, keep_dims, x_keep)
    out = fac @ state.coeffs[fld]
    return float(out[0]) if out.shape[0] == 1 and np.ndim(x_keep) == 1 else out


def moment_weighted_marginal(state: RbfState, weight_dim: int, keep_dims, x_keep,
                             fld: int = 0) -> np.ndarray | float:
    """Closed-form first moment over an integrated dimension.

    Equals sum_i c_i * center[i, weight_dim] * (kept factors), because the
    first moment of each normalized 1-d factor is its center coordinate.
    """
    _check_field(state, fld)
    keep = tuple(keep_dims)
    if weight_dim in keep:
        raise ValueError("weight_dim must be one of the integrated dimensions")
    if not 0 <= weight_dim < state.dim:
        raise ValueError(f"weight_dim {weight_dim} out of range")
    fac = _keep_factor(state, keep, x_keep)
    w = state.coeffs[fld] * state.centers[:, weight_dim]
    out = fac @ w
    return float(out[0]) if out.shape[0] == 1 and np.ndim(x_keep) == 1 else out


def total_mass(state: RbfState, fld: int = 0) -> float:
    """Integral of field ``fld`` over R^d: exactly the coefficient sum."""
    _check_field(state, fld)
    return float(state.coeffs[fld].sum())


# ---------------------------------------------------------------------------
# batched primitives and their cotangent contractions
# ---------------------------------------------------------------------------

def eval_fields(state: RbfState, xs, tables: KernelTables | None = None) -> np.ndarray:
    """All field values at a point batch: (P, m)."""
    tab = tables or KernelTables(state, xs)
    return tab.B @ state.coeffs.T


def eval_fields_vjp(tables: KernelTables, w: np.ndarray) -> np.ndarray:
    """Cotangent of sum_{p,f} w[p,f] * u_f(x_p) w.r.t. the flat parameters."""
    st = tables.state
    B, gc, ge = tables.B, tables.gc, tables.ge
    cbar = w.T @ B                                                  # (m, N)
    u = (w @ st.coeffs) * B                                         # (P, N)
    mubar = np.einsum("pi,pid->id", u, gc)
    sbar = tables.Ep * np.einsum("pi,pid->id", u, ge)
    return join_flat(cbar, mubar, sbar)


def field_primitives(state: RbfState, tables: KernelTables):
    """Values, gradients and per-dim second derivatives of every field.

    Returns (val (P, m), grad (P, m, d), lap (P, m, d)).
    """
    B, gc, hxx = tables.B, tables.gc, tables.hxx
    C = state.coeffs
    val = B @ C.T
    grad = np.einsum("fi,pid->pfd", C, -gc * B[:, :, None])
    lap = np.einsum("fi,pid->pfd", C, hxx * B[:, :, None])
    return val, grad, lap


def field_primitives_vjp(tables: KernelTables, w_val, w_grad, w_lap) -> np.ndarray:
    """Flat-parameter cotangent of a weighted sum of field primitives.

    Any of the weight arrays may be None; shapes are w_val (P, m),
    w_grad (P, m, d), w_lap (P, m, d).
    """
    st = tables.state
    B, D, gc, ge, hxx = tables.B, tables.D, tables.gc, tables.ge, tables.hxx
    E, E2, Ep = tables.E, tables.E2, tables.Ep
    C = st.coeffs
    m, n = C.shape
    d = st.dim
    cbar = np.zeros((m, n))
    mubar = np.zeros((n, d))
    ebar = np.zeros((n, d))   # cotangent w.r.t. eps; mapped to raw at the end

    if w_val is not None:
        cbar += w_val.T @ B
        u = (w_val @ C) * B
        mubar += np.einsum("pi,pid->id", u, gc)
        ebar += np.einsum("pi,pid->id", u, ge)

    if w_grad is not None:
        gx = -gc
        cbar += np.einsum("pfj,pij,pi->fi", w_grad, gx, B)
        ug = np.einsum("pfj,fi->pij", w_grad, C)                    # (P, N, d)
        ugx = np.einsum("pij,pij->pi", ug, gx)                      # sum_j ug*gx
        mubar += np.einsum("pik,ik,pi->ik", ug, 2.0 * E2, B) \
            + np.einsum("pi,pik,pi->ik", ugx, gc, B)
        ebar += np.einsum("pik,pik,pi->ik", ug, -4.0 * E[None] * D, B) \
            + np.einsum("pi,pik,pi->ik", ugx, ge, B)

    if w_lap is not None:
        cbar += np.einsum("pfj,pij,pi->fi", w_lap, hxx, B)
        ul = np.einsum("pfj,fi->pij", w_lap, C)
        ulh = np.einsum("pij,pij->pi", ul, hxx)
        mubar += np.einsum("pik,pik,pi->ik", ul, -8.0 * (E2 * E2)[None] * D, B) \
            + np.einsum("pi,pik,pi->ik", ulh, gc, B)
        dh_de = 16.0 * (E2 * E)[None] * D * D - 4.0 * E[None]
        ebar += np.einsum("pik,pik,pi->ik", ul, dh_de, B) \
            + np.einsum("pi,pik,pi->ik", ulh, ge, B)

    return join_flat(cbar, mubar, Ep * ebar)


def flow_derivative(state: RbfState, tables: KernelTables, dot_flat: np.ndarray) -> np.ndarray:
    """du/dt at the table's points under flat parameter velocities: (P, m).

    dot_flat is laid out like the state's flat vector; its scale block holds
    raw-variable rates, converted through the scale map's derivative.
    """
    cd, xd, sd = split_flat(np.asarray(dot_flat, dtype=float),
                            state.n_basis, state.dim, state.n_fields)
    eps_dot = tables.Ep * sd
    phi = np.einsum("pid,id->pi", tables.ge, eps_dot) \
        + np.einsum("pid,id->pi", tables.gc, xd)                    # (P, N)
    return tables.B @ cd.T + (tables.B * phi) @ state.coeffs.T


def flow_derivative_vjp(state: RbfState, tables: KernelTables, dot_flat: np.ndarray,
                        w: np.ndarray):
    """Cotangents of sum w[p,f] * (du_f/dt)(x_p) w.r.t. state and velocities.

    Returns (theta_bar, dot_bar), both flat.
    """
    cd, xd, sd = split_flat(np.asarray(dot_flat, dtype=float),
                            state.n_basis, state.dim, state.n_fields)
    B, D, gc, ge = tables.B, tables.D, tables.gc, tables.ge
    E, E2, Ep, Epp = tables.E, tables.E2, tables.Ep, tables.Epp
    C = state.coeffs
    eps_dot = Ep * sd
    phi = np.einsum("pid,id->pi", ge, eps_dot) + np.einsum("pid,id->pi", gc, xd)

    u = w @ C                                                       # (P, N)
    v = w @ cd + u * phi                                            # (P, N)
    ub = u * B
    vb = v * B

    # cotangent w.r.t. velocities
    cd_bar = w.T @ B
    xd_bar = np.einsum("pi,pid->id", ub, gc)
    sd_bar = Ep * np.einsum("pi,pid->id", ub, ge)
    dot_bar = join_flat(cd_bar, xd_bar, sd_bar)

    # cotangent w.r.t. the state itself
    cbar = np.einsum("pf,pi,pi->fi", w, phi, B)
    dphi_dmu = 4.0 * E[None] * D * eps_dot[None] - (2.0 * E2 * xd)[None]
    mubar = np.einsum("pi,pid->id", ub, dphi_dmu) + np.einsum("pi,pid->id", vb, gc)
    dphi_ds = (-1.0 / E2[None] - 2.0 * D * D) * (Ep * Ep * sd)[None] \
        + ge * (Epp * sd)[None] \
        + 4.0 * E[None] * D * (Ep * xd)[None]
    sbar = np.einsum("pi,pid->id", ub, dphi_ds) + Ep * np.einsum("pi,pid->id", vb, ge)
    theta_bar = join_flat(cbar, mubar, sbar)
    return theta_bar, dot_bar
