"""Nested Clenshaw-Curtis knots, hyperbolic-cross grids, Smolyak interpolation
and quadrature, and the computable skeleton of the anisotropic error bound.

Knots at level i are the Chebyshev extrema -cos(pi (j-1)/(m_i - 1)) with
m_1 = 1 (single knot 0, the nested convention) and m_i = 2^(i-1)+1.  Each
knot is computed from its reduced fraction so equal knots are bit-identical
across levels and grids nest exactly.

The sparse point set is H(q, d) = union of tensor grids over multi-indices
with q-d+1 <= |i|_1 <= q, and the interpolation operator is the sum of
tensor difference products over |i|_1 <= q, expanded literally (every
Delta = I_i - I_{i-1} product is unrolled into signed tensor interpolants).
Quadrature weights integrate the same expansion term by term.

The surrogate builder turns a function vanishing outside [-1, 1]^d into a
Gaussian expansion u_N(x) = sum_i u(x_i) w_i B(x - x_i) with kernel scales
1/eps, the construction behind the anisotropic approximation bound; the
bound evaluator is a trend instrument only (its unknown constant is set
to 1).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import erf

SQRT_PI = math.sqrt(math.pi)


# ---------------------------------------------------------------------------
# 1D knots, barycentric weights, quadrature weights
# ---------------------------------------------------------------------------

def num_knots(level: int) -> int:
    if level < 1:
        raise ValueError("level must be >= 1")
    return 1 if level == 1 else 2 ** (level - 1) + 1


def _canonical_knot(j: int, n: int) -> float:
    """-cos(pi j / n) from the reduced fraction, so shared knots share bits."""
    g = math.gcd(j, n)
    a, b = j // g, n // g
    if a == 0:
        return -1.0
    if a == b:
        return 1.0
    if 2 * a == b:
        return 0.0
    return -math.cos(math.pi * a / b)


@lru_cache(maxsize=None)
def _knots_tuple(level: int) -> tuple[float, ...]:
    m = num_knots(level)
    if m == 1:
        return (0.0,)
    return tuple(_canonical_knot(j, m - 1) for j in range(m))


def cc_knots(level: int) -> np.ndarray:
    """Sorted nested Clenshaw-Curtis knots on [-1, 1]."""
    return np.array(_knots_tuple(level))


def _bary_weights(m: int) -> np.ndarray:
    """Barycentric weights for Chebyshev extrema in ascending order."""
    w = np.ones(m)
    w[1::2] = -1.0
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


@lru_cache(maxsize=None)
def _quad_weights_tuple(level: int) -> tuple[float, ...]:
    """Integrals of the Lagrange cardinal functions over [-1, 1]."""
    if level == 1:
        return (2.0,)
    knots = cc_knots(level)
    m = knots.size
    gl_x, gl_w = np.polynomial.legendre.leggauss(m)
    card = _cardinal_matrix(knots, gl_x)           # (Q, m)
    return tuple(float(v) for v in gl_w @ card)


def _cardinal_matrix(knots: np.ndarray, xq: np.ndarray) -> np.ndarray:
    """L[q, j] = j-th cardinal polynomial at xq[q], barycentric form."""
    if knots.size == 1:
        return np.ones((xq.size, 1))
    w = _bary_weights(knots.size)
    diff = xq[:, None] - knots[None, :]
    hit = diff == 0.0
    safe = np.where(hit, 1.0, diff)
    ratio = w[None, :] / safe
    out = ratio / ratio.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    out[rows] = hit[rows].astype(float)
    return out


def _cardinal_vector(level: int, x: float) -> np.ndarray:
    return _cardinal_matrix(cc_knots(level), np.array([float(x)]))[0]


# ---------------------------------------------------------------------------
# hyperbolic-cross point sets and the Smolyak expansion
# ---------------------------------------------------------------------------

def _compositions(total: int, d: int):
    """All multi-indices >= 1 with |i|_1 == total."""
    if d == 1:
        yield (total,)
        return
    for head in range(1, total - d + 2):
        for tail in _compositions(total - head, d - 1):
            yield (head,) + tail


@lru_cache(maxsize=None)
def _difference_expansion(q: int, d: int) -> tuple[tuple[tuple[int, ...], int], ...]:
    """Tensor terms of sum_{|i|<=q} Delta_{i_1} x ... x Delta_{i_d}.

    Each Delta_i = I_i - I_{i-1} (I_0 = 0) is unrolled; returns
    ((levels, coefficient), ...) with zero-coefficient terms dropped.
    """
    terms: dict[tuple[int, ...], int] = {}
    for total in range(d, q + 1):
        for idx in _compositions(total, d):
            for z in itertools.product((0, 1), repeat=d):
                low = tuple(a - b for a, b in zip(idx, z))
                if any(v < 1 for v in low):
                    continue
                sign = -1 if sum(z) % 2 else 1
                terms[low] = terms.get(low, 0) + sign
    return tuple((lv, c) for lv, c in sorted(terms.items()) if c != 0)


@dataclass
class SparseGrid:
    """H(q, d) with per-point Smolyak quadrature weights."""

    q: int
    d: int
    points: np.ndarray = field(repr=False)     # (n, d), lexicographically sorted
    weights: np.ndarray = field(repr=False)    # (n,)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def build_grid(q: int, d: int) -> SparseGrid:
    if q < d:
        raise ValueError("level q must be at least the dimension d")
    pts: set[tuple[float, ...]] = set()
    for total in range(max(d, q - d + 1), q + 1):
        for idx in _compositions(total, d):
            axes = [_knots_tuple(lv) for lv in idx]
            pts.update(itertools.product(*axes))
    ordered = sorted(pts)
    wmap = {p: 0.0 for p in ordered}
    for levels, coef in _difference_expansion(q, d):
        axes = [_knots_tuple(lv) for lv in levels]
        w1d = [_quad_weights_tuple(lv) for lv in levels]
        for combo in itertools.product(*(range(len(a)) for a in axes)):
            p = tuple(axes[k][combo[k]] for k in range(d))
            wmap[p] += coef * math.prod(w1d[k][combo[k]] for k in range(d))
    points = np.array(ordered).reshape(len(ordered), d)
    weights = np.array([wmap[p] for p in ordered])
    return SparseGrid(q, d, points, weights)


def count(q: int, d: int) -> int:
    return build_grid(q, d).n_points


def q_for_budget(n_budget: int, d: int) -> int:
    """Largest level whose point set fits the basis budget:
    count(q, d) <= n_budget < count(q+1, d)."""
    if n_budget < 1:
        raise ValueError("budget must be positive")
    q = d
    while build_grid(q + 1, d).n_points <= n_budget:
        q += 1
    return q


def smolyak_interpolate(q: int, d: int, f: Callable, x) -> float:
    """Value of the Smolyak interpolant of f at x in [-1, 1]^d.

    Reproduces f exactly on H(q, d) and on the associated hyperbolic-cross
    polynomial space.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != d:
        raise ValueError(f"point has dim {x.size}, expected {d}")
    cache: dict[tuple[float, ...], float] = {}

    def fval(pt: tuple[float, ...]) -> float:
        v = cache.get(pt)
        if v is None:
            v = cache[pt] = float(f(np.array(pt)))
        return v

    total = 0.0
    for levels, coef in _difference_expansion(q, d):
        axes = [_knots_tuple(lv) for lv in levels]
        vals = np.empty(tuple(len(a) for a in axes))
        for combo in itertools.product(*(range(len(a)) for a in axes)):
            vals[combo] = fval(tuple(axes[k][combo[k]] for k in range(d)))
        for k in range(d):
            vals = np.tensordot(vals, _cardinal_vector(levels[k], x[k]), axes=([0], [0]))
        total += coef * float(vals)
    return total


# ---------------------------------------------------------------------------
# Gaussian surrogate built from sparse-grid quadrature
# ---------------------------------------------------------------------------

class GaussianSurrogate:
    """u_N(x) = sum_i u(x_i) w_i B_{1/eps, 0}(x - x_i) over H(q, d).

    ``eps`` holds the per-dimension mollification scales in (0, 1); the
    Gaussian kernels use their inverses, so smaller eps means a narrower,
    taller kernel in that dimension.  Assumes u vanishes outside [-1, 1]^d.
    """

    def __init__(self, u: Callable, eps, q: int, d: int):
        eps = np.asarray(eps, dtype=float)
        if eps.shape != (d,):
            raise ValueError(f"eps must have shape ({d},)")
        if np.any(eps <= 0):
            raise ValueError("mollification scales must be positive")
        grid = build_grid(q, d)
        self.grid = grid
        self.kernel_scales = 1.0 / eps
        self.values = np.array([float(u(p)) for p in grid.points])
        self.coeffs = self.values * grid.weights

    @property
    def n_basis(self) -> int:
        return self.grid.n_points

    def __call__(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        xq = np.atleast_2d(x)
        ks = self.kernel_scales
        pref = float(np.prod(ks / SQRT_PI))
        out = np.empty(xq.shape[0])
        for lo in range(0, xq.shape[0], 4096):
            hi = min(lo + 4096, xq.shape[0])
            diff = xq[lo:hi, None, :] - self.grid.points[None, :, :]
            expo = np.einsum("d,pnd->pn", ks * ks, diff * diff)
            out[lo:hi] = pref * (np.exp(-expo) @ self.coeffs)
        return float(out[0]) if single else out


def rbf_quadrature_approx(u: Callable, eps, q: int, d: int) -> GaussianSurrogate:
    return GaussianSurrogate(u, eps, q, d)


# ---------------------------------------------------------------------------
# anisotropic error-bound skeleton
# ---------------------------------------------------------------------------

@dataclass
class AnisotropyProfile:
    """Scale schedule and norm surrogates of a target function.

    ``scales_for(N)`` must return per-dimension scales in (0, 1);
    ``deriv_norms`` are sup-norm surrogates of the first partials.
    """

    scales_for: Callable[[int], np.ndarray]
    deriv_norms: np.ndarray
    sup_norm: float
    sobolev_norm: float
    label: str = ""


def paper_schedule(d: int) -> Callable[[int], np.ndarray]:
    """eps_i = N^(-1/(4 i (i+1))), i = 1..d: tightest scale first."""
    i = np.arange(1, d + 1, dtype=float)
    return lambda n: np.asarray(n, dtype=float) ** (-1.0 / (4.0 * i * (i + 1.0)))


def isotropic_schedule(d: int) -> Callable[[int], np.ndarray]:
    """eps_i = N^(-1/(2d)) in every dimension."""
    return lambda n: np.full(d, float(n) ** (-1.0 / (2.0 * d)))


def phi_tail(eps) -> float:
    """1 - Phi(eps^(-1/2)): mass a product normal leaves outside the boxes
    |x_i| <= eps_i^(-1/2)."""
    eps = np.asarray(eps, dtype=float)
    inside = erf(eps ** -0.5 / math.sqrt(2.0))
    return float(1.0 - np.prod(inside))


@lru_cache(maxsize=None)
def _gauss_derivative_sup(order: int) -> float:
    """sup_x |d^order/dx^order (exp(-x^2)/sqrt(pi))| via the Hermite form."""
    x = np.linspace(-(math.sqrt(2.0 * order) + 6.0), math.sqrt(2.0 * order) + 6.0, 40001)
    coeffs = np.zeros(order + 1)
    coeffs[order] = 1.0
    h = np.polynomial.hermite.hermval(x, coeffs)
    return float(np.max(np.abs(h * np.exp(-x * x))) / SQRT_PI)


def kernel_sup_norm(k: int, d: int) -> float:
    """||B_{1,0}||_{inf,k}: max mixed-derivative sup of the unit product kernel."""
    best = max(_gauss_derivative_sup(a) for a in range(k + 1))
    return best ** d


def theorem1_bound(profile: AnisotropyProfile, n_basis: int, k: int, d: int) -> float:
    """Computable skeleton of the anisotropic approximation bound (constant = 1).

    Trend instrument only: mollification term + normal-tail term +
    sparse-grid interpolation term.
    """
    if k < 1:
        raise ValueError("smoothness order k must be >= 1")
    eps = np.asarray(profile.scales_for(n_basis), dtype=float)
    if eps.shape != (d,):
        raise ValueError("schedule returned wrong dimension")
    if np.any((eps <= 0) | (eps >= 1)):
        raise ValueError("schedule scales must lie in (0, 1)")
    moll = float(np.sum(np.sqrt(eps) * np.asarray(profile.deriv_norms, dtype=float)))
    tail = 2.0 * profile.sup_norm * phi_tail(eps)
    interp = (float(np.prod(eps ** (-k))) * 2.0 ** (d + 2 * k)
              * n_basis ** (-k / 2.0)
              * math.log(n_basis) ** ((k + 2) * (d - 1) + 1)
              * profile.sobolev_norm * kernel_sup_norm(k, d))
    return moll + tail + interp
