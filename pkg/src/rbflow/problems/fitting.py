"""Initial-condition fitting: project u(x, 0) onto an N-term expansion.

Centers come from the problem's initializer (Latin hypercube over bounded
domains, the sampling law on unbounded ones), scales start at the problem's
init value, coefficients are solved by linear least squares on a Monte Carlo
sample, and all parameters are then jointly refined with Adam on the same
mean-squared objective.  The reported error is the relative squared L2
mismatch on a fresh held-out sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..odeint import AdamState, adam_update
from ..rbf import KernelTables, RbfState, eval_fields, eval_fields_vjp, split_flat


def latin_hypercube(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """n stratified points in (0, 1)^d, one per row/column stratum."""
    u = rng.uniform(size=(n, d))
    out = np.empty((n, d))
    for j in range(d):
        out[:, j] = (rng.permutation(n) + u[:, j]) / n
    return out


@dataclass
class FitResult:
    state: RbfState
    rel_error: float          # relative squared L2 error on held-out points
    lstsq_error: float        # same metric right after the linear solve
    n_points: int


def _lstsq_coeffs(basis: np.ndarray, targets: np.ndarray, ridge: float = 1e-8) -> np.ndarray:
    """Per-field least squares; ridge fallback when the system is singular."""
    sol, _, rank, _ = np.linalg.lstsq(basis, targets, rcond=None)
    if rank < basis.shape[1]:
        gram = basis.T @ basis + ridge * np.eye(basis.shape[1])
        sol = np.linalg.solve(gram, basis.T @ targets)
    return sol.T                                       # (m, N)


def ic_fit(problem, n_basis: int, rng: np.random.Generator, n_points: int | None = None,
           refine_steps: int = 6000, refine_lr: float = 1e-2,
           centers: np.ndarray | None = None, scales: np.ndarray | None = None) -> FitResult:
    if n_basis < 1:
        raise ValueError("need at least one basis function")
    d, m = problem.dim, problem.n_fields
    n_pts = n_points or 10 * n_basis * (2 * d + 1)
    xs = problem.sample_interior(rng, n_pts)
    targets = problem.initial(xs)                      # (P, m)

    if centers is None:
        centers = problem.center_init(rng, n_basis)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if scales is None:
        scales = np.full((n_basis, d), float(problem.init_scale))
    scales = np.broadcast_to(np.asarray(scales, dtype=float), (n_basis, d))
    state = RbfState.from_scales(np.zeros((m, n_basis)), centers, scales, problem.scale_map)

    basis = KernelTables(state, xs).B                  # (P, N)
    state.coeffs[:] = _lstsq_coeffs(basis, targets)

    eval_xs = problem.sample_interior(rng, max(n_pts // 2, 256))
    eval_targets = problem.initial(eval_xs)

    def rel_err(st):
        diff = eval_fields(st, eval_xs) - eval_targets
        denom = float((eval_targets**2).sum())
        return float((diff**2).sum()) / max(denom, 1e-300)

    lstsq_error = rel_err(state)

    # Joint Adam refinement over coefficients, centers and raw scales, keeping
    # the best-seen point (Adam steps do not shrink with the gradient, so the
    # iterates wander at the lr scale once converged).
    theta = state.flatten()
    adam = AdamState(lr=refine_lr)
    arrs = [theta]
    best_loss, best_theta = np.inf, theta.copy()
    for _ in range(refine_steps):
        st = state.like(theta)
        tab = KernelTables(st, xs)
        resid = eval_fields(st, xs, tab) - targets
        loss = float((resid**2).sum()) / n_pts
        if loss < best_loss:
            best_loss, best_theta = loss, theta.copy()
        grad = eval_fields_vjp(tab, (2.0 / n_pts) * resid)
        adam_update(adam, arrs, [grad])
    refined = state.like(best_theta)
    # re-solve the (linear) coefficients at the refined centers and scales
    refined.coeffs[:] = _lstsq_coeffs(KernelTables(refined, xs).B, targets)

    final = rel_err(refined)
    if refine_steps > 0 and final > lstsq_error:
        refined, final = state, lstsq_error            # refinement never hurts
    return FitResult(refined, final, lstsq_error, n_pts)
