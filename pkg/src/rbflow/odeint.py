"""Fixed-step integration of the flat parameter vector and its exact adjoint.

Classical 4th-order Runge-Kutta, unrolled; gradients are obtained by
reverse-mode differentiation of the recorded stages (discretize-then-
optimize), so they are gradients of the *discrete* trajectory that the loss
actually sees.  Stage values are cached in memory: M steps keep 3 stage
vectors each, fine at desk scale.

Also home to the Adam optimizer used for all training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import Mlp, dynamics_input
from .rbf import RbfState


class IntegrationError(RuntimeError):
    """Non-finite state encountered; carries the failing step index."""

    def __init__(self, step_index: int):
        super().__init__(f"non-finite state after integrator step {step_index}")
        self.step_index = step_index


@dataclass(frozen=True)
class IntegrationGrid:
    t0: float
    dt: float
    n_steps: int
    scheme: str = "rk4"

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if self.scheme != "rk4":
            raise ValueError(f"unsupported scheme {self.scheme!r}")

    @classmethod
    def from_horizon(cls, horizon: float, dt: float, t0: float = 0.0) -> "IntegrationGrid":
        n = int(round((horizon - t0) / dt))
        grid = cls(t0, dt, n)
        if abs(grid.t0 + n * dt - horizon) > 1e-12:
            raise ValueError(f"horizon {horizon} is not an integer number of steps of {dt}")
        return grid

    @property
    def horizon(self) -> float:
        return self.t0 + self.n_steps * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    def halved(self) -> "IntegrationGrid":
        return IntegrationGrid(self.t0, self.dt / 2.0, self.n_steps * 2, self.scheme)


@dataclass
class Trajectory:
    """Snapshots theta(t_j), j = 0..M, plus the stage cache for the adjoint."""

    flat: np.ndarray                 # (M+1, n_params)
    grid: IntegrationGrid
    template: RbfState               # shape and scale-map carrier
    stages: np.ndarray | None = field(default=None, repr=False)   # (M, 3, n_params)

    def state(self, j: int) -> RbfState:
        return self.template.like(self.flat[j])

    @property
    def states(self) -> list[RbfState]:
        return [self.state(j) for j in range(self.flat.shape[0])]

    @property
    def n_snapshots(self) -> int:
        return self.flat.shape[0]


def rk4_path(f, y0: np.ndarray, grid: IntegrationGrid):
    """Unrolled RK4 for dy/dt = f(y, t); returns ((M+1, n) states, (M, 3, n) stages).

    Raises IntegrationError at the first non-finite step.
    """
    y = np.asarray(y0, dtype=float).copy()
    n = y.size
    out = np.empty((grid.n_steps + 1, n))
    stages = np.empty((grid.n_steps, 3, n))
    out[0] = y
    dt = grid.dt
    for j in range(grid.n_steps):
        t = grid.t0 + j * dt
        k1 = f(y, t)
        k2 = f(y + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = f(y + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = f(y + dt * k3, t + dt)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(j)
        out[j + 1] = y
        stages[j, 0] = k1
        stages[j, 1] = k2
        stages[j, 2] = k3
    return out, stages


def _net_dynamics(net: Mlp, extra: np.ndarray | None, mask: np.ndarray | None):
    def f(y, t):
        dot = net.forward(dynamics_input(y, t, extra))
        return dot * mask if mask is not None else dot
    return f


def integrate(net: Mlp, initial: RbfState, grid: IntegrationGrid,
              extra: np.ndarray | None = None, mask: np.ndarray | None = None) -> Trajectory:
    """Evolve the expansion parameters under the network's velocity field.

    ``mask`` (0/1 per flat slot) freezes parameter groups; the non-adaptive
    baseline masks centers and scales so only coefficients move.
    """
    initial.check_finite()
    flat, stages = rk4_path(_net_dynamics(net, extra, mask), initial.flatten(), grid)
    return Trajectory(flat, grid, initial, stages)


def integrate_backward(net: Mlp, traj: Trajectory, cotangents,
                       extra: np.ndarray | None = None, mask: np.ndarray | None = None):
    """Exact reverse sweep through the recorded RK4 stages.

    ``cotangents`` holds dL/dtheta_j for every snapshot (list or (M+1, n)
    array) of any loss that is a sum of per-snapshot terms.  Returns
    (net parameter gradients, gradient w.r.t. the initial flat state).
    """
    if traj.stages is None:
        raise ValueError("trajectory carries no stage cache; integrate() it first")
    lam = np.asarray(cotangents, dtype=float)
    if lam.shape != traj.flat.shape:
        raise ValueError(f"cotangent shape {lam.shape} != snapshots {traj.flat.shape}")
    dt = traj.grid.dt
    n_state = traj.flat.shape[1]
    grads = net.zero_grads()

    def vjp(y, t, w):
        if mask is not None:
            w = w * mask
        g, xbar = net.backward(dynamics_input(y, t, extra), w)
        for acc, gi in zip(grads, g):
            acc += gi
        return xbar[:n_state]

    ybar = lam[-1].copy()
    for j in range(traj.grid.n_steps - 1, -1, -1):
        t = traj.grid.t0 + j * dt
        y = traj.flat[j]
        k1, k2, k3 = traj.stages[j]
        a2 = y + 0.5 * dt * k1
        a3 = y + 0.5 * dt * k2
        a4 = y + dt * k3
        kb1 = (dt / 6.0) * ybar
        kb2 = (dt / 3.0) * ybar
        kb3 = (dt / 3.0) * ybar
        kb4 = (dt / 6.0) * ybar
        abar4 = vjp(a4, t + dt, kb4)
        kb3 = kb3 + dt * abar4
        abar3 = vjp(a3, t + 0.5 * dt, kb3)
        kb2 = kb2 + 0.5 * dt * abar3
        abar2 = vjp(a2, t + 0.5 * dt, kb2)
        kb1 = kb1 + 0.5 * dt * abar2
        abar1 = vjp(y, t, kb1)
        ybar = ybar + abar1 + abar2 + abar3 + abar4 + lam[j]
    return grads, ybar


def integrate_jvp(net: Mlp, traj: Trajectory, dparams: list[np.ndarray] | None = None,
                  dy0: np.ndarray | None = None, extra: np.ndarray | None = None,
                  mask: np.ndarray | None = None) -> np.ndarray:
    """Exact forward tangent of every snapshot w.r.t. net parameters / theta_0.

    The tangent of the discrete RK4 map is RK4 applied to the linearized
    stage system, using the recorded primal stages.  Used by adjoint
    consistency tests.
    """
    if traj.stages is None:
        raise ValueError("trajectory carries no stage cache")
    dt = traj.grid.dt
    n = traj.flat.shape[1]
    dy = np.zeros(n) if dy0 is None else np.asarray(dy0, dtype=float).copy()
    out = np.empty_like(traj.flat)
    out[0] = dy

    def jvp(y, t, v):
        dx = np.zeros(net.n_in)
        dx[:n] = v
        d = net.jvp(dynamics_input(y, t, extra), dx=dx, dparams=dparams)
        return d * mask if mask is not None else d

    for j in range(traj.grid.n_steps):
        t = traj.grid.t0 + j * dt
        y = traj.flat[j]
        k1, k2, k3 = traj.stages[j]
        dk1 = jvp(y, t, dy)
        dk2 = jvp(y + 0.5 * dt * k1, t + 0.5 * dt, dy + 0.5 * dt * dk1)
        dk3 = jvp(y + 0.5 * dt * k2, t + 0.5 * dt, dy + 0.5 * dt * dk2)
        dk4 = jvp(y + dt * k3, t + dt, dy + dt * dk3)
        dy = dy + (dt / 6.0) * (dk1 + 2.0 * dk2 + 2.0 * dk3 + dk4)
        out[j + 1] = dy
    return out


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] | None = None
    v: list[np.ndarray] | None = None


def adam_update(adam: AdamState, params: list[np.ndarray], grads: list[np.ndarray]):
    """One bias-corrected Adam step, in place; returns (params, adam)."""
    if adam.m is None:
        adam.m = [np.zeros_like(p) for p in params]
        adam.v = [np.zeros_like(p) for p in params]
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise ValueError("gradient shapes do not match parameters")
    adam.step += 1
    b1, b2 = adam.beta1, adam.beta2
    c1 = 1.0 - b1 ** adam.step
    c2 = 1.0 - b2 ** adam.step
    for p, g, m, v in zip(params, grads, adam.m, adam.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= adam.lr * (m / c1) / (np.sqrt(v / c2) + adam.eps)
    return params, adam
