"""Collocation losses, the training loop, and error metrics.

Per epoch: integrate the expansion parameters under the current network,
resample collocation points, assemble the Monte Carlo loss over all
snapshots, pull exact cotangents back through the recorded integrator stages
(plus the loss's direct dependence on the network through the flow
derivative), and take one Adam step.

Losses
  forward:  sum_j [ (1/N0) sum_i (A(u_N) - du_N/dt)^2
                    + (1/N1) sum_i (u - u_N)^2 on the boundary ] * dt
  inverse:  sum_j sum_i (u_N - u_obs)^2 * dt
  mass-regularized (no boundary): sum_j [ sum_i (A(u_N) - du_N/dt)^2
                    + lambda (mass(t_0) - mass(t_j))^2 ] * dt

where du_N/dt is the exact chain-rule flow derivative with velocities from
the network, and mass is the closed-form coefficient sum.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import Mlp, dynamics_input, net_widths
from .odeint import (AdamState, IntegrationError, IntegrationGrid, Trajectory,
                     adam_update, integrate, integrate_backward)
from .problems import Problem, ic_fit
from .rbf import (KernelTables, eval_fields, eval_fields_vjp, flow_derivative,
                  flow_derivative_vjp)
from .rng import substream


@dataclass
class TrainConfig:
    """Training hyperparameters; ``table_defaults`` reproduces the benchmark rows."""

    lr: float = 1e-3
    epochs: int = 2000
    dt: float = 0.05
    horizon: float = 2.0
    n_interior: int = 300
    n_boundary: int = 300
    n_basis: int = 30
    dim: int = 3
    hidden_layers: int = 3
    hidden_width: int = 100
    resnet: bool = True
    init_sigma: float = 1e-3
    mass_weight: float = 0.0
    seed: int = 0
    adaptive: bool = True
    ic_steps: int = 6000
    ic_lr: float = 1e-2
    eval_points: int = 4096
    quad_order: int = 8
    family_size: int = 50
    family_sigma_a: float = 0.05
    family_sigma_b: float = 0.05

    def __post_init__(self):
        for name in ("lr", "dt", "horizon", "init_sigma", "ic_lr"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("epochs", "n_interior", "n_boundary", "n_basis", "dim",
                     "hidden_layers", "hidden_width", "ic_steps", "eval_points",
                     "quad_order", "family_size"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @classmethod
    def table_defaults(cls, example: str, **overrides) -> "TrainConfig":
        rows = {
            "ex1": dict(lr=1e-3, epochs=2000, horizon=2.0, dt=0.05,
                        n_interior=300, n_boundary=300, hidden_layers=3,
                        hidden_width=100, resnet=True, init_sigma=1e-3,
                        n_basis=30, dim=3),
            "ex2": dict(lr=5e-3, epochs=400, horizon=1.0, dt=0.05,
                        n_interior=300, n_boundary=300, hidden_layers=2,
                        hidden_width=300, resnet=True, init_sigma=1e-3,
                        n_basis=16, dim=2),
            "ex3": dict(lr=2e-5, epochs=500, horizon=12.0, dt=0.15,
                        n_interior=300, n_boundary=0, hidden_layers=2,
                        hidden_width=200, resnet=True, init_sigma=5e-3,
                        n_basis=40, dim=4, mass_weight=2.0),
        }
        if example not in rows:
            raise KeyError(f"unknown benchmark row {example!r}")
        return cls(**{**rows[example], **overrides})


@dataclass
class MetricsReport:
    losses: np.ndarray
    errors: np.ndarray
    epoch_seconds: np.ndarray
    final_error: float
    metric_mode: str
    wall_seconds: float
    extras: dict = field(default_factory=dict)


def adaptivity_mask(n_basis: int, dim: int, n_fields: int, adaptive: bool) -> np.ndarray | None:
    """None when adaptive; otherwise 1 on coefficient slots, 0 on centers/scales."""
    if adaptive:
        return None
    mask = np.zeros(n_basis * (2 * dim + n_fields))
    mask[: n_fields * n_basis] = 1.0
    return mask


# ---------------------------------------------------------------------------
# losses: each returns (value, per-snapshot cotangents, direct net gradients)
# ---------------------------------------------------------------------------

def _masked_forward(net: Mlp, x_in: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    dot = net.forward(x_in)
    return dot * mask if mask is not None else dot


def _residual_snapshot(net, problem, traj, j, xs, tab, mask, weight):
    """PDE residual term at snapshot j: value, theta cotangent, net-output cotangent.

    weight multiplies the summed squared residual (dt, dt/N0, ...).
    """
    t = traj.grid.t0 + j * traj.grid.dt
    state = traj.state(j)
    a_vals, a_vjp = problem.operator_bundle(state, xs, t, tab)
    x_in = dynamics_input(traj.flat[j], t, problem.net_inputs)
    dot = _masked_forward(net, x_in, mask)
    ahat = flow_derivative(state, tab, dot)
    resid = a_vals - ahat
    value = weight * float((resid**2).sum())
    w = (2.0 * weight) * resid
    theta_bar = a_vjp(w)
    flow_theta, dot_bar = flow_derivative_vjp(state, tab, dot, -w)
    theta_bar += flow_theta
    if mask is not None:
        dot_bar = dot_bar * mask
    return value, theta_bar, dot_bar, x_in


def loss_forward(net: Mlp, problem: Problem, traj: Trajectory, rng: np.random.Generator,
                 n_interior: int, n_boundary: int, mask: np.ndarray | None = None):
    """Residual + boundary collocation loss; points resampled from ``rng``."""
    xs = problem.sample_interior(rng, n_interior)
    ys = problem.sample_boundary(rng, n_boundary)
    dt = traj.grid.dt
    lambdas = np.zeros_like(traj.flat)
    grads = net.zero_grads()
    loss = 0.0
    for j in range(1, traj.grid.n_steps + 1):
        state = traj.state(j)
        tab = KernelTables(state, xs)
        value, theta_bar, dot_bar, x_in = _residual_snapshot(
            net, problem, traj, j, xs, tab, mask, dt / n_interior)
        loss += value

        t = traj.grid.t0 + j * dt
        tab_b = KernelTables(state, ys)
        u_vals = eval_fields(state, ys, tab_b)
        b_vals = problem.boundary_values(ys, t)
        loss += (dt / n_boundary) * float(((b_vals - u_vals) ** 2).sum())
        theta_bar += eval_fields_vjp(tab_b, (2.0 * dt / n_boundary) * (u_vals - b_vals))

        g_j, x_bar = net.backward(x_in, dot_bar)
        for acc, g in zip(grads, g_j):
            acc += g
        lambdas[j] = theta_bar + x_bar[: traj.flat.shape[1]]
    return loss, lambdas, grads


def loss_inverse(net: Mlp, problem: Problem, traj: Trajectory, rng: np.random.Generator,
                 n_interior: int, mask: np.ndarray | None = None):
    """Trajectory-matching loss against observed data (the problem's oracle)."""
    xs = problem.sample_interior(rng, n_interior)
    dt = traj.grid.dt
    lambdas = np.zeros_like(traj.flat)
    loss = 0.0
    for j in range(1, traj.grid.n_steps + 1):
        t = traj.grid.t0 + j * dt
        state = traj.state(j)
        tab = KernelTables(state, xs)
        u_vals = eval_fields(state, xs, tab)
        obs = problem.oracle(xs, t)
        resid = u_vals - obs
        loss += dt * float((resid**2).sum())
        lambdas[j] = eval_fields_vjp(tab, (2.0 * dt) * resid)
    return loss, lambdas, net.zero_grads()


def loss_mass_regularized(net: Mlp, problem: Problem, traj: Trajectory,
                          rng: np.random.Generator, n_interior: int,
                          mass_weight: float, mask: np.ndarray | None = None):
    """PDE residual plus a penalty on total-mass drift (boundary-free problems)."""
    xs = problem.sample_interior(rng, n_interior)
    dt = traj.grid.dt
    n_coeff = problem.n_fields * traj.template.n_basis
    lambdas = np.zeros_like(traj.flat)
    grads = net.zero_grads()
    mass0 = float(traj.flat[0, :n_coeff].sum())
    loss = 0.0
    for j in range(1, traj.grid.n_steps + 1):
        state = traj.state(j)
        tab = KernelTables(state, xs)
        value, theta_bar, dot_bar, x_in = _residual_snapshot(
            net, problem, traj, j, xs, tab, mask, dt)
        loss += value

        drift = mass0 - float(traj.flat[j, :n_coeff].sum())
        loss += dt * mass_weight * drift * drift
        theta_bar[:n_coeff] += -2.0 * dt * mass_weight * drift
        lambdas[0, :n_coeff] += 2.0 * dt * mass_weight * drift

        g_j, x_bar = net.backward(x_in, dot_bar)
        for acc, g in zip(grads, g_j):
            acc += g
        lambdas[j] = theta_bar + x_bar[: traj.flat.shape[1]]
    return loss, lambdas, grads


loss_vlasov = loss_mass_regularized


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

class UndefinedMetricError(ArithmeticError):
    pass


def error_metrics(traj: Trajectory, oracle, mode: str, eval_points: np.ndarray,
                  t_index: int = -1) -> float:
    """Relative squared L2 error, Monte Carlo over a fixed evaluation set.

    ``at_time`` compares one snapshot (default the final one); ``time_averaged``
    dt-weights every snapshot j >= 1.
    """
    pts = np.atleast_2d(eval_points)
    if mode == "at_time":
        j = range(traj.n_snapshots)[t_index]
        t = traj.grid.t0 + j * traj.grid.dt
        diff = eval_fields(traj.state(j), pts) - oracle(pts, t)
        num = float((diff**2).sum())
        den = float((oracle(pts, t) ** 2).sum())
    elif mode == "time_averaged":
        num = den = 0.0
        for j in range(1, traj.n_snapshots):
            t = traj.grid.t0 + j * traj.grid.dt
            u = oracle(pts, t)
            diff = eval_fields(traj.state(j), pts) - u
            num += traj.grid.dt * float((diff**2).sum())
            den += traj.grid.dt * float((u**2).sum())
    else:
        raise ValueError(f"unknown metric mode {mode!r}")
    if den < 1e-14:
        raise UndefinedMetricError("oracle norm estimate vanishes; metric undefined")
    return num / den


def mass_drift(traj: Trajectory) -> np.ndarray:
    """|mass(t_j) - mass(t_0)| / |mass(t_0)| for every snapshot."""
    n_coeff = traj.template.n_fields * traj.template.n_basis
    masses = traj.flat[:, :n_coeff].sum(axis=1)
    return np.abs(masses - masses[0]) / max(abs(masses[0]), 1e-300)


def learned_operator_error(net: Mlp, traj: Trajectory, problem: Problem,
                           eval_points: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Relative squared mismatch between the reference operator and the learned
    flow derivative, dt-weighted along the trajectory."""
    pts = np.atleast_2d(eval_points)
    dt = traj.grid.dt
    num = den = 0.0
    for j in range(1, traj.n_snapshots):
        t = traj.grid.t0 + j * dt
        state = traj.state(j)
        tab = KernelTables(state, pts)
        a_vals = problem.operator_values(state, pts, t, tab)
        dot = _masked_forward(net, dynamics_input(traj.flat[j], t, problem.net_inputs), mask)
        ahat = flow_derivative(state, tab, dot)
        num += dt * float(((a_vals - ahat) ** 2).sum())
        den += dt * float((a_vals**2).sum())
    if den < 1e-14:
        raise UndefinedMetricError("operator norm estimate vanishes; metric undefined")
    return num / den


# ---------------------------------------------------------------------------
# training loops
# ---------------------------------------------------------------------------

def _loss_for(problem: Problem, config: TrainConfig, algorithm: str):
    if algorithm == "inverse":
        return lambda net, traj, rng, mask: loss_inverse(
            net, problem, traj, rng, config.n_interior, mask)
    if algorithm != "forward":
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if problem.has_boundary:
        return lambda net, traj, rng, mask: loss_forward(
            net, problem, traj, rng, config.n_interior, config.n_boundary, mask)
    return lambda net, traj, rng, mask: loss_mass_regularized(
        net, problem, traj, rng, config.n_interior, config.mass_weight, mask)


def _headline_error(problem, traj, eval_pts, net, mask, algorithm):
    if algorithm == "inverse":
        return learned_operator_error(net, traj, problem, eval_pts, mask)
    if problem.metric_mode == "mass":
        return float(mass_drift(traj).max())
    return error_metrics(traj, problem.oracle, problem.metric_mode, eval_pts)


def train(config: TrainConfig, problem: Problem, algorithm: str = "forward",
          init_state=None, progress=None):
    """Run the epoch loop; returns (net, final trajectory, MetricsReport).

    On an integrator blow-up the epoch is aborted and retried once with a
    halved time step (doubled step count); a second failure is fatal.
    """
    t_start = time.perf_counter()
    if init_state is None:
        fit = ic_fit(problem, config.n_basis, substream(config.seed, "ic-fit"),
                     refine_steps=config.ic_steps, refine_lr=config.ic_lr)
        init_state = fit.state
    theta0 = init_state

    n_extra = 0 if problem.net_inputs is None else len(problem.net_inputs)
    net = Mlp.initialize(
        net_widths(theta0.n_params, config.hidden_layers, config.hidden_width, n_extra),
        config.resnet, config.init_sigma, substream(config.seed, "net-init"))
    mask = adaptivity_mask(theta0.n_basis, theta0.dim, theta0.n_fields, config.adaptive)
    grid = IntegrationGrid.from_horizon(config.horizon, config.dt)
    adam = AdamState(lr=config.lr)
    loss_fn = _loss_for(problem, config, algorithm)
    eval_pts = problem.sample_eval(substream(config.seed, "eval-set"), config.eval_points)

    losses, errors, seconds = [], [], []
    halvings = 0
    epoch = 0
    while epoch < config.epochs:
        tic = time.perf_counter()
        try:
            traj = integrate(net, theta0, grid, problem.net_inputs, mask)
        except IntegrationError as err:
            if halvings >= 1:
                raise RuntimeError(
                    f"integration diverged again at step {err.step_index} "
                    f"(epoch {epoch}, dt {grid.dt}); aborting") from err
            halvings += 1
            grid = grid.halved()
            continue
        loss, lambdas, grads = loss_fn(net, traj, substream(config.seed, "resample", epoch), mask)
        g_traj, _ = integrate_backward(net, traj, lambdas, problem.net_inputs, mask)
        total = [a + b for a, b in zip(grads, g_traj)]
        adam_update(adam, net.params, total)
        losses.append(loss)
        errors.append(_headline_error(problem, traj, eval_pts, net, mask, algorithm))
        seconds.append(time.perf_counter() - tic)
        if progress is not None:
            progress(epoch, loss, errors[-1])
        epoch += 1

    final_traj = integrate(net, theta0, grid, problem.net_inputs, mask)
    final_error = _headline_error(problem, final_traj, eval_pts, net, mask, algorithm)
    report = MetricsReport(
        losses=np.asarray(losses), errors=np.asarray(errors),
        epoch_seconds=np.asarray(seconds), final_error=final_error,
        metric_mode=("operator" if algorithm == "inverse" else problem.metric_mode),
        wall_seconds=time.perf_counter() - t_start,
        extras={"dt_halvings": halvings, "grid_dt": grid.dt,
                "init_state": theta0, "eval_points": eval_pts})
    return net, final_traj, report


def train_family(config: TrainConfig, problems: list[Problem], progress=None):
    """One network for a family of problem instances (parameters as net inputs).

    The loss and its gradient are averaged over the instances each epoch.
    Returns (net, per-instance trajectories, MetricsReport).
    """
    t_start = time.perf_counter()
    if not problems:
        raise ValueError("family must contain at least one instance")
    n_extra = len(problems[0].net_inputs)
    states = []
    for k, prob in enumerate(problems):
        fit = ic_fit(prob, config.n_basis, substream(config.seed, "ic-fit", k),
                     refine_steps=config.ic_steps, refine_lr=config.ic_lr)
        states.append(fit.state)

    net = Mlp.initialize(
        net_widths(states[0].n_params, config.hidden_layers, config.hidden_width, n_extra),
        config.resnet, config.init_sigma, substream(config.seed, "net-init"))
    mask = adaptivity_mask(states[0].n_basis, states[0].dim, states[0].n_fields,
                           config.adaptive)
    grid = IntegrationGrid.from_horizon(config.horizon, config.dt)
    adam = AdamState(lr=config.lr)
    eval_sets = [p.sample_eval(substream(config.seed, "eval-set", k), config.eval_points)
                 for k, p in enumerate(problems)]

    losses, errors, seconds = [], [], []
    scale = 1.0 / len(problems)
    for epoch in range(config.epochs):
        tic = time.perf_counter()
        total_loss = 0.0
        total_grads = net.zero_grads()
        trajs = []
        for k, (prob, theta0) in enumerate(zip(problems, states)):
            traj = integrate(net, theta0, grid, prob.net_inputs, mask)
            trajs.append(traj)
            loss, lambdas, grads = loss_forward(
                net, prob, traj, substream(config.seed, "resample", epoch, k),
                config.n_interior, config.n_boundary, mask)
            g_traj, _ = integrate_backward(net, traj, lambdas, prob.net_inputs, mask)
            total_loss += scale * loss
            for acc, ga, gb in zip(total_grads, grads, g_traj):
                acc += scale * (ga + gb)
        adam_update(adam, net.params, total_grads)
        losses.append(total_loss)
        errors.append(float(np.mean([
            error_metrics(traj, prob.oracle, prob.metric_mode, pts)
            for traj, prob, pts in zip(trajs, problems, eval_sets)])))
        seconds.append(time.perf_counter() - tic)
        if progress is not None:
            progress(epoch, total_loss, errors[-1])

    final_trajs = [integrate(net, theta0, grid, prob.net_inputs, mask)
                   for prob, theta0 in zip(problems, states)]
    final_error = float(np.mean([
        error_metrics(traj, prob.oracle, prob.metric_mode, pts)
        for traj, prob, pts in zip(final_trajs, problems, eval_sets)]))
    report = MetricsReport(
        losses=np.asarray(losses), errors=np.asarray(errors),
        epoch_seconds=np.asarray(seconds), final_error=final_error,
        metric_mode="family_mean", wall_seconds=time.perf_counter() - t_start,
        extras={"init_states": states, "eval_sets": eval_sets})
    return net, final_trajs, report
