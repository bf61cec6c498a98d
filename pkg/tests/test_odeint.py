"""Integrator order, exact discrete adjoints, Adam, and determinism."""

import numpy as np
import pytest

from rbflow.dynamics import Mlp, net_widths
from rbflow.odeint import (AdamState, IntegrationError, IntegrationGrid,
                           adam_update, integrate, integrate_backward,
                           integrate_jvp, rk4_path)
from rbflow.rng import substream
from rbflow.training import adaptivity_mask

from conftest import random_state


class TestGrid:
    def test_horizon_round_trip(self):
        grid = IntegrationGrid.from_horizon(2.0, 0.05)
        assert grid.n_steps == 40
        assert abs(grid.t0 + grid.n_steps * grid.dt - 2.0) <= 1e-12
        grid3 = IntegrationGrid.from_horizon(12.0, 0.15)
        assert grid3.n_steps == 80

    def test_bad_horizon_rejected(self):
        with pytest.raises(ValueError):
            IntegrationGrid.from_horizon(1.0, 0.03)

    def test_only_rk4(self):
        with pytest.raises(ValueError):
            IntegrationGrid(0.0, 0.1, 10, scheme="euler")

    def test_halved(self):
        g = IntegrationGrid.from_horizon(1.0, 0.1)
        h = g.halved()
        assert h.n_steps == 2 * g.n_steps
        assert h.horizon == pytest.approx(g.horizon, abs=1e-15)


class TestRk4:
    def test_exponential_value(self):
        """dy/dt = y, dt=0.1, 10 steps: the RK4 value and its defect from e."""
        ys, _ = rk4_path(lambda y, t: y, np.array([1.0]), IntegrationGrid(0.0, 0.1, 10))
        got = float(ys[-1, 0])
        # independent oracle: the per-step quartic growth factor, multiplied out
        factor = 1 + 0.1 + 0.1**2 / 2 + 0.1**3 / 6 + 0.1**4 / 24
        assert got == pytest.approx(factor**10, rel=1e-15)
        assert got == pytest.approx(2.718279744, abs=5e-10)
        assert abs(got - np.e) == pytest.approx(2.08e-6, rel=0.05)

    def test_fourth_order_convergence(self):
        """Halving dt cuts the exponential-test error by about 16x."""
        errs = []
        for dt in (0.1, 0.05, 0.025):
            grid = IntegrationGrid.from_horizon(1.0, dt)
            ys, _ = rk4_path(lambda y, t: y, np.array([1.0]), grid)
            errs.append(abs(float(ys[-1, 0]) - np.e))
        rates = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert all(abs(r - 4.0) < 0.1 for r in rates)

    def test_nonfinite_raises_with_step_index(self):
        def blow_up(y, t):
            with np.errstate(over="ignore", invalid="ignore"):
                return y * y * 1e4

        with pytest.raises(IntegrationError) as err:
            with np.errstate(over="ignore", invalid="ignore"):
                rk4_path(blow_up, np.array([10.0]), IntegrationGrid(0.0, 0.5, 50))
        assert 0 <= err.value.step_index < 50


def tiny_setup(seed=3, n_basis=2, dim=1, hidden=1, width=8, steps=3, sigma=0.4,
               resnet=True):
    rng = substream(seed, "tiny")
    st = random_state(rng, n_basis, dim)
    net = Mlp.initialize(net_widths(st.n_params, hidden, width), resnet, sigma, rng)
    grid = IntegrationGrid(0.0, 0.1, steps)
    return st, net, grid, rng


class TestIntegrate:
    def test_zero_net_constant_trajectory(self, rng):
        st = random_state(rng, 3, 2)
        net = Mlp.initialize(net_widths(st.n_params, 1, 6), False, 0.1, rng)
        for p in net.params:
            p[:] = 0.0
        traj = integrate(net, st, IntegrationGrid(0.0, 0.1, 7))
        assert np.all(traj.flat == traj.flat[0])
        assert np.array_equal(traj.flat[0], st.flatten())

    def test_snapshot_zero_is_initial_state(self):
        st, net, grid, _ = tiny_setup()
        traj = integrate(net, st, grid)
        assert np.array_equal(traj.flat[0], st.flatten())
        assert traj.n_snapshots == grid.n_steps + 1
        s0 = traj.state(0)
        assert np.array_equal(s0.coeffs, st.coeffs)

    def test_deterministic_bit_identical(self):
        st, net, grid, _ = tiny_setup()
        a = integrate(net, st, grid)
        b = integrate(net, st, grid)
        assert np.array_equal(a.flat, b.flat)

    def test_mask_freezes_centers_and_scales_bit_identical(self):
        st, net, grid, _ = tiny_setup(sigma=0.8)
        mask = adaptivity_mask(st.n_basis, st.dim, st.n_fields, adaptive=False)
        traj = integrate(net, st, grid, mask=mask)
        n_c = st.n_fields * st.n_basis
        for j in range(1, traj.n_snapshots):
            assert np.array_equal(traj.flat[j, n_c:], traj.flat[0, n_c:])
        assert not np.array_equal(traj.flat[-1, :n_c], traj.flat[0, :n_c])


class TestIntegrateBackward:
    def test_zero_cotangents(self):
        st, net, grid, _ = tiny_setup()
        traj = integrate(net, st, grid)
        grads, y0bar = integrate_backward(net, traj, np.zeros_like(traj.flat))
        assert all(np.all(g == 0) for g in grads)
        assert np.all(y0bar == 0)

    def test_matches_finite_differences_over_all_net_params(self):
        """Tiny instance (N=2, d=1, 1 hidden layer, M=3), rel err <= 1e-4."""
        st, net, grid, rng = tiny_setup()
        lam = rng.standard_normal((grid.n_steps + 1, st.n_params))

        def scalar_loss() -> float:
            traj = integrate(net, st, grid)
            return float((lam * traj.flat).sum())

        traj = integrate(net, st, grid)
        grads, _ = integrate_backward(net, traj, lam)
        h = 1e-6
        for pi, p in enumerate(net.params):
            flat = p.ravel()
            gflat = grads[pi].ravel()
            for k in range(flat.size):
                keep = flat[k]
                flat[k] = keep + h
                up = scalar_loss()
                flat[k] = keep - h
                dn = scalar_loss()
                flat[k] = keep
                fd = (up - dn) / (2 * h)
                assert gflat[k] == pytest.approx(fd, rel=1e-4, abs=1e-7)

    def test_initial_state_gradient_matches_fd(self):
        st, net, grid, rng = tiny_setup()
        lam = rng.standard_normal((grid.n_steps + 1, st.n_params))
        traj = integrate(net, st, grid)
        _, y0bar = integrate_backward(net, traj, lam)
        h = 1e-6
        th0 = st.flatten()
        for k in range(th0.size):
            e = np.zeros_like(th0)
            e[k] = h
            up = float((lam * integrate(net, st.like(th0 + e), grid).flat).sum())
            dn = float((lam * integrate(net, st.like(th0 - e), grid).flat).sum())
            assert y0bar[k] == pytest.approx((up - dn) / (2 * h), rel=1e-5, abs=1e-7)

    def test_final_snapshot_only_equals_zeroed_intermediates(self):
        st, net, grid, rng = tiny_setup()
        traj = integrate(net, st, grid)
        w = rng.standard_normal(st.n_params)
        lam = np.zeros_like(traj.flat)
        lam[-1] = w
        g_full, _ = integrate_backward(net, traj, lam)
        g_final, _ = integrate_backward(net, traj, lam.copy())
        for a, b in zip(g_full, g_final):
            assert np.array_equal(a, b)

    def test_missing_stage_cache_rejected(self):
        st, net, grid, _ = tiny_setup()
        traj = integrate(net, st, grid)
        traj.stages = None
        with pytest.raises(ValueError):
            integrate_backward(net, traj, np.zeros((grid.n_steps + 1, st.n_params)))

    @pytest.mark.parametrize("use_mask", [False, True])
    def test_adjoint_consistency_dot_product(self, use_mask):
        """<lambda, T v> == <T^T lambda, v> through the full unrolled sweep,
        with exact forward tangents; rel tol 1e-8."""
        st, net, grid, rng = tiny_setup(steps=4)
        mask = adaptivity_mask(st.n_basis, st.dim, st.n_fields, False) if use_mask else None
        traj = integrate(net, st, grid, mask=mask)
        for trial in range(5):
            dparams = [rng.standard_normal(p.shape) for p in net.params]
            lam = rng.standard_normal(traj.flat.shape)
            tangents = integrate_jvp(net, traj, dparams=dparams, mask=mask)
            lhs = float((lam * tangents).sum())
            grads, _ = integrate_backward(net, traj, lam, mask=mask)
            rhs = sum(float((g * dp).sum()) for g, dp in zip(grads, dparams))
            assert lhs == pytest.approx(rhs, rel=1e-8)


class TestAdam:
    def test_zero_gradient_keeps_parameters(self):
        params = [np.array([1.0, -2.0]), np.array([[3.0]])]
        adam = AdamState(lr=0.1)
        adam_update(adam, params, [np.zeros(2), np.zeros((1, 1))])
        assert np.array_equal(params[0], [1.0, -2.0])
        assert adam.step == 1

    def test_first_step_is_minus_lr(self):
        # g=1 at step 1: update = -lr * 1 / (1 + eps)
        params = [np.array([0.0])]
        adam = AdamState(lr=0.01)
        adam_update(adam, params, [np.array([1.0])])
        assert params[0][0] == pytest.approx(-0.01 / (1 + 1e-8), rel=1e-12)

    def test_constant_gradient_monotone_motion(self):
        params = [np.array([0.0])]
        adam = AdamState(lr=0.05)
        history = [0.0]
        for _ in range(20):
            adam_update(adam, params, [np.array([2.5])])
            history.append(float(params[0][0]))
        diffs = np.diff(history)
        assert np.all(diffs < 0)

    def test_scalar_simulation_oracle(self):
        """Mirror the update recurrence with explicit scalars."""
        params = [np.array([0.3])]
        adam = AdamState(lr=0.02)
        m = v = 0.0
        x = 0.3
        for step in range(1, 8):
            g = np.sin(step * 1.0)
            adam_update(adam, params, [np.array([g])])
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            x -= 0.02 * (m / (1 - 0.9**step)) / (np.sqrt(v / (1 - 0.999**step)) + 1e-8)
            assert params[0][0] == pytest.approx(x, rel=1e-12)

    def test_shape_mismatch_rejected(self):
        adam = AdamState(lr=0.1)
        with pytest.raises(ValueError):
            adam_update(adam, [np.zeros(2)], [np.zeros(3)])
