"""Kinetic swarming benchmark: Morse interaction, convolution force, operator."""

import numpy as np
import pytest

from rbflow.problems import VlasovSwarm, morse_potential, morse_potential_grad
from rbflow.problems.vlasov import ALPHA, BETA, C_ATTRACT, C_REPEL, SCALE_FLOOR
from rbflow.rbf import RbfState, ScaleMap, rbf_eval, rbf_grad
from rbflow.rng import substream

FLOOR_MAP = ScaleMap(floor=SCALE_FLOOR)


def vlasov_state(rng, n_basis, coeff_scale=1.0):
    coeffs = coeff_scale * rng.uniform(0.2, 1.0, size=(1, n_basis))
    centers = rng.uniform(-1.0, 1.0, size=(n_basis, 4))
    scales = rng.uniform(0.6, 1.8, size=(n_basis, 4))
    return RbfState.from_scales(coeffs, centers, scales, FLOOR_MAP)


class TestMorse:
    def test_value_at_origin(self):
        assert morse_potential(0.0) == pytest.approx(-C_ATTRACT + C_REPEL, abs=1e-14)
        assert morse_potential(0.0) == 16.0

    def test_gradient_antisymmetric(self, rng):
        for _ in range(10):
            r = rng.uniform(-2, 2, 2)
            assert np.allclose(morse_potential_grad(r), -morse_potential_grad(-r),
                               atol=1e-14)

    def test_gradient_zero_at_origin(self):
        assert np.array_equal(morse_potential_grad(np.zeros(2)), np.zeros(2))

    def test_gradient_magnitude_matches_fd_at_r1(self):
        h = 1e-7
        expect = (morse_potential(1.0 + h) - morse_potential(1.0 - h)) / (2 * h)
        got = morse_potential_grad(np.array([1.0, 0.0]))
        assert got[0] == pytest.approx(expect, abs=1e-8)
        assert got[1] == 0.0

    def test_gradient_radial_direction(self, rng):
        for _ in range(10):
            r = rng.uniform(-2, 2, 2)
            g = morse_potential_grad(r)
            # grad is parallel to r
            assert abs(g[0] * r[1] - g[1] * r[0]) < 1e-12


class TestForceField:
    def test_zero_coefficients_zero_force(self, rng):
        prob = VlasovSwarm()
        st = vlasov_state(rng, 4, coeff_scale=0.0)
        pts = rng.uniform(-1, 1, size=(6, 2))
        assert np.allclose(prob.force_field(st, pts), 0.0, atol=1e-16)

    def test_far_field_decay_envelope(self):
        """Far from all mass the force decays like the attractive exponential."""
        prob = VlasovSwarm(quad_order=10)
        st = RbfState.from_scales([[1.0]], np.zeros((1, 4)), np.ones((1, 4)), FLOOR_MAP)
        for dist in (8.0, 10.0, 12.0):
            f = prob.force_field(st, np.array([[dist, 0.0]]))[0]
            envelope = (C_ATTRACT / 3.0) * np.exp(-(dist - 4.0) / 3.0)
            assert np.linalg.norm(f) <= envelope

    def test_single_basis_force_vs_dense_trapezoid(self):
        """Brute-force convolution on [-8, 8]^2, rel err <= 1e-4."""
        prob = VlasovSwarm(quad_order=40)
        rng = substream(17, "force")
        c = float(rng.uniform(0.5, 1.5))
        center = rng.uniform(-0.5, 0.5, 4)
        scales = rng.uniform(0.8, 1.5, 4)
        st = RbfState.from_scales([[c]], center[None, :], scales[None, :], FLOOR_MAP)
        x = rng.uniform(-0.5, 0.5, 2)

        n_grid = 1601
        ax = np.linspace(-8.0, 8.0, n_grid)
        hstep = ax[1] - ax[0]
        yy1, yy2 = np.meshgrid(ax, ax, indexing="ij")
        ys = np.stack([yy1.ravel(), yy2.ravel()], axis=1)
        grad_u = morse_potential_grad(ys)                               # (G, 2)
        diff = x[None, :] - ys
        e = scales[:2]
        rho = c * np.prod(e / np.sqrt(np.pi)) * np.exp(
            -((e[0] * (diff[:, 0] - center[0])) ** 2
              + (e[1] * (diff[:, 1] - center[1])) ** 2))
        brute = hstep**2 * (grad_u * rho[:, None]).sum(axis=0)

        got = prob.force_field(st, x[None, :])[0]
        assert np.allclose(got, brute, rtol=1e-4, atol=1e-6)

    def test_translation_equivariance(self, rng):
        """Shifting all spatial centers shifts the force field, tol 1e-8."""
        prob = VlasovSwarm(quad_order=12)
        st = vlasov_state(rng, 5)
        shift = np.array([0.6, -0.4])
        shifted = st.copy()
        shifted.centers[:, :2] += shift
        pts = rng.uniform(-1, 1, size=(7, 2))
        f0 = prob.force_field(st, pts)
        f1 = prob.force_field(shifted, pts + shift)
        assert np.allclose(f0, f1, atol=1e-8)

    def test_quad_order_guard(self):
        with pytest.raises(ValueError):
            VlasovSwarm(quad_order=1)


class TestOperator:
    def test_zero_state_zero(self, rng):
        prob = VlasovSwarm()
        st = vlasov_state(rng, 3, coeff_scale=0.0)
        xs = prob.sample_interior(rng, 8)
        assert np.allclose(prob.operator_values(st, xs, 0.0), 0.0, atol=1e-16)

    def test_matches_naive_assembly(self, rng):
        prob = VlasovSwarm(quad_order=8)
        st = vlasov_state(rng, 4)
        xs = prob.sample_interior(rng, 6)
        vals = prob.operator_values(st, xs, 0.0)
        force = prob.force_field(st, xs[:, :2])
        for p in range(6):
            u = rbf_eval(st, 0, xs[p])
            g = rbf_grad(st, 0, xs[p])
            v = xs[p, 2:]
            sp2 = float(v @ v)
            expect = (-(v[0] * g[0] + v[1] * g[1])
                      - ((ALPHA - BETA * sp2) * (v[0] * g[2] + v[1] * g[3])
                         + (2 * ALPHA - 4 * BETA * sp2) * u)
                      + force[p] @ g[2:])
            assert vals[p, 0] == pytest.approx(expect, rel=1e-12, abs=1e-14)

    def test_operator_vjp_matches_fd(self, rng):
        prob = VlasovSwarm(quad_order=6)
        st = vlasov_state(rng, 3)
        xs = prob.sample_interior(rng, 4)
        w = rng.standard_normal((4, 1))
        _, vjp = prob.operator_bundle(st, xs, 0.0)
        got = vjp(w)
        th = st.flatten()
        h = 1e-6
        fd = np.empty_like(th)
        for k in range(th.size):
            e = np.zeros_like(th)
            e[k] = h
            up = float((w * prob.operator_values(st.like(th + e), xs, 0.0)).sum())
            dn = float((w * prob.operator_values(st.like(th - e), xs, 0.0)).sum())
            fd[k] = (up - dn) / (2 * h)
        assert np.allclose(got, fd, rtol=2e-5, atol=1e-7)


class TestDiagnostics:
    def test_initial_condition_is_unit_mass_gaussian(self):
        prob = VlasovSwarm()
        # u0 is exactly one kernel: scales sqrt(2), center 0, coefficient 1
        st = RbfState.from_scales([[1.0]], np.zeros((1, 4)),
                                  np.full((1, 4), np.sqrt(2.0)), FLOOR_MAP)
        rng = substream(5, "ic-check")
        xs = prob.sample_interior(rng, 200)
        got = prob.initial(xs)[:, 0]
        expect = np.array([rbf_eval(st, 0, x) for x in xs])
        assert np.allclose(got, expect, rtol=1e-12, atol=1e-14)

    def test_weighted_velocity_of_drifting_gaussian(self):
        """A kernel centered at velocity (v1, v2) has that weighted velocity."""
        st = RbfState.from_scales([[0.8]], np.array([[0.3, -0.2, 0.5, -0.7]]),
                                  np.ones((1, 4)), FLOOR_MAP)
        pts = np.array([[0.3, -0.2], [0.0, 0.0]])
        vel, ok = VlasovSwarm.weighted_velocity(st, pts)
        assert np.all(ok)
        assert np.allclose(vel, [[0.5, -0.7], [0.5, -0.7]], atol=1e-12)

    def test_angular_momentum_proxy_sign_of_rotation(self):
        """A rigidly rotating pair of kernels yields a positive proxy."""
        centers = np.array([[1.0, 0.0, 0.0, 1.0],      # at +x moving +y
                            [-1.0, 0.0, 0.0, -1.0]])   # at -x moving -y
        st = RbfState.from_scales([[1.0, 1.0]], centers, np.ones((2, 4)), FLOOR_MAP)
        ring = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        assert VlasovSwarm.angular_momentum_proxy(st, ring) > 0

    def test_sampling_law(self):
        prob = VlasovSwarm()
        rng = substream(6, "vl-sample")
        xs = prob.sample_interior(rng, 40_000)
        assert xs.shape == (40_000, 4)
        assert abs(xs.std() - 1.25) < 0.02
        assert np.all(prob.contains(xs))
