"""Burgers benchmark: series oracle structure, residual, operator nonlinearity."""

import numpy as np
import pytest

from rbflow.problems import Burgers2D, BurgersSeries, analytic_example2
from rbflow.problems.burgers import SeriesError
from rbflow.rng import substream

from conftest import random_state


@pytest.fixture(scope="module")
def series():
    return BurgersSeries(mu=0.1, trunc=24)


class TestSeriesOracle:
    def test_dirichlet_structure_u_on_x1_walls(self, series):
        ys = np.array([[0.0, 0.3], [1.0, 0.8], [0.0, 0.05], [1.0, 0.5]])
        for t in (0.0, 0.2, 1.0):
            vals = series.evaluate(ys, t)
            assert np.allclose(vals[:, 0], 0.0, atol=1e-12)

    def test_dirichlet_structure_v_on_x2_walls(self, series):
        ys = np.array([[0.3, 0.0], [0.8, 1.0], [0.05, 0.0], [0.5, 1.0]])
        for t in (0.0, 0.2, 1.0):
            vals = series.evaluate(ys, t)
            assert np.allclose(vals[:, 1], 0.0, atol=1e-12)

    def test_long_time_decay_to_zero(self, series):
        pts = np.array([[0.25, 0.5], [0.7, 0.3], [0.5, 0.5]])
        vals = series.evaluate(pts, 30.0)
        assert np.max(np.abs(vals)) < 1e-6

    def test_initial_condition_matches_closed_form(self, series):
        """The t=0 series reproduces sin cos / cos sin up to truncation."""
        rng = substream(2, "ic")
        pts = rng.uniform(0.05, 0.95, size=(40, 2))
        got = series.evaluate(pts, 0.0)
        expect = np.stack([np.sin(np.pi * pts[:, 0]) * np.cos(np.pi * pts[:, 1]),
                           np.cos(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])], axis=1)
        assert np.allclose(got, expect, atol=5e-8)

    def test_quadrature_refinement_agreement(self):
        """Two independent quadrature resolutions agree to 1e-8 at (0.25, 0.5, 0.1)."""
        coarse = BurgersSeries(0.1, 24, quad_points=64)
        fine = BurgersSeries(0.1, 24, quad_points=96)
        p = np.array([[0.25, 0.5]])
        a = coarse.evaluate(p, 0.1)
        b = fine.evaluate(p, 0.1)
        assert np.allclose(a, b, atol=1e-8)

    def test_truncation_gap_below_1e8_for_default(self, series):
        assert series.truncation_gap(probe_t=0.1) <= 1e-8

    def test_single_point_wrapper(self, series):
        got = analytic_example2(np.array([0.25, 0.5]), 0.1)
        assert got.shape == (2,)
        assert np.allclose(got, series.evaluate(np.array([[0.25, 0.5]]), 0.1)[0])

    def test_denominator_guard(self):
        """A tiny-viscosity series at crafted points can collapse the denominator;
        the guard must raise rather than divide."""
        srs = BurgersSeries(0.1, 4)
        srs.C = np.zeros_like(srs.C)                 # force an ill-conditioned series
        with pytest.raises(SeriesError):
            srs.evaluate(np.array([[0.5, 0.5]]), 0.1)

    def test_pde_residual_of_series(self):
        """d_t u + u u_x1 + v u_x2 - mu lap u = 0 (both fields), all-FD, <= 1e-4."""
        srs = BurgersSeries(0.1, 24)
        rng = substream(3, "resid")
        ht, hx = 1e-4, 1e-4
        worst = 0.0
        for _ in range(100):
            x = rng.uniform(0.05, 0.95, 2)
            t = float(rng.uniform(0.1, 1.0))

            def f(pt, tt):
                return srs.evaluate(np.asarray(pt)[None, :], tt)[0]

            val = f(x, t)
            dudt = (f(x, t + ht) - f(x, t - ht)) / (2 * ht)
            e1, e2 = np.array([hx, 0.0]), np.array([0.0, hx])
            d1 = (f(x + e1, t) - f(x - e1, t)) / (2 * hx)
            d2 = (f(x + e2, t) - f(x - e2, t)) / (2 * hx)
            lap = ((f(x + e1, t) - 2 * val + f(x - e1, t)) / hx**2
                   + (f(x + e2, t) - 2 * val + f(x - e2, t)) / hx**2)
            resid = dudt + val[0] * d1 + val[1] * d2 - 0.1 * lap
            worst = max(worst, float(np.max(np.abs(resid))))
        assert worst <= 1e-4


class TestBurgersProblem:
    def test_sampling_membership(self):
        prob = Burgers2D()
        rng = substream(4, "bsample")
        xs = prob.sample_interior(rng, 10_000)
        assert np.all(prob.contains(xs))
        ys = prob.sample_boundary(rng, 10_000)
        assert np.all(prob.contains(ys))
        on_edge = (np.isclose(ys[:, 0], 0) | np.isclose(ys[:, 0], 1)
                   | np.isclose(ys[:, 1], 0) | np.isclose(ys[:, 1], 1))
        assert np.all(on_edge)

    def test_initial_condition_values(self):
        prob = Burgers2D()
        pts = np.array([[0.5, 0.0], [0.25, 0.25]])
        got = prob.initial(pts)
        assert got[0] == pytest.approx([1.0, 0.0], abs=1e-15)
        assert got[1, 0] == pytest.approx(np.sin(np.pi / 4) * np.cos(np.pi / 4), rel=1e-14)

    def test_zero_state_operator_zero(self, rng):
        prob = Burgers2D()
        st = random_state(rng, 4, 2, n_fields=2, coeff_scale=0.0)
        xs = prob.sample_interior(rng, 10)
        assert np.allclose(prob.operator_values(st, xs, 0.5), 0.0, atol=1e-16)

    def test_quadratic_advection_not_homogeneous(self, rng):
        prob = Burgers2D()
        st = random_state(rng, 4, 2, n_fields=2)
        st2 = st.like(st.flatten())
        st2.coeffs *= 2.0
        xs = prob.sample_interior(rng, 10)
        v1 = prob.operator_values(st, xs, 0.5)
        v2 = prob.operator_values(st2, xs, 0.5)
        assert not np.allclose(v2, 2.0 * v1, rtol=1e-3)

    def test_operator_matches_naive_assembly(self, rng):
        from rbflow.rbf import rbf_eval, rbf_grad, rbf_laplacian_diag
        prob = Burgers2D()
        st = random_state(rng, 3, 2, n_fields=2)
        xs = prob.sample_interior(rng, 6)
        vals = prob.operator_values(st, xs, 0.2)
        for p in range(6):
            u = rbf_eval(st, 0, xs[p])
            v = rbf_eval(st, 1, xs[p])
            for f in range(2):
                g = rbf_grad(st, f, xs[p])
                lap = rbf_laplacian_diag(st, f, xs[p]).sum()
                expect = -u * g[0] - v * g[1] + 0.1 * lap
                assert vals[p, f] == pytest.approx(expect, rel=1e-12, abs=1e-14)

    def test_operator_vjp_matches_fd(self, rng):
        prob = Burgers2D()
        st = random_state(rng, 3, 2, n_fields=2)
        xs = prob.sample_interior(rng, 5)
        w = rng.standard_normal((5, 2))
        _, vjp = prob.operator_bundle(st, xs, 0.4)
        got = vjp(w)
        th = st.flatten()
        h = 1e-6
        fd = np.empty_like(th)
        for k in range(th.size):
            e = np.zeros_like(th)
            e[k] = h
            up = float((w * prob.operator_values(st.like(th + e), xs, 0.4)).sum())
            dn = float((w * prob.operator_values(st.like(th - e), xs, 0.4)).sum())
            fd[k] = (up - dn) / (2 * h)
        assert np.allclose(got, fd, rtol=1e-5, atol=1e-7)

    def test_truncation_precondition(self):
        with pytest.raises(ValueError):
            BurgersSeries(0.1, 0)
