"""Knots, grids, Smolyak exactness, quadrature, and the bound skeleton."""

import itertools
import math

import numpy as np
import pytest

from rbflow.rng import substream
from rbflow.sparsegrid import (AnisotropyProfile, GaussianSurrogate, build_grid,
                               cc_knots, count, isotropic_schedule, kernel_sup_norm,
                               num_knots, paper_schedule, phi_tail,
                               rbf_quadrature_approx, smolyak_interpolate,
                               theorem1_bound)


class TestKnots:
    def test_level_1_convention(self):
        assert np.array_equal(cc_knots(1), [0.0])

    def test_level_2(self):
        assert np.array_equal(cc_knots(2), [-1.0, 0.0, 1.0])

    def test_level_3_cosine_table(self):
        exact = [-1.0, -math.cos(math.pi / 4), 0.0, math.cos(math.pi / 4), 1.0]
        assert np.allclose(cc_knots(3), exact, atol=1e-16)
        assert cc_knots(3)[1] == pytest.approx(-math.sqrt(2) / 2, abs=1e-15)

    def test_counts(self):
        assert [num_knots(i) for i in range(1, 6)] == [1, 3, 5, 9, 17]

    def test_nesting_is_exact(self):
        for i in range(1, 8):
            lo = set(cc_knots(i).tolist())
            hi = set(cc_knots(i + 1).tolist())
            assert lo <= hi                      # bit-exact containment

    def test_sorted_in_minus_one_one(self):
        for i in range(2, 9):
            k = cc_knots(i)
            assert np.all(np.diff(k) > 0)
            assert k[0] == -1.0 and k[-1] == 1.0


def brute_force_points(q, d):
    """Independent enumeration of the banded tensor-grid union."""
    pts = set()
    for idx in itertools.product(range(1, q + 1), repeat=d):
        if not q - d + 1 <= sum(idx) <= q:
            continue
        axes = [cc_knots(level).tolist() for level in idx]
        pts.update(itertools.product(*axes))
    return pts


class TestGrid:
    def test_count_minimal_level(self):
        for d in (1, 2, 3, 4):
            assert count(d, d) == 1
            assert np.array_equal(build_grid(d, d).points, np.zeros((1, d)))

    def test_count_level_plus_one(self):
        for d in (2, 3, 4):
            assert count(d + 1, d) == 2 * d + 1

    def test_matches_brute_force_enumeration(self):
        for d in (1, 2, 3):
            for q in range(d, d + 5):
                grid = build_grid(q, d)
                brute = brute_force_points(q, d)
                assert grid.n_points == len(brute)
                assert set(map(tuple, grid.points.tolist())) == brute

    def test_nesting(self):
        for d in (2, 3):
            for q in range(d, d + 4):
                lo = set(map(tuple, build_grid(q, d).points.tolist()))
                hi = set(map(tuple, build_grid(q + 1, d).points.tolist()))
                assert lo <= hi

    def test_point_count_bounds(self):
        """2^(q-1) <= n <= binom(q-1, d-1) 2^q in the stated regime, d <= 4."""
        for d in (1, 2, 3, 4):
            for q in range(d + 1, d + 7):
                n = count(q, d)
                assert n <= math.comb(q - 1, d - 1) * 2**q
                lower_applies = d == 1 or 2 ** ((q - 1) / (d - 1)) > q + 1
                if lower_applies:
                    assert 2 ** (q - 1) <= n

    def test_q_below_d_rejected(self):
        with pytest.raises(ValueError):
            build_grid(2, 3)

    def test_quadrature_weights_integrate_constants(self):
        for d in (1, 2, 3):
            for q in range(d, d + 4):
                grid = build_grid(q, d)
                assert grid.weights.sum() == pytest.approx(2.0**d, rel=1e-13)


class TestSmolyakInterpolation:
    def test_constant_reproduced_everywhere(self):
        rng = substream(1, "const")
        for _ in range(20):
            x = rng.uniform(-1, 1, 3)
            assert smolyak_interpolate(6, 3, lambda p: 1.0, x) == pytest.approx(1.0, abs=1e-13)

    def test_reproduces_values_on_grid_points(self):
        rng = substream(2, "gridpts")
        f = lambda p: float(np.sin(p).sum() + np.prod(np.cos(p)))
        for d, q in ((2, 5), (3, 5)):
            grid = build_grid(q, d)
            idx = rng.choice(grid.n_points, size=min(20, grid.n_points), replace=False)
            for i in idx:
                x = grid.points[i]
                assert smolyak_interpolate(q, d, f, x) == pytest.approx(f(x), abs=1e-13)

    @pytest.mark.parametrize("d,q", [(2, 4), (2, 5), (3, 5)])
    def test_exact_on_hyperbolic_cross_monomials(self, d, q):
        """Exactness on the span of tensor polynomial spaces with |i|_1 = q,
        degree m_i - 1 per axis, at 50 random points, err <= 1e-12."""
        rng = substream(3, "monomials", d, q)
        pts = rng.uniform(-1, 1, size=(50, d))

        def compositions(total, parts):
            if parts == 1:
                yield (total,)
                return
            for head in range(1, total - parts + 2):
                for tail in compositions(total - head, parts - 1):
                    yield (head,) + tail

        for levels in compositions(q, d):
            degrees = [num_knots(lv) - 1 for lv in levels]
            alphas = [tuple(degrees)]
            for _ in range(2):
                alphas.append(tuple(int(rng.integers(0, dg + 1)) for dg in degrees))
            for alpha in alphas:
                f = lambda p, a=alpha: float(np.prod(p ** np.array(a)))
                for x in pts[:10]:
                    assert smolyak_interpolate(q, d, f, x) == pytest.approx(
                        f(x), abs=1e-12)

    def test_error_decreases_with_level_on_smooth_target(self):
        f = lambda p: float(np.exp(-np.sum(p**2)) * np.cos(p[0]))
        rng = substream(4, "trend")
        pts = rng.uniform(-1, 1, size=(200, 2))
        errs = []
        for q in (3, 5, 7):
            vals = np.array([smolyak_interpolate(q, 2, f, x) for x in pts])
            ref = np.array([f(x) for x in pts])
            errs.append(float(np.max(np.abs(vals - ref))))
        assert errs[2] < errs[1] < errs[0]


class TestGaussianSurrogate:
    def test_zero_function_zero_surrogate(self):
        u = lambda p: 0.0
        surr = rbf_quadrature_approx(u, np.array([0.5, 0.5]), 4, 2)
        rng = substream(5, "zero")
        assert np.allclose(surr(rng.uniform(-1, 1, size=(10, 2))), 0.0)

    def test_surrogate_is_weighted_kernel_sum(self):
        u = lambda p: float(np.cos(p).prod())
        eps = np.array([0.4, 0.7])
        surr = rbf_quadrature_approx(u, eps, 4, 2)
        x = np.array([0.3, -0.2])
        ks = 1.0 / eps
        expect = 0.0
        for i in range(surr.n_basis):
            diff = x - surr.grid.points[i]
            expect += (surr.values[i] * surr.grid.weights[i]
                       * np.prod(ks / np.sqrt(np.pi))
                       * np.exp(-np.sum(ks**2 * diff**2)))
        assert surr(x) == pytest.approx(expect, rel=1e-12)

    def test_bad_scales_rejected(self):
        with pytest.raises(ValueError):
            rbf_quadrature_approx(lambda p: 0.0, np.array([0.5, -0.1]), 4, 2)


class TestBoundSkeleton:
    def _profile(self, d):
        return AnisotropyProfile(paper_schedule(d), np.ones(d), 1.0, 2.0)

    def test_tradeoff_limits(self):
        """Shrinking scales kills the mollification term and blows up the
        interpolation term."""
        d, n, k = 2, 64, 1
        base = self._profile(d)
        small = AnisotropyProfile(lambda _: np.full(d, 1e-4), np.ones(d), 1.0, 2.0)
        big = AnisotropyProfile(lambda _: np.full(d, 0.9), np.ones(d), 1.0, 2.0)
        moll_small = float(np.sum(np.sqrt(small.scales_for(n))))
        moll_big = float(np.sum(np.sqrt(big.scales_for(n))))
        assert moll_small < moll_big
        assert theorem1_bound(small, n, k, d) > theorem1_bound(big, n, k, d)

    def test_phi_tail_bounded_by_exponential_sum(self):
        """1 - Phi(eps^(-1/2)) <= sum_i 2 (2 pi eps_i)^(-1/2) exp(-1/(2 eps_i))."""
        rng = substream(6, "tail")
        for _ in range(50):
            d = int(rng.integers(1, 5))
            eps = rng.uniform(0.02, 0.99, d)
            lhs = phi_tail(eps)
            rhs = float(np.sum(2.0 / np.sqrt(2 * np.pi * eps) * np.exp(-0.5 / eps)))
            assert lhs <= rhs + 1e-15

    def test_phi_tail_normal_cdf_oracle(self):
        from scipy.stats import norm
        eps = np.array([0.3, 0.6])
        x = eps ** -0.5
        expect = 1.0 - np.prod(norm.cdf(x) - norm.cdf(-x))
        assert phi_tail(eps) == pytest.approx(expect, rel=1e-12)

    def test_monotone_decreasing_in_n_1d(self):
        prof = self._profile(1)
        vals = [theorem1_bound(prof, n, 1, 1) for n in (256, 512, 1024, 2048)]
        assert all(v > 0 and np.isfinite(v) for v in vals)
        assert all(vals[i + 1] < vals[i] for i in range(3))

    def test_kernel_sup_norm_values(self):
        # k=0: sup of exp(-x^2)/sqrt(pi) is 1/sqrt(pi); k=2 reaches 2/sqrt(pi)
        assert kernel_sup_norm(0, 1) == pytest.approx(1 / np.sqrt(np.pi), rel=1e-6)
        assert kernel_sup_norm(2, 1) == pytest.approx(2 / np.sqrt(np.pi), rel=1e-6)
        assert kernel_sup_norm(2, 3) == pytest.approx((2 / np.sqrt(np.pi)) ** 3, rel=1e-5)

    def test_schedule_validation(self):
        bad = AnisotropyProfile(lambda n: np.array([1.5]), np.ones(1), 1.0, 1.0)
        with pytest.raises(ValueError):
            theorem1_bound(bad, 16, 1, 1)
        with pytest.raises(ValueError):
            theorem1_bound(self._profile(2), 16, 0, 2)

    def test_isotropic_schedule(self):
        iso = isotropic_schedule(3)
        assert np.allclose(iso(64), 64 ** (-1 / 6))
