import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardy_nehari import grid as rg
from hardy_nehari.closed_forms import bubble_profile, hardy_limit, sharp_constants
from hardy_nehari.errors import DomainError, GridMismatchError, NegativeNormError

from .conftest import compact_bump, smooth_bump, sphere_area_oracle, talenti_constant


class TestConstruction:
    def test_default_contract(self):
        g = rg.make_log_grid(3, 1e-4, 1e4, 4096)
        assert g.K == 4096
        assert g.r_min == pytest.approx(1e-4)
        assert g.r_max == pytest.approx(1e4)
        assert math.log10(g.r_max / g.r_min) == pytest.approx(8.0)
        assert np.all(np.diff(g.r) > 0) and np.all(g.r > 0)
        assert np.all(g.weights > 0)

    @pytest.mark.parametrize("args", [(3, 0.0, 1.0, 64), (3, 2.0, 1.0, 64), (3, 1e-2, 1e2, 8), (2, 1e-2, 1e2, 64)])
    def test_bad_arguments(self, args):
        with pytest.raises(DomainError):
            rg.make_log_grid(*args)

    @pytest.mark.parametrize("N", range(3, 9))
    def test_sphere_area(self, N):
        assert rg.sphere_area(N) == pytest.approx(sphere_area_oracle(N), rel=1e-14)

    @pytest.mark.parametrize("N", [3, 4, 5, 6])
    def test_constant_one(self, N):
        g = rg.make_log_grid(N, 1e-2, 1e2, 1024)
        exact = g.sphere_area * (g.r_max**N - g.r_min**N) / N
        assert g.integrate(np.ones(g.K)) == pytest.approx(exact, rel=1e-8)


class TestQuadrature:
    def test_gaussian_n3(self):
        g = rg.make_log_grid(3)
        # omega_2 int exp(-r^2) r^2 dr = 4 pi * sqrt(pi)/4
        assert g.integrate(np.exp(-g.r**2)) == pytest.approx(math.pi**1.5, rel=1e-6)

    @pytest.mark.parametrize("N", [3, 4, 5])
    @pytest.mark.parametrize("k", [0, 1, 3])
    def test_exponential_moments(self, N, k):
        g = rg.make_log_grid(N)
        exact = g.sphere_area * math.gamma(N + k)
        assert g.integrate(g.r**k * np.exp(-g.r)) == pytest.approx(exact, rel=1e-6)

    def test_refinement(self):
        def err(K):
            g = rg.make_log_grid(4, 1e-3, 1e3, K)
            return abs(g.integrate(np.exp(-g.r**2)) - math.pi**2)

        errs = [err(K) for K in (16, 32, 64)]
        assert errs[1] * 2 <= errs[0] and errs[2] * 2 <= errs[1]


class TestEnergies:
    def test_constant_profile_has_zero_dirichlet_energy(self):
        g = rg.make_log_grid(4, 1e-2, 1e2, 256)
        assert rg.dirichlet_energy(g.profile(lambda r: np.full_like(r, 3.0))) == 0.0

    def test_classical_bubble_rayleigh(self):
        g = rg.symmetric_log_grid(4, 6, 4096)
        u = g.profile(lambda r: 1.0 / (1.0 + r * r))
        S = talenti_constant(4)
        ratio = rg.dirichlet_energy(u) / rg.lp_norm_power(u, 4.0) ** 0.5
        assert ratio == pytest.approx(S, rel=5e-3)

    @given(c=st.floats(min_value=-1e3, max_value=1e3, allow_nan=False))
    @settings(max_examples=40, deadline=None)
    def test_homogeneity(self, c):
        g = rg.make_log_grid(4, 1e-2, 1e2, 256)
        u = rg.RadialProfile(g, smooth_bump(g, 0.3, 1.0))
        assert rg.dirichlet_energy(u * c) == pytest.approx(c * c * rg.dirichlet_energy(u), rel=1e-12, abs=1e-300)
        assert rg.hardy_term(u * c, 0.5) == pytest.approx(c * c * rg.hardy_term(u, 0.5), rel=1e-12, abs=1e-300)
        q = rg.critical_exponent(4)
        assert rg.lp_norm_power(u * c, q) == pytest.approx(abs(c) ** q * rg.lp_norm_power(u, q), rel=1e-12, abs=1e-300)

    def test_hardy_zero_lambda(self):
        g = rg.make_log_grid(4, 1e-2, 1e2, 256)
        assert rg.hardy_term(rg.RadialProfile(g, smooth_bump(g, 0, 1)), 0.0) == 0.0
        with pytest.raises(DomainError):
            rg.hardy_term(rg.RadialProfile(g, smooth_bump(g, 0, 1)), -1.0)

    @pytest.mark.parametrize("N", [3, 4, 5, 6])
    def test_hardy_inequality_random_profiles(self, N, rng):
        g = rg.make_log_grid(N, 1e-4, 1e4, 2048)
        Lam = hardy_limit(N)
        for _ in range(200):
            w = rng.uniform(0.2, 3.0)
            u = rg.RadialProfile(g, compact_bump(g, rng.uniform(-9.0 + w, 9.0 - w), w))
            assert Lam * rg.hardy_term(u, 1.0) <= rg.dirichlet_energy(u) * (1 + 1e-3)

    def test_hardy_dilation_invariance(self):
        g = rg.make_log_grid(4, 1e-5, 1e5, 4096)
        f = lambda r: np.exp(-np.log(r) ** 2)
        m = 3.0
        u = g.profile(f)
        v = g.profile(lambda r: m ** (-1.0) * f(r / m))
        assert rg.hardy_term(v, 1.0) == pytest.approx(rg.hardy_term(u, 1.0), rel=1e-8)

    def test_weighted_norm(self):
        g = rg.make_log_grid(4, 1e-2, 1e2, 256)
        u = rg.RadialProfile(g, smooth_bump(g, 0, 1))
        assert rg.weighted_norm_sq(u, 0.0) == rg.dirichlet_energy(u)
        assert rg.weighted_norm_sq(g.zeros(), 0.5) == 0.0

    @pytest.mark.parametrize("N", [3, 4, 5])
    def test_weighted_norm_of_bubble(self, N):
        lam = hardy_limit(N) / 2
        from hardy_nehari.closed_forms import bubble_grid

        g = bubble_grid(N, [lam], 4096)
        A = sharp_constants([lam] * 3, N, talenti_constant(N)).A[0]
        assert rg.weighted_norm_sq(bubble_profile(g, lam), lam) == pytest.approx(N * A, rel=5e-3)

    def test_negative_norm_detected(self):
        # a profile that does not vanish at the ends is not a Hardy-admissible function
        g = rg.make_log_grid(4, 1e-2, 1e2, 64)
        with pytest.raises(NegativeNormError):
            rg.weighted_norm_sq(g.profile(np.ones_like), 0.5)
        with pytest.raises(DomainError):
            rg.weighted_norm_sq(g.profile(np.ones_like), 1.0)


class TestPairings:
    def test_diagonal_reduction(self):
        g = rg.make_log_grid(4, 1e-2, 1e2, 256)
        u = rg.RadialProfile(g, smooth_bump(g, 0, 1))
        assert rg.lp_power_integral(u, u, 2.0) == pytest.approx(rg.lp_norm_power(u, 4.0), rel=1e-14)

    def test_disjoint_supports(self):
        g = rg.make_log_grid(4, 1e-2, 1e2, 256)
        a = np.where(g.r < 1, 1.0, 0.0)
        b = np.where(g.r > 2, 1.0, 0.0)
        assert rg.lp_power_integral(rg.RadialProfile(g, a), rg.RadialProfile(g, b), 2.0) == 0.0

    def test_grid_mismatch(self):
        g1 = rg.make_log_grid(4, 1e-2, 1e2, 256)
        g2 = rg.make_log_grid(4, 1e-2, 1e2, 128)
        with pytest.raises(GridMismatchError):
            rg.lp_power_integral(g1.zeros(), g2.zeros(), 2.0)

    @given(c1=st.floats(-3, 3), c2=st.floats(-3, 3), w1=st.floats(0.2, 2), w2=st.floats(0.2, 2))
    @settings(max_examples=50, deadline=None)
    def test_holder_bound(self, c1, c2, w1, w2):
        g = rg.make_log_grid(3, 1e-3, 1e3, 512)
        u = rg.RadialProfile(g, smooth_bump(g, c1, w1))
        v = rg.RadialProfile(g, smooth_bump(g, c2, w2))
        p = 3.0
        lhs = rg.lp_power_integral(u, v, p)
        rhs = math.sqrt(rg.lp_norm_power(u, 2 * p) * rg.lp_norm_power(v, 2 * p))
        assert lhs <= rhs * (1 + 1e-12)


class TestProfiles:
    def test_rejects_nonfinite(self):
        g = rg.make_log_grid(3, 1e-2, 1e2, 32)
        with pytest.raises(DomainError):
            rg.RadialProfile(g, np.full(g.K, np.nan))
        with pytest.raises(DomainError):
            rg.RadialProfile(g, np.ones(g.K - 1))

    def test_round_trip(self, tmp_path):
        g = rg.make_log_grid(3, 1e-2, 1e2, 64)
        u = rg.RadialProfile(g, smooth_bump(g, 0.2, 0.7))
        path = tmp_path / "u.txt"
        rg.write_profile(u, path, header="test profile")
        assert path.read_text().startswith("# test profile\n")
        v = rg.read_profile(path, g)
        np.testing.assert_array_equal(u.values, v.values)

    def test_read_resamples(self, tmp_path):
        path = tmp_path / "lin.txt"
        path.write_text("# comment\n1 1\n10 2\n100 3\n")
        g = rg.make_log_grid(3, 1e-1, 1e3, 32)
        v = rg.read_profile(path, g)
        # linear in log r inside, zero outside
        inside = (g.r >= 1) & (g.r <= 100)
        np.testing.assert_allclose(v.values[inside], 1 + np.log10(g.r[inside]), rtol=1e-12)
        assert np.all(v.values[~inside] == 0)

    def test_tail_warning(self):
        g = rg.make_log_grid(4, 1e-3, 1e3, 512)
        wide = g.profile(lambda r: 1.0 / (1.0 + r * r))
        with pytest.warns(RuntimeWarning):
            rg.check_tail(wide)
        narrow = rg.RadialProfile(g, smooth_bump(g, 0.0, 0.3))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert rg.check_tail(narrow) < rg.TAIL_WARN

    def test_laplacian_matches_analytic(self):
        # -Delta of exp(-r^2) in R^3 is (6 - 4 r^2) exp(-r^2)
        g = rg.make_log_grid(3, 1e-2, 1e1, 4096)
        lap = rg.laplacian_stencil(np.exp(-g.r**2), g)
        exact = (6 - 4 * g.r**2) * np.exp(-g.r**2)
        sel = (g.r > 0.05) & (g.r < 3)
        np.testing.assert_allclose(lap[sel], exact[sel], atol=1e-4)
        assert np.isnan(lap[0]) and np.isnan(lap[-1])
