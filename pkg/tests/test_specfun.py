import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from palmpp.specfun import (beta_fn, gauss_legendre, hyp2f1_matern, quadrature_rule,
                            reg_inc_beta, reg_lower_gamma, sphere_surface, sphere_volume)


class TestIncompleteBeta:
    def test_endpoints(self):
        assert reg_inc_beta(0.0, 2.3, 0.7) == 0.0
        assert reg_inc_beta(1.0, 2.3, 0.7) == 1.0

    def test_quadrature_oracle(self):
        # I(0.75; 1.5, 0.5) from direct integration of the beta density
        num, _ = integrate.quad(lambda u: u ** 0.5 * (1 - u) ** -0.5, 0, 0.75,
                                epsabs=1e-14, epsrel=1e-14)
        expected = num / beta_fn(1.5, 0.5)
        assert reg_inc_beta(0.75, 1.5, 0.5) == pytest.approx(expected, abs=1e-10)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 1), st.floats(0.05, 30), st.floats(0.05, 30))
    def test_matches_scipy(self, z, a, b):
        assert reg_inc_beta(z, a, b) == pytest.approx(special.betainc(a, b, z), abs=1e-12, rel=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 1), st.floats(0.1, 10), st.floats(0.1, 10))
    def test_symmetry(self, z, a, b):
        z = 1.0 - (1.0 - z)  # make the complement exact in floating point
        assert reg_inc_beta(z, a, b) + reg_inc_beta(1 - z, b, a) == pytest.approx(1.0, abs=1e-12)

    def test_vectorized(self):
        z = np.linspace(0, 1, 11)
        np.testing.assert_allclose(reg_inc_beta(z, 1.5, 0.5), special.betainc(1.5, 0.5, z), atol=1e-13)

    @pytest.mark.parametrize("z,a,b", [(-0.1, 1, 1), (1.1, 1, 1), (0.5, 0, 1), (0.5, 1, -2),
                                       (float("nan"), 1, 1)])
    def test_domain_errors(self, z, a, b):
        with pytest.raises(ValueError):
            reg_inc_beta(z, a, b)

    def test_beta_fn(self):
        assert beta_fn(1.5, 0.5) == pytest.approx(math.pi / 2, rel=1e-14)


class TestIncompleteGamma:
    @pytest.mark.parametrize("x", [0.0, 0.1, 1.0, 7.5, 40.0])
    def test_exponential_identity(self, x):
        assert reg_lower_gamma(1.0, x) == pytest.approx(1 - math.exp(-x), abs=1e-14)

    def test_zero(self):
        assert reg_lower_gamma(3.2, 0.0) == 0.0

    def test_dual_algorithm(self):
        # series and continued fraction agree near the switch point
        s = 2.5
        below = reg_lower_gamma(s, np.nextafter(s + 1.0, 0))
        above = reg_lower_gamma(s, s + 1.0)
        assert below == pytest.approx(above, abs=1e-12)
        assert reg_lower_gamma(2.5, 3.7) == pytest.approx(special.gammainc(2.5, 3.7), abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.05, 50), st.floats(0, 200))
    def test_matches_scipy(self, s, x):
        assert reg_lower_gamma(s, x) == pytest.approx(special.gammainc(s, x), abs=1e-12)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            reg_lower_gamma(0.0, 1.0)
        with pytest.raises(ValueError):
            reg_lower_gamma(1.0, -1.0)


class TestHypergeometric:
    def test_gauss_summation_d2(self):
        assert hyp2f1_matern(-0.5, 1.0) == pytest.approx(math.pi / 4, abs=1e-14)

    @pytest.mark.parametrize("d", [2, 3, 4, 5, 7])
    def test_origin(self, d):
        assert hyp2f1_matern(0.5 - d / 2, 0.0) == 1.0

    @pytest.mark.parametrize("z", [0.0, 0.2, 0.5, 0.9, 1.0])
    def test_polynomial_d3(self, z):
        assert hyp2f1_matern(-1.0, z) == pytest.approx(1 - z / 3, abs=1e-15)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(2, 8), st.floats(0, 1))
    def test_matches_scipy(self, d, z):
        b = 0.5 - d / 2
        assert hyp2f1_matern(b, z) == pytest.approx(special.hyp2f1(0.5, b, 1.5, z), abs=1e-12)

    def test_continuity_at_switch(self):
        lo = hyp2f1_matern(-0.5, 0.5)
        hi = hyp2f1_matern(-0.5, np.nextafter(0.5, 1))
        assert lo == pytest.approx(hi, abs=1e-13)

    def test_domain(self):
        with pytest.raises(ValueError):
            hyp2f1_matern(-0.5, 1.5)


class TestQuadrature:
    def test_polynomial_exactness(self):
        assert gauss_legendre(lambda x: x ** 2, 0, 1, order=5) == pytest.approx(1 / 3, abs=1e-15)
        assert gauss_legendre(lambda x: np.ones_like(x), 0, 1) == pytest.approx(1.0, abs=1e-15)

    def test_degree_2n_minus_1(self):
        n = 8
        assert gauss_legendre(lambda x: x ** (2 * n - 1) + x ** (2 * n - 2), -1, 2, order=n) == \
            pytest.approx((2 ** 16 - 1) / 16 + (2 ** 15 + 1) / 15, rel=1e-13)

    def test_void_integrand_refinement(self):
        from palmpp.core import VoidParams
        from palmpp.palm import palm_void
        p = VoidParams(10.0, 0.075, 300.0)
        f = lambda r: palm_void(r, p) * 2 * np.pi * r
        prev, order = None, 4
        while True:
            val = gauss_legendre(f, 0, 2 * p.R, order)
            if prev is not None and abs(val - prev) < 1e-9:
                break
            prev, order = val, order * 2
        assert gauss_legendre(f, 0, 2 * p.R, 64) == pytest.approx(val, abs=1e-9)

    def test_rule_cached_and_readonly(self):
        r = quadrature_rule(16)
        assert r is quadrature_rule(16)
        assert not r.nodes.flags.writeable
        with pytest.raises(ValueError):
            quadrature_rule(1)


class TestSphere:
    def test_volumes(self):
        assert sphere_volume(2, 1) == pytest.approx(math.pi)
        assert sphere_volume(3, 1) == pytest.approx(4 * math.pi / 3)
        assert sphere_volume(2, 0.075) == pytest.approx(0.0176715, abs=1e-7)

    @pytest.mark.parametrize("d", [1, 2, 3, 4])
    def test_surface_is_derivative(self, d):
        r, h = 0.7, 1e-6
        num = (sphere_volume(d, r + h) - sphere_volume(d, r - h)) / (2 * h)
        assert sphere_surface(d, r) == pytest.approx(num, rel=1e-8)
