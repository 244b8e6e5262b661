import math

import numpy as np
import pytest
from scipy import integrate, stats

from palmpp.core import (MaternParams, PointPattern, PoissonParams, RngStream, ThomasParams,
                         VoidParams, Window)
from palmpp.palm import (PalmCurve, empirical_palm, fitted_palm, intersection_volume,
                         matern_peak_excess, matern_sibling_cdf, matern_sibling_pdf, palm_intensity,
                         palm_matern, palm_thomas, palm_void, thomas_sibling_cdf, thomas_sibling_pdf)
from palmpp.sim import simulate
from palmpp.specfun import sphere_volume

FIG1_VOID = VoidParams(10, 0.075, 300)
FIG1_THOMAS = ThomasParams(7, 8, 0.05)
FIG1_MATERN = MaternParams(7, 8, 0.05)


def _lens_2d(r, R):
    return 2 * R ** 2 * math.acos(r / (2 * R)) - r / 2 * math.sqrt(4 * R ** 2 - r ** 2)


class TestIntersectionVolume:
    @pytest.mark.parametrize("d", [1, 2, 3, 4])
    def test_full_and_tangent(self, d):
        assert intersection_volume(0.0, 0.3, d) == pytest.approx(sphere_volume(d, 0.3), rel=1e-14)
        assert intersection_volume(0.6, 0.3, d) == pytest.approx(0.0, abs=1e-15)

    def test_unit_lens(self):
        assert intersection_volume(1.0, 1.0, 2) == pytest.approx(1.22837, abs=1e-5)

    def test_lens_formula_grid(self):
        R = 0.4
        for r in np.linspace(0, 2 * R, 41):
            assert intersection_volume(r, R, 2) == pytest.approx(_lens_2d(r, R), abs=1e-10)

    def test_3d_cap_formula(self):
        R = 1.0
        for r in np.linspace(0, 2, 9):
            exact = math.pi / 12 * (4 * R + r) * (2 * R - r) ** 2
            assert intersection_volume(r, R, 3) == pytest.approx(exact, abs=1e-12)


class TestVoid:
    def test_boundary_values(self):
        assert palm_void(0.0, FIG1_VOID) == pytest.approx(300.0, rel=1e-14)
        assert palm_void(0.2, FIG1_VOID) == pytest.approx(300 * math.exp(-10 * math.pi * 0.075 ** 2), rel=1e-12)
        assert palm_void(0.2, FIG1_VOID) == pytest.approx(251.39, abs=0.02)

    def test_compositional(self):
        R = FIG1_VOID.R
        v = math.pi * R ** 2
        expected = 300 * math.exp(-10 * (v - intersection_volume(R, R, 2)))
        assert palm_void(R, FIG1_VOID) == pytest.approx(expected, rel=1e-12)

    def test_continuity_at_2R(self):
        R = FIG1_VOID.R
        a = palm_void(np.nextafter(2 * R, 0), FIG1_VOID)
        b = palm_void(2 * R, FIG1_VOID)
        assert a == pytest.approx(b, abs=1e-10)

    def test_monotone(self):
        vals = palm_void(np.linspace(0, 0.3, 200), FIG1_VOID)
        assert np.all(np.diff(vals) <= 1e-12)

    def test_negative_distance(self):
        with pytest.raises(ValueError):
            palm_void(-0.1, FIG1_VOID)


class TestThomas:
    def test_asymptote_and_peak(self):
        assert palm_thomas(10.0, FIG1_THOMAS) == pytest.approx(56.0, rel=1e-14)
        assert palm_thomas(0.0, FIG1_THOMAS) == pytest.approx(56 + 8 / (4 * math.pi * 0.0025), rel=1e-14)
        assert palm_thomas(0.0, FIG1_THOMAS) == pytest.approx(310.65, abs=0.01)

    def test_identity_with_sibling_pdf(self):
        r = np.linspace(0.001, 0.3, 50)
        lhs = palm_thomas(r, FIG1_THOMAS)
        rhs = 56 + 8 * thomas_sibling_pdf(r, 0.05) / (2 * math.pi * r)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12)

    def test_excess_is_gaussian(self):
        r = np.array([0.01, 0.04, 0.09])
        y = np.log(palm_thomas(r, FIG1_THOMAS) - 56)
        coef = np.polyfit(r, y, 2)
        assert coef[0] == pytest.approx(-1 / (4 * 0.05 ** 2), rel=1e-9)
        assert coef[1] == pytest.approx(0.0, abs=1e-6)

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_sibling_cdf_monte_carlo(self, d):
        rng = np.random.default_rng(100 + d)
        s = 0.05
        dist = np.linalg.norm(rng.normal(0, s, (50_000, d)) - rng.normal(0, s, (50_000, d)), axis=1)
        assert stats.kstest(dist, lambda t: thomas_sibling_cdf(t, s, d)).pvalue > 0.01

    def test_cdf_1d_is_erf(self):
        from scipy.special import erf
        t = np.linspace(0, 0.3, 50)
        np.testing.assert_allclose(thomas_sibling_cdf(t, 0.05, 1), erf(t / 0.1), atol=1e-14)

    def test_cdf_is_integral_of_pdf(self):
        for t in (0.02, 0.1, 0.3):
            num, _ = integrate.quad(lambda r: thomas_sibling_pdf(r, 0.05, 3), 0, t, epsabs=1e-13)
            assert thomas_sibling_cdf(t, 0.05, 3) == pytest.approx(num, abs=1e-11)


class TestMaternPdf:
    @pytest.mark.parametrize("d", [2, 3])
    @pytest.mark.parametrize("R", [0.05, 1.0, 3.0])
    def test_normalized(self, d, R):
        num, _ = integrate.quad(lambda r: matern_sibling_pdf(r, R, d), 0, 2 * R,
                                epsabs=1e-13, epsrel=1e-13, limit=200)
        assert num == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("d", [2, 3, 4, 5])
    def test_two_forms_agree(self, d):
        r = np.linspace(0, 0.1, 200)
        a = matern_sibling_pdf(r, 0.05, d)
        b = matern_sibling_pdf(r, 0.05, d, method="integral")
        np.testing.assert_allclose(a, b, atol=1e-9 * a.max())

    def test_closed_2d_and_3d(self):
        R = 0.7
        r = np.linspace(0.01, 2 * R - 0.01, 30)
        # 2D: (4r / pi R^2)[acos(r/2R) - (r/2R) sqrt(1 - r^2/4R^2)]
        u = r / (2 * R)
        f2 = 4 * r / (math.pi * R ** 2) * (np.arccos(u) - u * np.sqrt(1 - u ** 2))
        np.testing.assert_allclose(matern_sibling_pdf(r, R, 2), f2, rtol=1e-12)
        f3 = 3 * r ** 2 / (16 * R ** 6) * (r - 2 * R) ** 2 * (r + 4 * R)
        np.testing.assert_allclose(matern_sibling_pdf(r, R, 3), f3, rtol=1e-10)

    @pytest.mark.parametrize("d", [2, 3])
    def test_cdf_matches_quadrature(self, d):
        R = 0.05
        for t in (0.5 * R, R, 1.9 * R, 3 * R):
            num, _ = integrate.quad(lambda r: matern_sibling_pdf(r, R, d), 0, min(t, 2 * R),
                                    epsabs=1e-14, epsrel=1e-13)
            assert matern_sibling_cdf(t, R, d) == pytest.approx(num, abs=1e-8)

    def test_ks_uniform_ball(self):
        rng = np.random.default_rng(12)
        n, R = 100_000, 1.0

        def ball(k):
            v = rng.normal(size=(k, 2))
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            return v * R * np.sqrt(rng.random(k))[:, None]

        dist = np.linalg.norm(ball(n) - ball(n), axis=1)
        assert stats.kstest(dist, lambda t: matern_sibling_cdf(t, R, 2)).pvalue > 0.01


class TestMaternPalm:
    def test_asymptote(self):
        assert palm_matern(0.1, FIG1_MATERN) == pytest.approx(56.0, rel=1e-14)
        assert palm_matern(1.0, FIG1_MATERN) == pytest.approx(56.0, rel=1e-14)

    def test_peak(self):
        peak = palm_matern(0.0, FIG1_MATERN)
        assert peak - 56 == pytest.approx(8 / (math.pi * 0.05 ** 2), rel=1e-12)
        assert matern_peak_excess(FIG1_MATERN) == pytest.approx(peak - 56, rel=1e-12)
        # uncancelled form nu f_y(r) / s_d(r) near 0
        r = 1e-9
        limit = 56 + 8 * matern_sibling_pdf(r, 0.05) / (2 * math.pi * r)
        assert peak == pytest.approx(limit, rel=1e-6)

    @pytest.mark.parametrize("d", [2, 3])
    def test_cancelled_form(self, d):
        r = np.linspace(0.001, 0.099, 40)
        lhs = palm_matern(r, FIG1_MATERN, d)
        surf = d * math.pi ** (d / 2) / math.gamma(d / 2 + 1) * r ** (d - 1)
        rhs = 56 + 8 * matern_sibling_pdf(r, 0.05, d) / surf
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10)

    def test_continuity_at_2R(self):
        a = palm_matern(np.nextafter(0.1, 0), FIG1_MATERN)
        assert a == pytest.approx(palm_matern(0.1, FIG1_MATERN), abs=1e-10)

    def test_steeper_than_thomas(self):
        r = np.linspace(0, 0.1, 400)
        m = palm_matern(r, FIG1_MATERN)
        t = palm_thomas(r, FIG1_THOMAS)
        assert m[0] > t[0]
        assert np.any(m[r < 0.1] < t[r < 0.1])


class TestDispatch:
    def test_poisson_flat(self):
        np.testing.assert_array_equal(palm_intensity([0, 1, 2], PoissonParams(3)), [3, 3, 3])

    def test_unknown(self):
        with pytest.raises(TypeError):
            palm_intensity(0.1, object())

    def test_fitted_curve(self):
        c = fitted_palm(FIG1_THOMAS, [0.0, 1.0])
        assert c.kind == "fitted" and c.intensity[1] == pytest.approx(56.0)

    def test_curve_validation(self):
        with pytest.raises(ValueError):
            PalmCurve(np.zeros(2), np.zeros(3), "fitted")


class TestEmpirical:
    def test_two_points(self):
        p = PointPattern([[0.2, 0.5], [0.3, 0.5]], Window.unit())
        c = empirical_palm(p, 0.15, bins=3)
        shells = np.diff(math.pi * np.linspace(0, 0.15, 4) ** 2)
        k = int(np.argmax(c.intensity))
        assert c.intensity[k] == pytest.approx(2 / (2 * shells[k]))
        assert np.count_nonzero(c.intensity) == 1

    def test_poisson_flat(self):
        w = Window((0, 0), (4, 4))
        p = simulate(PoissonParams(1000), w, RngStream(21))
        c = empirical_palm(p, 0.3, bins=15, edge_correction=True)
        edges = np.linspace(0, 0.3, 16)
        shells = np.diff(math.pi * edges ** 2)
        counts = c.intensity * p.n * shells / 2 * w.covariance_fraction(c.radii)
        # pair-count noise within the bin plus the pattern-level count noise
        se = np.sqrt(c.intensity ** 2 / counts + 1000 / w.volume)
        assert np.all(np.abs(c.intensity - 1000) < 4 * se)

    def test_thomas_envelope(self):
        t, bins = 0.25, 10
        curves = np.array([empirical_palm(simulate(FIG1_THOMAS, Window.unit(), RngStream(22, i)),
                                          t, bins, edge_correction=True).intensity
                           for i in range(200)])
        lo, hi = np.quantile(curves, [0.025, 0.975], axis=0)
        radii = (np.arange(bins) + 0.5) * t / bins
        model = palm_thomas(radii, FIG1_THOMAS)
        assert np.all((model >= lo) & (model <= hi))

    def test_errors(self):
        p = PointPattern([[0.2, 0.5]], Window.unit())
        with pytest.raises(ValueError, match="insufficient"):
            empirical_palm(p, 0.1)
