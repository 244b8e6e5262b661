"""Palm intensities for the void, Thomas and Matern processes in d dimensions,
sibling-distance densities, and the histogram (empirical) Palm intensity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (MaternParams, PointPattern, PoissonParams, ThomasParams, VoidParams,
                   pairwise_distances)
from .specfun import (beta_fn, hyp2f1_matern, quadrature_rule, reg_inc_beta,
                      reg_lower_gamma, sphere_surface, sphere_volume)


@dataclass(frozen=True)
class PalmCurve:
    radii: np.ndarray
    intensity: np.ndarray
    kind: str  # "empirical" or "fitted"

    def __post_init__(self):
        if self.kind not in ("empirical", "fitted"):
            raise ValueError("kind must be 'empirical' or 'fitted'")
        if np.shape(self.radii) != np.shape(self.intensity):
            raise ValueError("radii and intensity must have the same length")


def _nonneg(r):
    r = np.asarray(r, dtype=float)
    if np.any(np.isnan(r)) or np.any(r < 0):
        raise ValueError("distances must be non-negative")
    return r


def _out(x):
    return x[()] if np.ndim(x) == 0 else x


def _lens_fraction(r, R, d):
    # I(1 - (r/2R)^2; (d+1)/2, 1/2), zero beyond 2R
    g = np.clip(1.0 - (r / (2.0 * R)) ** 2, 0.0, 1.0)
    return reg_inc_beta(g, (d + 1) / 2.0, 0.5)


def intersection_volume(r, R: float, d: int = 2):
    """Volume shared by two d-balls of radius ``R`` whose centres are ``r`` apart."""
    r = _nonneg(r)
    if not R > 0:
        raise ValueError("R must be positive")
    return _out(sphere_volume(d, R) * _lens_fraction(r, R, d))


# ---------------------------------------------------------------------------
# void
# ---------------------------------------------------------------------------

def palm_void(r, params: VoidParams, d: int = 2):
    """Palm intensity of the void process.

    lambda * exp(-D v(R) [1 - I(1 - (r/2R)^2; (d+1)/2, 1/2)]): equal to lambda
    at r = 0 and flat at lambda * exp(-D v(R)) from r = 2R on.
    """
    r = _nonneg(r)
    v = sphere_volume(d, params.R)
    safe = _lens_fraction(r, params.R, d)
    return _out(params.lam * np.exp(-params.D * v * (1.0 - safe)))


# ---------------------------------------------------------------------------
# Thomas
# ---------------------------------------------------------------------------

def thomas_sibling_pdf(r, sigma: float, d: int = 2):
    """Density of the distance between two Thomas siblings (sigma * sqrt(2) * chi_d)."""
    r = _nonneg(r)
    kernel = (4.0 * math.pi * sigma ** 2) ** (-d / 2) * np.exp(-r ** 2 / (4.0 * sigma ** 2))
    return _out(sphere_surface(d, r) * kernel)


def thomas_sibling_cdf(t, sigma: float, d: int = 2):
    """P(d/2, t^2 / 4 sigma^2)."""
    t = _nonneg(t)
    return _out(reg_lower_gamma(d / 2.0, t ** 2 / (4.0 * sigma ** 2)))


def palm_thomas(r, params: ThomasParams, d: int = 2):
    """D nu + nu (4 pi sigma^2)^(-d/2) exp(-r^2 / 4 sigma^2)."""
    r = _nonneg(r)
    s2 = params.sigma ** 2
    excess = params.nu * (4.0 * math.pi * s2) ** (-d / 2) * np.exp(-r ** 2 / (4.0 * s2))
    return _out(params.D * params.nu + excess)


# ---------------------------------------------------------------------------
# Matern
# ---------------------------------------------------------------------------

def _matern_bracket(r, R, d):
    # F(1) R - F(r^2 / 4R^2) r / 2, zero from r = 2R on
    b = 0.5 - d / 2.0
    z = np.clip((r / (2.0 * R)) ** 2, 0.0, 1.0)
    val = hyp2f1_matern(b, 1.0) * R - hyp2f1_matern(b, z) * np.minimum(r, 2.0 * R) / 2.0
    return np.where(r >= 2.0 * R, 0.0, np.maximum(val, 0.0))


def matern_sibling_pdf(r, R: float, d: int = 2, method: str = "hypergeometric"):
    """Density of the distance between two points drawn uniformly from a d-ball of radius ``R``.

    ``method="hypergeometric"`` uses the closed 2F1 form; ``"integral"``
    evaluates 2 d r^(d-1) int_{r/2}^R (R^2 - x^2)^((d-1)/2) dx / (B R^(2d))
    by Gauss-Legendre after the substitution x = R cos(theta).
    """
    r = _nonneg(r)
    B = beta_fn((d + 1) / 2.0, 0.5)
    if method == "hypergeometric":
        out = 2.0 * d / B * r ** (d - 1) / R ** (d + 1) * _matern_bracket(r, R, d)
    elif method == "integral":
        rule = quadrature_rule(64)
        rr = np.atleast_1d(r)
        phi = np.arccos(np.clip(rr / (2.0 * R), 0.0, 1.0))
        # int_0^phi R^d sin^d(theta) d theta, mapped per r
        half = phi / 2.0
        theta = half[:, None] * (1.0 + rule.nodes[None, :])
        integral = R ** d * half * (np.sin(theta) ** d @ rule.weights)
        out = 2.0 * d * rr ** (d - 1) * integral / (B * R ** (2 * d))
        out = np.where(rr >= 2.0 * R, 0.0, out).reshape(np.shape(r))
    else:
        raise ValueError(f"unknown method {method!r}")
    return _out(out)


def matern_sibling_cdf(t, R: float, d: int = 2):
    """Closed-form CDF of the Matern sibling distance.

    With alpha = (t / 2R)^2 and a = (d + 1) / 2,
    F = 2^d [alpha^(d/2) (1 - I(alpha; 1/2, a)) + B(alpha; a, a) / B(a, 1/2)].
    """
    t = _nonneg(t)
    a = (d + 1) / 2.0
    alpha = np.clip((t / (2.0 * R)) ** 2, 0.0, 1.0)
    head = alpha ** (d / 2.0) * (1.0 - reg_inc_beta(alpha, 0.5, a))
    tail = reg_inc_beta(alpha, a, a) * beta_fn(a, a) / beta_fn(a, 0.5)
    return _out(np.minimum(2.0 ** d * (head + tail), 1.0))


def matern_peak_excess(params: MaternParams, d: int = 2) -> float:
    """palm_matern(0) - D nu, which equals nu / v_d(R)."""
    return float(params.nu / sphere_volume(d, params.R))


def palm_matern(r, params: MaternParams, d: int = 2):
    """Matern Palm intensity with the r^(d-1) factors cancelled, finite at r = 0."""
    r = _nonneg(r)
    R = params.R
    const = (2.0 * math.gamma(d / 2.0 + 1.0) ** 2
             / (R ** (d + 1) * math.pi ** ((d + 1) / 2.0) * math.gamma(d / 2.0 + 0.5)))
    return _out(params.D * params.nu + params.nu * const * _matern_bracket(r, R, d))


# ---------------------------------------------------------------------------
# dispatch and empirical estimate
# ---------------------------------------------------------------------------

def palm_intensity(r, params, d: int = 2):
    if isinstance(params, VoidParams):
        return palm_void(r, params, d)
    if isinstance(params, ThomasParams):
        return palm_thomas(r, params, d)
    if isinstance(params, MaternParams):
        return palm_matern(r, params, d)
    if isinstance(params, PoissonParams):
        r = _nonneg(r)
        return _out(np.full(np.shape(r), params.lam))
    raise TypeError(f"no Palm intensity for {type(params).__name__}")


def fitted_palm(params, radii, d: int = 2) -> PalmCurve:
    radii = np.asarray(radii, dtype=float)
    return PalmCurve(radii, np.asarray(palm_intensity(radii, params, d), dtype=float), "fitted")


def empirical_palm(p: PointPattern, t: float, bins: int = 30,
                   edge_correction: bool = False) -> PalmCurve:
    """Histogram estimate of the Palm intensity on ``bins`` equal annuli of ``[0, t]``.

    Each unordered pair counts twice (once per centre), normalised by
    n times the annulus volume. With ``edge_correction`` each bin is further
    divided by the window's covariance fraction at the bin centre.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if not t > 0:
        raise ValueError("t must be positive")
    if p.n < 2:
        raise ValueError("insufficient points: need at least 2")
    d = p.dim
    edges = np.linspace(0.0, t, bins + 1)
    counts, _ = np.histogram(pairwise_distances(p, t), bins=edges)
    shell = sphere_volume(d, edges[1:]) - sphere_volume(d, edges[:-1])
    mids = 0.5 * (edges[1:] + edges[:-1])
    est = 2.0 * counts / (p.n * shell)
    if edge_correction:
        est = est / p.window.covariance_fraction(mids)
    return PalmCurve(mids, est, "empirical")
