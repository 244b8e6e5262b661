"""Special functions and quadrature used by the Palm intensities and likelihoods.

The scalar kernels are compiled with numba and exposed as ufuncs, so every
public function accepts scalars or arrays and broadcasts like numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numba as nb
import numpy as np

_EPS = 1e-16
_TINY = 1e-300
_MAXITER = 500


# ---------------------------------------------------------------------------
# regularized incomplete beta
# ---------------------------------------------------------------------------

@nb.njit(cache=True)
def _betacf(z, a, b):
    # modified Lentz evaluation of the continued fraction for I(z; a, b)
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * z / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAXITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * z / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * z / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


@nb.vectorize(["float64(float64, float64, float64)"], cache=True)
def _betainc(z, a, b):
    if z <= 0.0:
        return 0.0
    if z >= 1.0:
        return 1.0
    lbeta = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    front = math.exp(lbeta + a * math.log(z) + b * math.log1p(-z))
    if z < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(z, a, b) / a
    return 1.0 - front * _betacf(1.0 - z, b, a) / b


def reg_inc_beta(z, a, b):
    """Regularized incomplete beta function I(z; a, b).

    Evaluated by continued fraction, using I(z; a, b) = 1 - I(1 - z; b, a)
    above the switch point (a + 1) / (a + b + 2).

    Raises
    ------
    ValueError
        If ``z`` leaves [0, 1] or ``a``/``b`` are not positive.
    """
    z = np.asarray(z, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(np.isnan(z)) or np.any((z < 0.0) | (z > 1.0)):
        raise ValueError("reg_inc_beta: z must lie in [0, 1]")
    if np.any(~(a > 0.0)) or np.any(~(b > 0.0)):
        raise ValueError("reg_inc_beta: a and b must be positive")
    out = _betainc(z, a, b)
    return out[()] if out.ndim == 0 else out


def beta_fn(a, b):
    """Complete beta function B(a, b)."""
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


# ---------------------------------------------------------------------------
# regularized lower incomplete gamma
# ---------------------------------------------------------------------------

@nb.njit(cache=True)
def _gamma_series(s, x):
    if x <= 0.0:
        return 0.0
    ap = s
    total = 1.0 / s
    term = total
    for _ in range(_MAXITER * 4):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + s * math.log(x) - math.lgamma(s))


@nb.njit(cache=True)
def _gamma_cf(s, x):
    # continued fraction for the upper tail Q(s, x); returns P = 1 - Q
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAXITER * 4):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return 1.0 - math.exp(-x + s * math.log(x) - math.lgamma(s)) * h


@nb.vectorize(["float64(float64, float64)"], cache=True)
def _gammainc(s, x):
    if x <= 0.0:
        return 0.0
    if x < s + 1.0:
        return _gamma_series(s, x)
    return _gamma_cf(s, x)


def reg_lower_gamma(s, x):
    """Regularized lower incomplete gamma function P(s, x).

    Power series below ``x = s + 1``, Lentz continued fraction above.
    """
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(~(s > 0.0)):
        raise ValueError("reg_lower_gamma: s must be positive")
    if np.any(np.isnan(x)) or np.any(x < 0.0):
        raise ValueError("reg_lower_gamma: x must be non-negative")
    out = _gammainc(s, x)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# 2F1(1/2, b; 3/2; z) for the Matern sibling-distance family
# ---------------------------------------------------------------------------

@nb.njit(cache=True)
def _hyp2f1_series(a, b, c, z):
    term = 1.0
    total = 1.0
    for k in range(100000):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z
        total += term
        if term == 0.0 or abs(term) < abs(total) * _EPS:
            break
    return total


@nb.vectorize(["float64(float64, float64)"], cache=True)
def _hyp2f1_half(b, z):
    a = 0.5
    c = 1.5
    if z == 0.0:
        return 1.0
    # b a non-positive integer: terminating polynomial
    if b <= 0.0 and b == math.floor(b):
        return _hyp2f1_series(a, b, c, z)
    if z == 1.0:
        return math.exp(math.lgamma(c) + math.lgamma(c - a - b)
                        - math.lgamma(c - a) - math.lgamma(c - b))
    if z <= 0.5:
        return _hyp2f1_series(a, b, c, z)
    # z -> 1 - z connection; c - a - b = 1 - b is not an integer here
    w = 1.0 - z
    cab = c - a - b
    g_c = math.gamma(c)
    A = g_c * math.gamma(cab) / (math.gamma(c - a) * math.gamma(c - b))
    B = g_c * math.gamma(-cab) / (math.gamma(a) * math.gamma(b))
    return (A * _hyp2f1_series(a, b, 1.0 - cab, w)
            + B * w ** cab * _hyp2f1_series(c - a, c - b, cab + 1.0, w))


def hyp2f1_matern(b, z):
    """Gauss hypergeometric 2F1(1/2, b; 3/2; z) for 0 <= z <= 1.

    Only the family with ``b = 1/2 - d/2`` is needed. Integer ``b`` gives a
    terminating polynomial; otherwise the series is used for ``z <= 1/2``, the
    1 - z connection formula above that and Gauss summation at ``z = 1``.
    """
    z = np.asarray(z, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(np.isnan(z)) or np.any(z > 1.0) or np.any(z < 0.0):
        raise ValueError("hyp2f1_matern: z must lie in [0, 1]")
    if np.any(b >= 1.0):
        raise ValueError("hyp2f1_matern: series diverges at z=1 for b >= 1")
    out = _hyp2f1_half(b, z)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# quadrature and geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def integrate(self, f, lo, hi):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        return half * np.dot(self.weights, f(mid + half * self.nodes))

    def points(self, lo, hi):
        """Mapped nodes and scaled weights on ``[lo, hi]``."""
        half = 0.5 * (hi - lo)
        return 0.5 * (hi + lo) + half * self.nodes, half * self.weights


@lru_cache(maxsize=None)
def quadrature_rule(order: int) -> QuadratureRule:
    if order < 2:
        raise ValueError("quadrature order must be >= 2")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights, order)


def gauss_legendre(f, lo: float, hi: float, order: int = 64) -> float:
    """Integrate ``f`` over ``[lo, hi]`` with an ``order``-point Gauss-Legendre rule.

    ``f`` must accept a numpy array of abscissae.
    """
    return float(quadrature_rule(order).integrate(f, lo, hi))


def sphere_volume(d: int, R=1.0):
    """Volume of the d-ball of radius ``R``."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * np.asarray(R, dtype=float) ** d


def sphere_surface(d: int, r=1.0):
    """Surface measure of the sphere of radius ``r`` in d dimensions, d * v_d(1) * r^(d-1)."""
    return d * math.pi ** (d / 2) / math.gamma(d / 2 + 1) * np.asarray(r, dtype=float) ** (d - 1)
