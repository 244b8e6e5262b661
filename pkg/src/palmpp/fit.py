"""Maximum Palm likelihood estimation for the Thomas, Matern and void models."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .core import (MaternParams, PointPattern, ThomasParams, VoidParams, Window,
                   pairwise_distances, params_class, pattern_intensity)
from .palm import matern_sibling_cdf, palm_intensity, thomas_sibling_cdf
from .specfun import quadrature_rule, sphere_surface, sphere_volume

log = logging.getLogger(__name__)

FIT_MODELS = ("thomas", "matern", "void")


class OptimizationError(RuntimeError):
    """Every start of the optimizer failed; ``trace`` holds the attempts."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class OptimizerConfig:
    max_iter: int = 500
    tol: float = 1e-6
    restarts: int = 3


@dataclass(frozen=True)
class FitConfig:
    """Settings for :func:`fit_model`.

    ``t`` is the truncation distance, or ``"auto"`` to pick it from the
    pattern (see :func:`choose_truncation`). ``bounds`` maps parameter names
    to ``(lo, hi)``; missing names get data-scaled defaults. With
    ``edge_correction`` the likelihood integral is weighted by the window's
    set-covariance fraction; distances themselves are never corrected.
    """

    model: str
    t: float | str = "auto"
    start: object = None
    bounds: dict = field(default_factory=dict)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    edge_correction: bool = True
    quad_order: int = 64

    def __post_init__(self):
        if self.model not in FIT_MODELS:
            raise ValueError(f"model must be one of {FIT_MODELS}, got {self.model!r}")
        if self.t != "auto" and not (isinstance(self.t, (int, float)) and self.t > 0):
            raise ValueError("t must be positive or 'auto'")
        for name, (lo, hi) in self.bounds.items():
            if not (0 < lo < hi):
                raise ValueError(f"bounds for {name} must satisfy 0 < lo < hi")


@dataclass(frozen=True)
class FitResult:
    params_hat: object
    loglik: float
    n_pairs_used: int
    t: float
    converged: bool
    iterations: int
    n_points: int
    derived: dict = field(default_factory=dict)
    trace: tuple = ()

    @property
    def model(self) -> str:
        return self.params_hat.model

    def to_dict(self) -> dict:
        out = {"model": self.model, **self.params_hat.to_dict(),
               "loglik": self.loglik, "t": self.t, "converged": self.converged,
               "iterations": self.iterations, "n_pairs_used": self.n_pairs_used,
               "n_points": self.n_points}
        out.update(self.derived)
        return out


# ---------------------------------------------------------------------------
# likelihood
# ---------------------------------------------------------------------------

def _breakpoint(params, t):
    if isinstance(params, (VoidParams, MaternParams)):
        return min(2.0 * params.R, t)
    # Gaussian sibling term is below 1e-16 of its peak past 12 sigma
    return min(12.0 * params.sigma, t)


def palm_integral(params, t: float, d: int = 2, window: Window | None = None,
                  order: int = 64) -> float:
    """int_0^t lambda(r) s_d(r) dr, optionally weighted by the window covariance fraction.

    Thomas and Matern use closed forms when no window weighting is asked for;
    the void model and every weighted integral use Gauss-Legendre, split at
    the point where the Palm intensity turns flat (2R) or negligible.
    """
    if window is None:
        if isinstance(params, ThomasParams):
            return params.D * params.nu * sphere_volume(d, t) + params.nu * thomas_sibling_cdf(t, params.sigma, d)
        if isinstance(params, MaternParams):
            return params.D * params.nu * sphere_volume(d, t) + params.nu * matern_sibling_cdf(t, params.R, d)
    rule = quadrature_rule(order)
    b = _breakpoint(params, t)
    x, w = rule.points(0.0, b)
    f = palm_intensity(x, params, d) * sphere_surface(d, x)
    if window is not None:
        f = f * window.covariance_fraction(x)
    total = float(w @ f)
    if b < t:
        if window is None:
            # constant tail
            flat = float(palm_intensity(t, params, d)) if not isinstance(params, ThomasParams) else params.D * params.nu
            total += flat * (sphere_volume(d, t) - sphere_volume(d, b))
        else:
            x, w = rule.points(b, t)
            f = palm_intensity(x, params, d) * sphere_surface(d, x) * window.covariance_fraction(x)
            total += float(w @ f)
    return total


def palm_loglik(model, params, distances, n: int, t: float, d: int = 2,
                window: Window | None = None, order: int = 64) -> float:
    """Palm log-likelihood of truncated pair distances.

    ``distances`` are unordered pair distances (as from
    :func:`~palmpp.core.pairwise_distances`), each standing for the two ordered
    pairs it represents::

        2 * sum log(n lambda(r_i)) - n * int_0^t lambda(r) s_d(r) dr

    Raises ``ValueError`` for NaN parameters, distances beyond ``t`` or a
    non-positive Palm intensity.
    """
    if isinstance(model, str):
        if not isinstance(params, params_class(model)):
            raise ValueError(f"params do not match model {model!r}")
    if np.any(np.isnan(params.to_array())):
        raise ValueError("NaN parameters")
    r = np.asarray(distances, dtype=float)
    if n < 2:
        raise ValueError("need n >= 2")
    if r.size and r.max() > t * (1 + 1e-12):
        raise ValueError("all distances must be <= t")
    lam = palm_intensity(r, params, d)
    if np.any(~(lam > 0)):
        raise ValueError("non-positive Palm intensity")
    return float(2.0 * np.sum(np.log(n * lam)) - n * palm_integral(params, t, d, window, order))


# ---------------------------------------------------------------------------
# starting values, bounds, truncation
# ---------------------------------------------------------------------------

NU_FLOOR = 0.5


def default_start(model: str, p: PointPattern, t: float):
    """Moment-style starting values.

    Cluster models take nu0 from the excess of neighbours within ``t`` over
    the Poisson expectation (floored at ``NU_FLOOR``), D0 = intensity / nu0 and
    a length scale of t / 4. The void model takes lambda0 = 1.5 * intensity,
    R0 = t / 4 and D0 = log(lambda0 / intensity) / v(R0).
    """
    if p.n < 2:
        raise ValueError("insufficient points: need at least 2")
    d = p.dim
    rho = pattern_intensity(p)
    if model in ("thomas", "matern"):
        pairs = pairwise_distances(p, t).size
        expected = rho * sphere_volume(d, t) * float(p.window.covariance_fraction(t / 2))
        nu0 = max(2.0 * pairs / p.n - expected, NU_FLOOR)
        cls = ThomasParams if model == "thomas" else MaternParams
        return cls(rho / nu0, nu0, t / 4.0)
    if model == "void":
        lam0 = 1.5 * rho
        R0 = t / 4.0
        D0 = max(-math.log(rho / lam0) / float(sphere_volume(d, R0)), 1e-8)
        return VoidParams(D0, R0, lam0)
    raise ValueError(f"unknown model {model!r}")


def default_bounds(model: str, p: PointPattern, t: float) -> dict:
    rho = max(pattern_intensity(p), 1.0 / p.window.volume)
    vt = float(sphere_volume(p.dim, t))
    if model in ("thomas", "matern"):
        length = "sigma" if model == "thomas" else "R"
        return {"D": (rho * 1e-6, rho * 1e3), "nu": (1e-3, max(10.0 * p.n, 10.0)),
                length: (t * 1e-3, t)}
    return {"D": (1e-6 / vt, 1e4 / vt), "R": (t * 1e-3, t), "lam": (rho * 0.5, rho * 1e3)}


def choose_truncation(model: str, p: PointPattern, other: PointPattern | None = None,
                      quantile: float = 0.9) -> float:
    """Automatic truncation distance.

    Cluster models use the class-cover summary against ``other`` (or against
    a regular reference lattice when there is no second class), capped at half
    the shortest window side. Void models use a quarter of the shortest side,
    which leaves room for the flat part of the Palm intensity past 2R.
    """
    from .cccd import suggested_truncation

    side = float(np.min(p.window.sides))
    if model == "void":
        return side / 4.0
    return min(suggested_truncation(p, other, quantile), side / 2.0)


# ---------------------------------------------------------------------------
# optimisation
# ---------------------------------------------------------------------------

def _objective(cls, lo, hi, r, n, t, d, window, order):
    def f(z):
        if np.any(z < lo) or np.any(z > hi) or not np.all(np.isfinite(z)):
            return np.inf
        params = cls.from_array(np.exp(z))
        lam = palm_intensity(r, params, d)
        if np.any(~(lam > 0)):
            return np.inf
        val = 2.0 * np.sum(np.log(n * lam)) - n * palm_integral(params, t, d, window, order)
        return -val if np.isfinite(val) else np.inf
    return f


def _start_grid(model, p, t, start, restarts):
    if start is not None:
        grid = [start]
    else:
        base = default_start(model, p, t)
        grid = [base]
        arr = base.to_array()
        cls = type(base)
        if model == "void":
            idx = cls.names().index("R")
            scales = (0.5, 1.5)
        else:
            idx = cls.names().index("sigma" if model == "thomas" else "R")
            scales = (0.25, 0.5)
        for s in scales:
            a = arr.copy()
            a[idx] *= s
            if model == "void":
                # keep the thinned fraction of the base start
                a[0] = arr[0] / s ** p.dim
            grid.append(cls.from_array(a))
    return grid[:max(restarts, 1)]


def _simplex(z0, step=0.5):
    k = z0.size
    simplex = np.tile(z0, (k + 1, 1))
    for i in range(k):
        simplex[i + 1, i] += step
    return simplex


def fit_model(p: PointPattern, cfg: FitConfig, other: PointPattern | None = None) -> FitResult:
    """Maximise the Palm likelihood over log-parameters with Nelder-Mead.

    Each start in the start grid is optimised; the best log-likelihood wins,
    ties going to fewer iterations. ``other`` is the second class used by the
    automatic truncation rule, if any.
    """
    if p.n < 2:
        raise ValueError("insufficient points: need at least 2")
    d = p.dim
    t = choose_truncation(cfg.model, p, other) if cfg.t == "auto" else float(cfg.t)
    if t > float(np.min(p.window.sides)) / 2.0:
        warnings.warn("truncation distance exceeds half the shortest window side", stacklevel=2)
    cls = params_class(cfg.model)
    bounds = {**default_bounds(cfg.model, p, t), **cfg.bounds}
    names = cls.names()
    ext = dict(zip(cls.external_names(), names))
    bounds = {ext.get(k, k): v for k, v in bounds.items()}
    lo = np.log([bounds[nm][0] for nm in names])
    hi = np.log([bounds[nm][1] for nm in names])

    r = pairwise_distances(p, t)
    window = p.window if cfg.edge_correction else None
    obj = _objective(cls, lo, hi, r, p.n, t, d, window, cfg.quad_order)
    opt = cfg.optimizer

    trace = []
    best = None
    for k, start in enumerate(_start_grid(cfg.model, p, t, cfg.start, opt.restarts)):
        z0 = np.clip(np.log(start.to_array()), lo + 1e-9, hi - 1e-9)
        res = minimize(obj, z0, method="Nelder-Mead",
                       options={"maxiter": opt.max_iter, "initial_simplex": _simplex(z0),
                                "xatol": 1e-8, "fatol": opt.tol})
        iters = int(res.nit)
        # one restart from the optimum guards against a collapsed simplex
        if np.isfinite(res.fun) and iters < opt.max_iter:
            res2 = minimize(obj, res.x, method="Nelder-Mead",
                            options={"maxiter": opt.max_iter - iters,
                                     "initial_simplex": _simplex(res.x, 0.1),
                                     "xatol": 1e-8, "fatol": opt.tol})
            if res2.fun <= res.fun:
                res, iters = res2, iters + int(res2.nit)
            else:
                iters += int(res2.nit)
        spread = float(np.ptp(res.final_simplex[1])) if np.isfinite(res.fun) else np.inf
        converged = bool(np.isfinite(res.fun) and spread < opt.tol)
        entry = {"start": start.to_dict(), "loglik": -float(res.fun),
                 "iterations": iters, "converged": converged, "x": np.exp(res.x)}
        trace.append(entry)
        log.debug("start %d: loglik=%.6f iters=%d converged=%s", k, -res.fun, iters, converged)
        if not np.isfinite(res.fun):
            continue
        if best is None or (-res.fun, -iters) > (best["loglik"], -best["iterations"]):
            best = entry
    if best is None:
        raise OptimizationError("optimization failed", trace)
    params = cls.from_array(best["x"])
    derived = {}
    if cfg.model in ("thomas", "matern"):
        derived["daughter_density"] = params.D * params.nu
    else:
        derived["retained_fraction"] = float(math.exp(-params.D * float(sphere_volume(d, params.R))))
    return FitResult(params, best["loglik"], int(r.size), t, best["converged"],
                     best["iterations"], p.n, derived, tuple(trace))
