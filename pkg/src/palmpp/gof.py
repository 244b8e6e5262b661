"""Empty space function F(r) and simulation envelopes for model checking."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PointPattern, Window, as_rng, nearest_distances
from .sim import simulate

DEFAULT_GRID = 128


@dataclass(frozen=True)
class EsfCurve:
    radii: np.ndarray
    F: np.ndarray
    kind: str  # "observed", "simulated", "lo" or "hi"


@dataclass(frozen=True)
class Envelope:
    observed: EsfCurve
    lo: EsfCurve
    hi: EsfCurve
    inside_fraction: float

    def rows(self):
        for r, o, lo, hi in zip(self.observed.radii, self.observed.F, self.lo.F, self.hi.F):
            yield float(r), float(o), float(lo), float(hi)


def _check_radii(radii) -> np.ndarray:
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0:
        raise ValueError("radii must be a non-empty 1D sequence")
    if np.any(radii < 0) or np.any(np.diff(radii) < 0):
        raise ValueError("radii must be non-negative and ascending")
    return radii


def grid_locations(window: Window, rmax: float, grid: int = DEFAULT_GRID) -> np.ndarray:
    """Centres of a ``grid``-per-side lattice over the window eroded by ``rmax``."""
    try:
        inner = window.eroded(rmax)
    except ValueError:
        raise ValueError(
            f"window too small to erode by {rmax}; use a smaller maximum radius") from None
    axes = [lo + (np.arange(grid) + 0.5) * (hi - lo) / grid
            for lo, hi in zip(inner.lower, inner.upper)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, window.dim)


def _esf_from_locations(points, locs, radii) -> np.ndarray:
    if len(points) == 0:
        return np.zeros(radii.size)
    dist = np.sort(nearest_distances(locs, points))
    return np.searchsorted(dist, radii, side="right") / dist.size


def empty_space_function(p: PointPattern, radii, grid: int = DEFAULT_GRID) -> EsfCurve:
    """Grid estimate of F(r) with minus-sampling border correction.

    Test locations sit on a regular grid inside the window eroded by
    ``max(radii)``, so every disc of radius r around them lies in the window.
    """
    radii = _check_radii(radii)
    if p.n == 0:
        raise ValueError("empty space function needs a nonempty pattern")
    locs = grid_locations(p.window, float(radii[-1]), grid)
    return EsfCurve(radii, _esf_from_locations(p.points, locs, radii), "observed")


def envelope_rank(nsim: int, level: float = 0.95) -> int:
    """Order statistic k whose pointwise envelope [X_(k), X_(nsim+1-k)] covers at least ``level``.

    An observation exchangeable with the simulations falls below X_(k) with
    probability k / (nsim + 1), so k = floor((1 - level) / 2 * (nsim + 1)),
    and at least 1 so that small ``nsim`` gives the min/max envelope.
    """
    return max(int(math.floor((1.0 - level) / 2.0 * (nsim + 1) + 1e-9)), 1)


def gof_envelope(p: PointPattern, fit, nsim: int, radii, rng, grid: int = DEFAULT_GRID) -> Envelope:
    """Pointwise 2.5%/97.5% envelope of F(r) over ``nsim`` patterns simulated from a fit.

    ``fit`` is a :class:`~palmpp.fit.FitResult` or a bare parameter record.
    The bounds are the k-th smallest and largest simulated values with k from
    :func:`envelope_rank`, so pointwise coverage is at least 95%.
    """
    if nsim < 2:
        raise ValueError("nsim must be >= 2")
    params = getattr(fit, "params_hat", fit)
    radii = _check_radii(radii)
    observed = empty_space_function(p, radii, grid)
    locs = grid_locations(p.window, float(radii[-1]), grid)
    rng = as_rng(rng)
    sims = np.empty((nsim, radii.size))
    for i in range(nsim):
        q = simulate(params, p.window, rng.child(i))
        sims[i] = _esf_from_locations(q.points, locs, radii)
    k = envelope_rank(nsim)
    sims.sort(axis=0)
    lo, hi = sims[k - 1], sims[nsim - k]
    inside = float(np.mean((observed.F >= lo) & (observed.F <= hi)))
    return Envelope(observed, EsfCurve(radii, lo, "lo"), EsfCurve(radii, hi, "hi"), inside)
