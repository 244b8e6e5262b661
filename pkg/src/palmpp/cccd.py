"""Class cover catch digraph (CCCD) ball radii and the truncation distance they suggest."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PointPattern, Window, nearest_distances

DEFAULT_QUANTILE = 0.9


@dataclass(frozen=True)
class CccdSummary:
    radii_x: np.ndarray
    radii_y: np.ndarray
    suggested_t: float
    quantile: float = DEFAULT_QUANTILE

    def to_dict(self) -> dict:
        return {"suggested_t": self.suggested_t, "quantile": self.quantile,
                "n_x": int(self.radii_x.size), "n_y": int(self.radii_y.size),
                "radii_x": self.radii_x.tolist(), "radii_y": self.radii_y.tolist()}


def cccd_radii(x: PointPattern, y: PointPattern, quantile: float = DEFAULT_QUANTILE) -> CccdSummary:
    """Per-point CCCD ball radii: each point's distance to the nearest point of the other class.

    ``suggested_t`` is the ``quantile`` of the pooled radii. Only the radii are
    computed; the digraph itself is never built.
    """
    if x.n == 0 or y.n == 0:
        raise ValueError("CCCD requires two nonempty classes")
    if x.window != y.window:
        raise ValueError("both classes must share a window")
    if not 0 < quantile <= 1:
        raise ValueError("quantile must lie in (0, 1]")
    rx = nearest_distances(x.points, y.points)
    ry = nearest_distances(y.points, x.points)
    t = float(np.quantile(np.concatenate([rx, ry]), quantile))
    if not t > 0:
        raise ValueError("CCCD radii are all zero; classes overlap exactly")
    return CccdSummary(rx, ry, t, quantile)


def reference_lattice(window: Window, n: int) -> PointPattern:
    """A regular lattice of about ``n`` cell centres filling the window."""
    n = max(int(n), 1)
    d = window.dim
    sides = window.sides
    spacing = (window.volume / n) ** (1.0 / d)
    axes = []
    for lo, s in zip(window.lower, sides):
        k = max(int(round(s / spacing)), 1)
        axes.append(lo + (np.arange(k) + 0.5) * s / k)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    return PointPattern(grid, window)


def suggested_truncation(p: PointPattern, other: PointPattern | None = None,
                         quantile: float = DEFAULT_QUANTILE) -> float:
    """CCCD truncation for ``p`` against ``other``, or against a reference lattice of equal size."""
    if other is None or other.n == 0:
        other = reference_lattice(p.window, p.n)
    return cccd_radii(p, other, quantile).suggested_t
