"""Samplers for the Poisson, Thomas, Matern cluster and void processes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import (MaternParams, PointPattern, PoissonParams, RngStream, ThomasParams,
                   VoidParams, Window, as_rng, nearest_distances)


class Realization(NamedTuple):
    """A simulated pattern plus the latent parents that generated it."""

    pattern: PointPattern
    parents: np.ndarray
    # index into ``parents`` for each emitted point (-1 when not applicable)
    parent_index: np.ndarray


@dataclass(frozen=True)
class SimConfig:
    params: object
    window: Window
    rng: RngStream
    buffer: float | None = None

    def __post_init__(self):
        if self.buffer is not None and self.buffer < 0:
            raise ValueError("buffer must be non-negative")

    def run(self) -> PointPattern:
        return simulate(self.params, self.window, self.rng, self.buffer)


def default_buffer(params) -> float:
    """Parent margin: 6 sigma for Thomas, R for Matern and void, 0 for Poisson."""
    if isinstance(params, ThomasParams):
        return 6.0 * params.sigma
    if isinstance(params, (MaternParams, VoidParams)):
        return params.R
    return 0.0


def _uniform_in(window: Window, n: int, rng: RngStream) -> np.ndarray:
    u = rng.uniform((n, window.dim))
    return np.asarray(window.lower) + u * window.sides


def simulate_poisson(lam: float, window: Window, rng) -> PointPattern:
    rng = as_rng(rng)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    n = rng.poisson(lam * window.volume)
    return PointPattern(_uniform_in(window, n, rng), window)


def _cluster(params, window: Window, buffer, rng, offsets) -> Realization:
    rng = as_rng(rng)
    if buffer is None:
        buffer = default_buffer(params)
    big = window.buffered(buffer)
    n_par = rng.poisson(params.D * big.volume)
    parents = _uniform_in(big, n_par, rng)
    counts = rng.poisson(params.nu, n_par)
    idx = np.repeat(np.arange(n_par), counts)
    daughters = parents[idx] + offsets(idx.size, window.dim, rng)
    keep = window.contains(daughters)
    return Realization(PointPattern(daughters[keep], window), parents, idx[keep])


def _gaussian_offsets(sigma):
    def draw(n, d, rng):
        return sigma * rng.normal((n, d))
    return draw


def _ball_offsets(R):
    def draw(n, d, rng):
        direction = rng.normal((n, d))
        norm = np.linalg.norm(direction, axis=1, keepdims=True)
        norm[norm == 0] = 1.0
        radius = R * rng.uniform(n) ** (1.0 / d)
        return direction / norm * radius[:, None]
    return draw


def simulate_thomas_realization(params: ThomasParams, window: Window, rng, buffer=None) -> Realization:
    return _cluster(params, window, buffer, rng, _gaussian_offsets(params.sigma))


def simulate_matern_realization(params: MaternParams, window: Window, rng, buffer=None) -> Realization:
    return _cluster(params, window, buffer, rng, _ball_offsets(params.R))


def simulate_void_realization(params: VoidParams, window: Window, rng, buffer=None) -> Realization:
    rng = as_rng(rng)
    if buffer is None:
        buffer = default_buffer(params)
    n_d = rng.poisson(params.lam * window.volume)
    daughters = _uniform_in(window, n_d, rng)
    big = window.buffered(buffer)
    n_par = rng.poisson(params.D * big.volume)
    parents = _uniform_in(big, n_par, rng)
    if n_par and n_d:
        keep = nearest_distances(daughters, parents) >= params.R
    else:
        keep = np.ones(n_d, dtype=bool)
    pattern = PointPattern(daughters[keep], window)
    return Realization(pattern, parents, np.full(pattern.n, -1))


def simulate_thomas(params: ThomasParams, window: Window, buffer=None, rng=None) -> PointPattern:
    return simulate_thomas_realization(params, window, rng, buffer).pattern


def simulate_matern(params: MaternParams, window: Window, buffer=None, rng=None) -> PointPattern:
    return simulate_matern_realization(params, window, rng, buffer).pattern


def simulate_void(params: VoidParams, window: Window, buffer=None, rng=None) -> PointPattern:
    return simulate_void_realization(params, window, rng, buffer).pattern


def simulate(params, window: Window, rng, buffer=None) -> PointPattern:
    """Draw one pattern from any supported parameter record."""
    if isinstance(params, PoissonParams):
        return simulate_poisson(params.lam, window, rng)
    if isinstance(params, ThomasParams):
        return simulate_thomas(params, window, buffer, rng)
    if isinstance(params, MaternParams):
        return simulate_matern(params, window, buffer, rng)
    if isinstance(params, VoidParams):
        return simulate_void(params, window, buffer, rng)
    raise TypeError(f"cannot simulate from {type(params).__name__}")
