"""Windows, point patterns, process parameters and seeded random streams."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import ClassVar, Sequence

import numpy as np


@dataclass(frozen=True)
class Window:
    """Axis-aligned box ``[lower, upper]`` in d dimensions."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != len(upper) or len(lower) < 1:
            raise ValueError("window bounds must have the same length d >= 1")
        if not all(math.isfinite(v) for v in lower + upper):
            raise ValueError("window bounds must be finite")
        if any(u <= lo for lo, u in zip(lower, upper)):
            raise ValueError("window upper bounds must exceed lower bounds")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def unit(cls, d: int = 2) -> "Window":
        return cls((0.0,) * d, (1.0,) * d)

    @classmethod
    def from_string(cls, text: str) -> "Window":
        """Parse ``"x0,y0,x1,y1"`` (lower corner then upper corner)."""
        try:
            vals = [float(v) for v in text.replace(" ", "").split(",") if v]
        except ValueError as exc:
            raise ValueError(f"cannot parse window {text!r}") from exc
        if len(vals) < 2 or len(vals) % 2:
            raise ValueError(f"window needs 2*d comma-separated numbers, got {text!r}")
        d = len(vals) // 2
        return cls(tuple(vals[:d]), tuple(vals[d:]))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def sides(self) -> np.ndarray:
        return np.subtract(self.upper, self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)

    def buffered(self, margin: float) -> "Window":
        if margin < 0:
            raise ValueError("buffer must be non-negative")
        return Window(tuple(v - margin for v in self.lower),
                      tuple(v + margin for v in self.upper))

    def eroded(self, margin: float) -> "Window":
        lo = tuple(v + margin for v in self.lower)
        hi = tuple(v - margin for v in self.upper)
        return Window(lo, hi)

    def to_list(self) -> list[float]:
        return list(self.lower) + list(self.upper)

    def covariance_fraction(self, r):
        """Isotropized set covariance of the box divided by its volume.

        The fraction of pairs at separation ``r`` whose second point stays in
        the window. Exact for ``r`` up to the shortest side.
        """
        r = np.asarray(r, dtype=float)
        d = self.dim
        sides = self.sides
        # elementary symmetric sums of the sides, mixed with E|u_1...u_k|
        # for a uniform direction u: Gamma(d/2) / (pi^(k/2) Gamma((d+k)/2))
        e = np.zeros(d + 1)
        e[0] = 1.0
        for s in sides:
            e[1:] = e[1:] + s * e[:-1]
        total = np.zeros_like(r)
        for k in range(d + 1):
            m = math.gamma(d / 2) / (math.pi ** (k / 2) * math.gamma((d + k) / 2))
            total = total + (-r) ** k * e[d - k] * m
        return np.clip(total / self.volume, 0.0, 1.0)


class PointPattern:
    """Event locations inside a window, with an optional per-point mark.

    Immutable: the coordinate and mark arrays are read-only views.
    """

    def __init__(self, points, window: Window, marks=None):
        pts = np.array(points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, window.dim)
        if pts.ndim == 1 and window.dim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[1] != window.dim:
            raise ValueError(
                f"points must have shape (n, {window.dim}), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if not np.all(window.contains(pts)):
            raise ValueError("all points must lie inside the window")
        pts.setflags(write=False)
        self._points = pts
        self._window = window
        if marks is not None:
            marks = np.array(marks, dtype=object)
            if marks.shape != (pts.shape[0],):
                raise ValueError("marks must have one entry per point")
            marks.setflags(write=False)
        self._marks = marks

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def window(self) -> Window:
        return self._window

    @property
    def marks(self):
        return self._marks

    @property
    def n(self) -> int:
        return self._points.shape[0]

    @property
    def dim(self) -> int:
        return self._window.dim

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"PointPattern(n={self.n}, window={self._window})"

    def split_by_mark(self) -> dict:
        """One unmarked pattern per distinct mark, in sorted mark order."""
        if self._marks is None:
            raise ValueError("pattern has no marks")
        out = {}
        for m in sorted(set(self._marks.tolist()), key=str):
            keep = self._marks == m
            out[m] = PointPattern(self._points[keep], self._window)
        return out

    def scaled(self, c: float) -> "PointPattern":
        w = Window(tuple(c * v for v in self._window.lower),
                   tuple(c * v for v in self._window.upper))
        return PointPattern(self._points * c, w, self._marks)

    def translated(self, shift) -> "PointPattern":
        shift = np.asarray(shift, dtype=float)
        w = Window(tuple(np.add(self._window.lower, shift)),
                   tuple(np.add(self._window.upper, shift)))
        return PointPattern(self._points + shift, w, self._marks)


# ---------------------------------------------------------------------------
# process parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Params:
    model: ClassVar[str] = ""
    # external (file/CLI) name -> attribute name
    aliases: ClassVar[dict] = {}

    def __post_init__(self):
        for f in fields(self):
            v = float(getattr(self, f.name))
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{self.model} parameter {f.name} must be positive, got {v}")
            object.__setattr__(self, f.name, v)

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def external_names(cls) -> tuple[str, ...]:
        inv = {v: k for k, v in cls.aliases.items()}
        return tuple(inv.get(n, n) for n in cls.names())

    def to_dict(self) -> dict:
        inv = {v: k for k, v in self.aliases.items()}
        return {inv.get(f.name, f.name): getattr(self, f.name) for f in fields(self)}

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)])

    @classmethod
    def from_array(cls, values):
        return cls(*[float(v) for v in values])

    @classmethod
    def from_dict(cls, d: dict):
        kw = {cls.aliases.get(k, k): v for k, v in d.items()}
        missing = set(cls.names()) - set(kw)
        if missing:
            raise ValueError(f"{cls.model} parameters missing: {sorted(missing)}")
        return cls(**{k: kw[k] for k in cls.names()})

    def intensity(self, d: int = 2) -> float:
        """Expected number of observed points per unit volume."""
        raise NotImplementedError


@dataclass(frozen=True)
class PoissonParams(_Params):
    lam: float
    model: ClassVar[str] = "poisson"
    aliases: ClassVar[dict] = {"lambda": "lam"}

    def intensity(self, d: int = 2) -> float:
        return self.lam


@dataclass(frozen=True)
class ThomasParams(_Params):
    D: float
    nu: float
    sigma: float
    model: ClassVar[str] = "thomas"

    def intensity(self, d: int = 2) -> float:
        return self.D * self.nu


@dataclass(frozen=True)
class MaternParams(_Params):
    D: float
    nu: float
    R: float
    model: ClassVar[str] = "matern"

    def intensity(self, d: int = 2) -> float:
        return self.D * self.nu


@dataclass(frozen=True)
class VoidParams(_Params):
    D: float
    R: float
    lam: float
    model: ClassVar[str] = "void"
    aliases: ClassVar[dict] = {"lambda": "lam"}

    def intensity(self, d: int = 2) -> float:
        v = math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self.R ** d
        return self.lam * math.exp(-self.D * v)


PARAM_TYPES = {cls.model: cls for cls in (PoissonParams, ThomasParams, MaternParams, VoidParams)}


def params_class(model: str):
    try:
        return PARAM_TYPES[model.lower()]
    except KeyError:
        raise ValueError(f"unknown model {model!r}; expected one of {sorted(PARAM_TYPES)}") from None


def make_params(model: str, **values):
    """Build a parameter record from external names, e.g. ``make_params("void", D=10, R=0.075, **{"lambda": 300})``."""
    return params_class(model).from_dict(values)


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------

@dataclass
class RngStream:
    """Seeded random stream; ``(seed, stream)`` fully determines the draws."""

    seed: int
    stream: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.seed = int(self.seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = int(self.stream) & 0xFFFFFFFFFFFFFFFF
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, stream: int) -> "RngStream":
        """An independent stream keyed by ``(seed, parent stream, stream)``."""
        return RngStream(_mix(self.seed, self.stream), stream)

    def uniform(self, size=None) -> np.ndarray:
        return self._gen.random(size)

    def poisson(self, lam, size=None):
        return self._gen.poisson(lam, size)

    def integers(self, high, size=None):
        return self._gen.integers(0, high, size)

    def normal(self, size) -> np.ndarray:
        """Standard normal draws by the Box-Muller transform."""
        n = int(np.prod(size))
        m = (n + 1) // 2
        u1 = 1.0 - self._gen.random(m)  # (0, 1]
        u2 = self._gen.random(m)
        rad = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([rad * np.cos(2 * np.pi * u2), rad * np.sin(2 * np.pi * u2)])
        return z[:n].reshape(size)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


def _mix(a: int, b: int) -> int:
    # splitmix64 on the pair, so nested children do not collide with siblings
    x = (a * 0x9E3779B97F4A7C15 + b + 0x632BE59BD9B4E019) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


def as_rng(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        raise ValueError("a seed or RngStream is required")
    return RngStream(int(rng))


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def pairwise_distances(p: PointPattern, t: float = math.inf, block: int = 512) -> np.ndarray:
    """Sorted unordered pair distances no larger than ``t``.

    Plain Euclidean distances: no edge correction and no periodic wrapping.
    """
    if not t > 0:
        raise ValueError("truncation distance must be positive")
    if p.n < 2:
        raise ValueError("insufficient points: need at least 2")
    x = p.points
    n = p.n
    parts = []
    for i0 in range(0, n - 1, block):
        i1 = min(i0 + block, n - 1)
        rows = x[i0:i1]
        diff = rows[:, None, :] - x[None, i0:, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        # keep j > i only
        ii = np.arange(i1 - i0)[:, None]
        jj = np.arange(n - i0)[None, :]
        mask = (jj > ii) & (dist <= t)
        parts.append(dist[mask])
    out = np.concatenate(parts) if parts else np.empty(0)
    out.sort()
    return out


def nearest_distances(a, b, block: int = 1024) -> np.ndarray:
    """Distance from each row of ``a`` to its nearest row of ``b`` (brute force)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty(a.shape[0])
    for i0 in range(0, a.shape[0], block):
        diff = a[i0:i0 + block, None, :] - b[None, :, :]
        out[i0:i0 + block] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).min(axis=1))
    return out


def pattern_intensity(p: PointPattern) -> float:
    """Observed points per unit volume, ``n / |W|``."""
    return p.n / p.window.volume


def check_truncation(t: float, window: Window) -> float:
    t = float(t)
    if not (math.isfinite(t) and t > 0):
        raise ValueError("truncation distance must be positive and finite")
    return t


def as_points_array(X, dim: int | None = None) -> np.ndarray:
    """Validate an ``(n, d)`` coordinate array in the sklearn ``check_array`` spirit."""
    if isinstance(X, PointPattern):
        return X.points
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D array of coordinates, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"expected {dim} coordinate columns, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("coordinates must be finite")
    return arr


def as_pattern(X, window: Window | Sequence | None = None) -> PointPattern:
    if isinstance(X, PointPattern):
        if window is not None and _as_window(window) != X.window:
            raise ValueError("window does not match the pattern's window")
        return X
    if window is None:
        raise ValueError("a window is required for a raw coordinate array")
    w = _as_window(window)
    return PointPattern(as_points_array(X, w.dim), w)


def _as_window(window) -> Window:
    if isinstance(window, Window):
        return window
    if isinstance(window, str):
        return Window.from_string(window)
    vals = list(window)
    if len(vals) == 2 and np.ndim(vals[0]) == 1:
        return Window(tuple(vals[0]), tuple(vals[1]))
    return Window.from_string(",".join(str(v) for v in vals))
