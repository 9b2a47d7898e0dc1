"""Projections of finite approximations: orthogonal, diagonal, radial, co-radial.

Every projection maps an axis-aligned square onto an interval, computed
exactly from corner geometry, so the projection of a level-n approximation is
an exact finite union of intervals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress

from .intervals import IntervalUnion
from .model import RetentionSpec
from .rng import trial_seeds
from .tree import sample_many


def check_direction(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < math.pi / 2:
        raise ValueError(f"direction {alpha} outside the open range (0, pi/2)")
    return alpha


def _outside_unit_square(t) -> tuple[float, float]:
    tx, ty = float(t[0]), float(t[1])
    if 0.0 <= tx <= 1.0 and 0.0 <= ty <= 1.0:
        raise ValueError(f"centre {t} lies in the closed unit square")
    return tx, ty


class Orthogonal:
    """Projection along direction ``alpha`` onto the orthogonal line,
    parametrized by ``s = -x sin(alpha) + y cos(alpha)``."""

    kind = "orthogonal"

    def __init__(self, alpha: float):
        self.alpha = check_direction(alpha)
        self.sin, self.cos = math.sin(self.alpha), math.cos(self.alpha)

    def __call__(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        return -xy[..., 0] * self.sin + xy[..., 1] * self.cos

    def square_intervals(self, lower: np.ndarray, side: float):
        x0, y0 = lower[:, 0], lower[:, 1]
        lo = -(x0 + side) * self.sin + y0 * self.cos
        hi = -x0 * self.sin + (y0 + side) * self.cos
        return lo, hi

    def range(self) -> tuple[float, float]:
        return -self.sin, self.cos

    def describe(self) -> str:
        return f"orthogonal alpha={self.alpha!r}"


class Diagonal:
    """Projection along ``alpha`` onto the anti-diagonal from (0, 1) to (1, 0),
    parametrized by normalized arclength in [0, 1]."""

    kind = "diagonal"

    def __init__(self, alpha: float):
        self.alpha = check_direction(alpha)
        s, c = math.sin(self.alpha), math.cos(self.alpha)
        self.a = s / (s + c)
        self.b = c / (s + c)
        self.t0 = c / (s + c)  # image of the origin

    def __call__(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        return self.t0 + self.a * xy[..., 0] - self.b * xy[..., 1]

    def square_intervals(self, lower: np.ndarray, side: float):
        x0, y0 = lower[:, 0], lower[:, 1]
        lo = self.t0 + self.a * x0 - self.b * (y0 + side)
        hi = self.t0 + self.a * (x0 + side) - self.b * y0
        return lo, hi

    def range(self) -> tuple[float, float]:
        return 0.0, 1.0

    def describe(self) -> str:
        return f"diagonal alpha={self.alpha!r}"


class Radial:
    """``x -> angle of the ray from t to x``, measured continuously around the
    bearing from ``t`` to the centre of the unit square."""

    kind = "radial"

    def __init__(self, t):
        self.t = _outside_unit_square(t)
        self.ref = math.atan2(0.5 - self.t[1], 0.5 - self.t[0])

    def __call__(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        ang = np.arctan2(xy[..., 1] - self.t[1], xy[..., 0] - self.t[0]) - self.ref
        ang = (ang + math.pi) % (2 * math.pi) - math.pi
        return self.ref + ang

    def square_intervals(self, lower: np.ndarray, side: float):
        vals = np.stack([self(lower + off) for off in
                         ((0, 0), (side, 0), (0, side), (side, side))], axis=1)
        return vals.min(axis=1), vals.max(axis=1)

    def range(self) -> tuple[float, float]:
        lo, hi = self.square_intervals(np.zeros((1, 2)), 1.0)
        return float(lo[0]), float(hi[0])

    def describe(self) -> str:
        return f"radial t={self.t!r}"


class CoRadial:
    """``x -> |x - t|``."""

    kind = "coradial"

    def __init__(self, t):
        self.t = _outside_unit_square(t)

    def __call__(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        return np.hypot(xy[..., 0] - self.t[0], xy[..., 1] - self.t[1])

    def square_intervals(self, lower: np.ndarray, side: float):
        tx, ty = self.t
        x0, y0 = lower[:, 0], lower[:, 1]
        nx = np.clip(tx, x0, x0 + side)
        ny = np.clip(ty, y0, y0 + side)
        lo = np.hypot(nx - tx, ny - ty)
        fx = np.where(np.abs(x0 - tx) > np.abs(x0 + side - tx), x0, x0 + side)
        fy = np.where(np.abs(y0 - ty) > np.abs(y0 + side - ty), y0, y0 + side)
        hi = np.hypot(fx - tx, fy - ty)
        return lo, hi

    def range(self) -> tuple[float, float]:
        lo, hi = self.square_intervals(np.zeros((1, 2)), 1.0)
        return float(lo[0]), float(hi[0])

    def describe(self) -> str:
        return f"coradial t={self.t!r}"


def parse_kind(text: str):
    """``orthogonal:0.7``, ``diagonal:0.7``, ``radial:2,0.5``, ``coradial:2,0.5``."""
    name, _, arg = text.partition(":")
    vals = [float(v) for v in arg.split(",") if v.strip()]
    table = {"orthogonal": Orthogonal, "diagonal": Diagonal, "radial": Radial, "coradial": CoRadial}
    if name not in table:
        raise ValueError(f"unknown projection kind {name!r}")
    if name in ("orthogonal", "diagonal"):
        if len(vals) != 1:
            raise ValueError(f"{name} needs one angle")
        return table[name](vals[0])
    if len(vals) != 2:
        raise ValueError(f"{name} needs a centre x,y")
    return table[name](vals)


# Endpoints that coincide in exact arithmetic can differ by a few ulps once
# computed from different cells; gaps this small are treated as touching.
ROUNDING_GAP = 1e-12


def project_cells(coords: np.ndarray, side: float, kind) -> IntervalUnion:
    """Merged union of the projections of squares with lower corners
    ``coords * side`` (integer lattice coordinates) and the given side."""
    coords = np.asarray(coords)
    if len(coords) == 0:
        return IntervalUnion()
    if coords.shape[1] != 2:
        raise ValueError("projections act on planar cells")
    lo, hi = kind.square_intervals(coords.astype(float) * side, side)
    return IntervalUnion.from_arrays(lo, hi, ROUNDING_GAP)


def project_level(tree, n: int, kind) -> IntervalUnion:
    return project_cells(tree.cells(n), float(tree.M) ** -n, kind)


@dataclass
class Persistence:
    depths: list[int]
    frequency: list[float]
    survival: list[float]
    trials: int


def interval_persistence(spec: RetentionSpec, kind, J: tuple[float, float], max_depth: int,
                         trials: int, seed: int = 0, chunk: int = 50) -> Persistence:
    """Per-depth frequency that ``J`` lies in the projection of ``E_n``.

    Projections of nested compacta decrease, so once ``J`` escapes at some
    depth it stays out; deeper levels are skipped for that trial.
    """
    a, b = J
    lo, hi = kind.range()
    if not (lo <= a <= b <= hi):
        raise ValueError(f"J={J} outside the projection range [{lo}, {hi}]")
    seeds = trial_seeds(seed, trials)
    inside = np.zeros(max_depth + 1)
    alive = np.zeros(max_depth + 1)
    for i in range(0, trials, chunk):
        for tree in sample_many(spec, max_depth, seeds[i:i + chunk]):
            still = True
            for n in range(max_depth + 1):
                alive[n] += tree.count(n) > 0
                if still:
                    still = project_level(tree, n, kind).contains_interval(a, b)
                inside[n] += still
    return Persistence(list(range(max_depth + 1)), (inside / trials).tolist(),
                       (alive / trials).tolist(), trials)


def box_counts_cells(coords: np.ndarray, level: int, M: int, levels) -> np.ndarray:
    """Number of occupied M-adic boxes at each coarser level, from level-``level`` cells."""
    out = []
    for k in levels:
        if k > level:
            raise ValueError("cannot refine beyond the sampled level")
        if len(coords) == 0:
            out.append(0)
            continue
        parent = coords // (M ** (level - k))
        out.append(len(np.unique(parent, axis=0)))
    return np.asarray(out)


def box_counts_union(union: IntervalUnion, origin: float, M: int, levels) -> np.ndarray:
    """Number of mesh intervals ``[origin + j h, origin + (j+1) h)`` with
    ``h = M**-k`` meeting the union, for each ``k``."""
    out = []
    for k in levels:
        if union.is_empty:
            out.append(0)
            continue
        h = float(M) ** -k
        jlo = np.floor((union.lo - origin) / h + 1e-9).astype(np.int64)
        jhi = np.maximum(jlo, np.ceil((union.hi - origin) / h - 1e-9).astype(np.int64) - 1)
        # merge integer ranges
        run = np.maximum.accumulate(jhi)
        start = np.ones(len(jlo), dtype=bool)
        start[1:] = jlo[1:] > run[:-1]
        idx = np.nonzero(start)[0]
        ends = np.append(idx[1:], len(jlo)) - 1
        out.append(int(np.sum(run[ends] - jlo[idx] + 1)))
    return np.asarray(out)


@dataclass
class SlopeEstimate:
    slope: float
    stderr: float
    levels: list[int]
    counts: list[float]

    def table(self) -> str:
        return "".join(f"{n},{c:.10g}\n" for n, c in zip(self.levels, self.counts))


def box_dimension_estimate(counts, levels, M: int) -> SlopeEstimate:
    """Least-squares slope of ``log count`` against ``n log M``.

    ``counts`` may be a 1-D sequence or a (trials, levels) array, in which
    case log counts are averaged over trials first.
    """
    levels = list(levels)
    c = np.asarray(counts, dtype=float)
    if len(levels) < 4:
        raise ValueError("need counts at four or more levels")
    logc = np.log(c) if c.ndim == 1 else np.log(c).mean(axis=0)
    if not np.all(np.isfinite(logc)):
        raise ValueError("zero counts at some level")
    x = np.asarray(levels, dtype=float) * math.log(M)
    fit = linregress(x, logc)
    return SlopeEstimate(float(fit.slope), float(fit.stderr), levels, np.exp(logc).tolist())


@dataclass
class Visible:
    cells: np.ndarray
    count: int
    proxy: float


def visible_set_sample(tree, alpha: float, n: int) -> Visible:
    """First level-n cells met by parallel lines in direction ``alpha``,
    coming from infinity along ``(cos alpha, sin alpha)``.

    Lines are spaced ``M**-n`` apart in the orthogonal coordinate; the count
    times ``M**-n`` approximates the length of the visible part.
    """
    if tree.d != 2:
        raise ValueError("visibility needs a planar tree")
    alpha = check_direction(alpha)
    xy = tree.cells(n)
    h = float(tree.M) ** -n
    if len(xy) == 0:
        return Visible(np.zeros((0, 2), dtype=np.int64), 0, 0.0)
    s, c = math.sin(alpha), math.cos(alpha)
    proj = Orthogonal(alpha)
    lo, hi = proj.square_intervals(xy.astype(float) * h, h)
    s0 = -s
    klo = np.ceil((lo - s0) / h - 0.5).astype(np.int64)
    khi = np.floor((hi - s0) / h - 0.5).astype(np.int64)
    nk = np.maximum(khi - klo + 1, 0)
    cell = np.repeat(np.arange(len(xy)), nk)
    if len(cell) == 0:
        return Visible(np.zeros((0, 2), dtype=np.int64), 0, 0.0)
    first = np.repeat(np.cumsum(nk) - nk, nk)
    k = klo[cell] + (np.arange(len(cell)) - first)
    sk = s0 + (k + 0.5) * h
    x0 = xy[cell, 0] * h
    y0 = xy[cell, 1] * h
    # along-line coordinate tau of the chord's far end: y = sk*(-s, c) + tau*(c, s)
    tau_x = (x0 + h + sk * s) / c
    tau_y = (y0 + h - sk * c) / s
    tau = np.minimum(tau_x, tau_y)
    order = np.lexsort((-tau, k))
    ks = k[order]
    head = np.ones(len(ks), dtype=bool)
    head[1:] = ks[1:] != ks[:-1]
    winners = np.unique(cell[order][head])
    vis = xy[winners]
    return Visible(vis, len(vis), len(vis) * h)
