"""Counting retained squares along lines in the transparent regime.

Cells are closed, so a line through a shared corner meets every incident
cell.  Lines are ``A x + B y = C`` with rational coefficients, compared in
exact integer arithmetic on the level-n lattice.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numba
import numpy as np
from scipy.stats import linregress

from .branching import dimension_formula, mean_offspring
from .model import RetentionSpec
from .projection import Orthogonal, box_counts_union, box_dimension_estimate, project_level
from .rng import trial_seeds
from .tree import sample_many


@dataclass(frozen=True)
class Line:
    """The line ``a x + b y = c`` in unit-square coordinates."""

    a: Fraction
    b: Fraction
    c: Fraction

    def __post_init__(self):
        if self.a == 0 and self.b == 0:
            raise ValueError("degenerate line")

    @classmethod
    def through(cls, p, q) -> "Line":
        (x1, y1), (x2, y2) = [(Fraction(x), Fraction(y)) for x, y in (p, q)]
        if (x1, y1) == (x2, y2):
            raise ValueError("need two distinct points")
        a, b = y2 - y1, x1 - x2
        return cls(a, b, a * x1 + b * y1)

    @classmethod
    def point_slope(cls, point, slope) -> "Line":
        x0, y0 = Fraction(point[0]), Fraction(point[1])
        m = Fraction(slope)
        return cls(-m, Fraction(1), y0 - m * x0)

    @classmethod
    def from_angle(cls, theta: float, point) -> "Line":
        """Line through ``point`` with direction angle ``theta`` (float inputs
        are converted exactly)."""
        dx, dy = Fraction(math.cos(theta)), Fraction(math.sin(theta))
        x0, y0 = Fraction(point[0]), Fraction(point[1])
        return cls(dy, -dx, dy * x0 - dx * y0)

    def integer_form(self) -> tuple[int, int, int]:
        den = math.lcm(self.a.denominator, self.b.denominator, self.c.denominator)
        return int(self.a * den), int(self.b * den), int(self.c * den)

    def slope(self) -> Fraction | None:
        return None if self.b == 0 else -self.a / self.b

    def describe(self) -> str:
        return f"{float(self.a)!r}*x+{float(self.b)!r}*y={float(self.c)!r}"


def count_slice(tree, n: int, line: Line) -> int:
    """Number of kept level-``n`` closed squares meeting ``line``.

    Descends from the root, discarding any cell whose closed square misses
    the line, so only the kept subtree near the line is visited.
    """
    if tree.d != 2:
        raise ValueError("slices are defined for planar trees")
    A, B, C = line.integer_form()
    M = tree.M
    target = C * M ** n
    lo_off = min(A, 0) + min(B, 0)
    hi_off = max(A, 0) + max(B, 0)
    K = tree.K
    frontier = np.zeros(1, dtype=np.uint64)
    coords = [(0, 0)]
    for k in range(n + 1):
        s = M ** (n - k)
        keep = []
        for i, (X, Y) in enumerate(coords):
            v = s * (A * int(X) + B * int(Y))
            if v + s * lo_off <= target <= v + s * hi_off:
                keep.append(i)
        if k == n:
            return len(keep)
        frontier = frontier[keep]
        coords = [coords[i] for i in keep]
        if len(frontier) == 0:
            return 0
        # children of the surviving cells that are kept at level k+1
        nxt = tree.level(k + 1)
        parent = nxt.codes // np.uint64(K)
        sel = np.isin(parent, frontier)
        frontier = nxt.codes[sel]
        coords = [tuple(map(int, xy)) for xy in nxt.coords[sel]]
    return 0


def in_cone(slope, eps: float) -> bool:
    """Direction separated from both axes by at least ``eps``."""
    if slope is None:
        return False
    m = abs(float(slope))
    return math.tan(eps) <= m <= 1.0 / math.tan(eps)


def _cone_slopes(eps: float) -> tuple[Fraction, Fraction]:
    # rounded inward so boundary lines stay inside the cone
    lo, hi = math.tan(eps), 1.0 / math.tan(eps)
    return Fraction(math.nextafter(lo, 1.0)), Fraction(math.nextafter(hi, 0.0))


def candidate_lines(n: int, M: int, eps: float) -> list[Line]:
    """Lines through two level-``n`` lattice corners with slope in the cone,
    plus lines through one corner at each boundary slope of the cone.

    For a fixed set of hit cells, the lines meeting all of them form a convex
    polygon in (slope, intercept) space whose vertices are of these two kinds,
    so the family attains the maximum count over the cone.
    """
    side = M ** n
    pts = [(Fraction(x, side), Fraction(y, side)) for x in range(side + 1) for y in range(side + 1)]
    out = []
    for p, q in combinations(pts, 2):
        if p[0] == q[0]:
            continue
        m = (q[1] - p[1]) / (q[0] - p[0])
        if in_cone(m, eps):
            out.append(Line.through(p, q))
    lo, hi = _cone_slopes(eps)
    for p in pts:
        for m in (lo, hi, -lo, -hi):
            out.append(Line.point_slope(p, m))
    return out


@numba.njit(cache=True, inline="always")
def _slope_range(x0, x1, y0, y1, a, b):
    """Slopes ``m`` in ``[a, b]`` for which ``y = m x`` meets the closed box
    ``[x0, x1] x [y0, y1]`` (``m > 0``), with the rational that set the lower
    end: returns (ok, lo, hi, num, den, lower end is ``a``)."""
    an = 0
    ad = 1
    af = 1
    # m * x1 >= y0
    if x1 > 0:
        v = y0 / x1
        if v > a:
            a = v
            an = y0
            ad = x1
            af = 0
    elif x1 == 0:
        if y0 > 0:
            return False, a, b, an, ad, af
    else:
        v = y0 / x1
        if v < b:
            b = v
    # m * x0 <= y1
    if x0 > 0:
        v = y1 / x0
        if v < b:
            b = v
    elif x0 == 0:
        if y1 < 0:
            return False, a, b, an, ad, af
    else:
        v = y1 / x0
        if v > a:
            a = v
            an = y1
            ad = x0
            af = 0
    return a <= b, a, b, an, ad, af


@numba.njit(cache=True, nogil=True)
def _pivot_sweep(X, Y, bstart, BX, BY, bside, mlo_cone, mhi_cone, nbuckets, floor):
    """Maximum number of closed unit cells ``[X, X+1] x [Y, Y+1]`` met by one
    line with slope in ``[mlo_cone, mhi_cone]`` (positive slopes).

    Some optimal line passes through the lower-right corner of a hit cell, so
    each such corner is tried as a pivot.  Around a pivot each cell is met
    for a closed interval of slopes.  Cells are grouped in blocks
    ``bstart[k]:bstart[k+1]`` with lower corner ``(BX, BY)`` and side
    ``bside``; a block the pivot's lines cannot meet is skipped whole.  Slope
    buckets bound the count, and only intervals touching a bucket that could
    beat the best are swept exactly.  Counts above ``floor`` are reported as
    (best, pivot index, slope numerator, denominator, lower cone edge flag).
    """
    N = X.shape[0]
    lo = np.empty(N)
    hi = np.empty(N)
    lnum = np.empty(N, dtype=np.int64)
    lden = np.empty(N, dtype=np.int64)
    lbound = np.empty(N, dtype=np.int64)
    width = (mhi_cone - mlo_cone) / nbuckets
    diff = np.zeros(nbuckets + 1, dtype=np.int64)
    passed = np.zeros(nbuckets + 1, dtype=np.int64)
    sel = np.empty(N, dtype=np.int64)
    best = floor
    best_piv = -1
    best_num = 0
    best_den = 1
    best_flag = 0
    for p in range(N):
        px = X[p] + 1
        py = Y[p]
        cnt = 0
        for k in range(BX.shape[0]):
            bx0 = BX[k] - px
            by0 = BY[k] - py
            ok, a, b, an, ad, af = _slope_range(bx0, bx0 + bside, by0, by0 + bside,
                                                mlo_cone, mhi_cone)
            if not ok:
                continue
            for i in range(bstart[k], bstart[k + 1]):
                x0 = X[i] - px
                y0 = Y[i] - py
                ok, a, b, an, ad, af = _slope_range(x0, x0 + 1, y0, y0 + 1, mlo_cone, mhi_cone)
                if ok:
                    lo[cnt] = a
                    hi[cnt] = b
                    lnum[cnt] = an
                    lden[cnt] = ad
                    lbound[cnt] = af
                    cnt += 1
        if cnt <= best:
            continue
        diff[:] = 0
        for i in range(cnt):
            bl = min(int((lo[i] - mlo_cone) / width), nbuckets - 1)
            bh = min(int((hi[i] - mlo_cone) / width), nbuckets - 1)
            diff[bl] += 1
            diff[bh + 1] -= 1
        run = 0
        passed[0] = 0
        for k in range(nbuckets):
            run += diff[k]
            passed[k + 1] = passed[k] + (1 if run > best else 0)
        if passed[nbuckets] == 0:
            continue
        m = 0
        for i in range(cnt):
            bl = min(int((lo[i] - mlo_cone) / width), nbuckets - 1)
            bh = min(int((hi[i] - mlo_cone) / width), nbuckets - 1)
            if passed[bh + 1] > passed[bl]:
                sel[m] = i
                m += 1
        starts = np.empty(m)
        ends = np.empty(m)
        for t in range(m):
            starts[t] = lo[sel[t]]
            ends[t] = hi[sel[t]]
        so = np.argsort(starts)
        ends.sort()
        running = 0
        e = 0
        for t in range(m):
            key = starts[so[t]]
            # closed intervals: only ends strictly before this start are gone
            while e < m and ends[e] < key:
                running -= 1
                e += 1
            running += 1
            if running > best:
                kb = min(int((key - mlo_cone) / width), nbuckets - 1)
                if passed[kb + 1] > passed[kb]:
                    best = running
                    best_piv = p
                    i0 = sel[so[t]]
                    best_num = lnum[i0]
                    best_den = lden[i0]
                    best_flag = lbound[i0]
    return best, best_piv, best_num, best_den, best_flag


@dataclass
class SliceMax:
    count: int
    line: Line | None


def _blocks(X: np.ndarray, Y: np.ndarray, bside: int):
    """Sort cells by block of side ``bside``; returns the reordered cells and
    block offsets and corners."""
    key = (X // bside) * (int(X.max()) // bside + 2) + Y // bside
    order = np.argsort(key, kind="stable")
    key = key[order]
    X, Y = X[order], Y[order]
    head = np.ones(len(key), dtype=bool)
    head[1:] = key[1:] != key[:-1]
    first = np.nonzero(head)[0]
    bstart = np.append(first, len(key)).astype(np.int64)
    BX = (X[first] // bside) * bside
    BY = (Y[first] // bside) * bside
    return X, Y, bstart, BX, BY


def max_slice_in_cone(tree, n: int, eps: float, nbuckets: int = 8192) -> SliceMax:
    """Exact maximum of :func:`count_slice` over lines whose direction is at
    least ``eps`` from both axes, with a maximizing line.

    Negative slopes are handled by mirroring ``x``.
    """
    if tree.d != 2:
        raise ValueError("slices are defined for planar trees")
    if not 0.0 < eps < math.pi / 4:
        raise ValueError("eps must lie in (0, pi/4)")
    xy = tree.cells(n)
    if len(xy) == 0:
        return SliceMax(0, None)
    side = tree.M ** n
    bside = tree.M ** (n - n // 2)
    lo_f, hi_f = _cone_slopes(eps)
    # slope one is inside the cone, so its best count is a lower bound
    best = SliceMax(*best_diagonal_slice(tree, n))
    for mirror in (False, True):
        X = (side - 1 - xy[:, 0]) if mirror else xy[:, 0]
        X, Y, bstart, BX, BY = _blocks(np.asarray(X, dtype=np.int64),
                                       np.asarray(xy[:, 1], dtype=np.int64), bside)
        cnt, piv, num, den, flag = _pivot_sweep(X, Y, bstart, BX, BY, bside, float(lo_f),
                                                float(hi_f), nbuckets, best.count)
        if piv < 0:
            continue
        m = lo_f if flag else Fraction(int(num), int(den))
        px = Fraction(int(X[piv]) + 1, side)
        py = Fraction(int(Y[piv]), side)
        if mirror:
            px, m = 1 - px, -m
        best = SliceMax(int(cnt), Line.point_slope((px, py), m))
    return best


def best_diagonal_slice(tree, n: int) -> tuple[int, Line | None]:
    """Best line of slope one: a line ``y = x + c/M**n`` meets cell
    ``(X, Y)`` iff ``|Y - X - c| <= 1``, and integer ``c`` is optimal."""
    xy = tree.cells(n)
    if len(xy) == 0:
        return 0, None
    k = xy[:, 1] - xy[:, 0]
    side = tree.M ** n
    hist = np.bincount(k + side, minlength=2 * side + 1)
    pad = np.concatenate([[0], hist, [0]])
    tot = pad[:-2] + pad[1:-1] + pad[2:]
    j = int(np.argmax(tot))
    c = Fraction(j - side, side)
    return int(tot[j]), Line.point_slope((0, c), 1)


@dataclass
class SliceReport:
    depths: list[int]
    max_counts: list[int]
    mean_max_counts: list[float]
    diagonal_best: list[list[int]]
    witness_lines: list[str]
    exponent: float
    linear_slope: float
    transparent: bool
    surviving: int
    trials: int
    notes: list[str] = field(default_factory=list)

    @property
    def ratio_spread(self) -> float:
        r = [m / n for m, n in zip(self.max_counts, self.depths)]
        return max(r) / min(r)

    def lambda_fraction(self, lam: float = 1.0) -> float:
        """Share of surviving trials whose best slope-one line meets at least
        ``lam * n`` cells at every depth."""
        if not self.diagonal_best:
            return 0.0
        ok = [all(c >= lam * n for c, n in zip(row, self.depths)) for row in self.diagonal_best]
        return sum(ok) / len(ok)

    def table(self) -> str:
        rows = ["depth,max_count,mean_max_count,witness_line\n"]
        for n, m, mm, w in zip(self.depths, self.max_counts, self.mean_max_counts, self.witness_lines):
            rows.append(f"{n},{m},{mm:.6g},{w}\n")
        return "".join(rows)


def transparent_regime(spec: RetentionSpec) -> bool:
    M = spec.M
    return spec.is_homogeneous and M ** -2 < spec.p[0] <= 1.0 / M


def _tree_slices(tree, depths, eps):
    counts, lines, diag = [], [], []
    for n in depths:
        res = max_slice_in_cone(tree, n, eps)
        counts.append(res.count)
        lines.append(res.line)
        diag.append(best_diagonal_slice(tree, n)[0])
    return counts, lines, diag


def max_slice_growth(spec: RetentionSpec, depths, eps: float = math.pi / 8, trials: int = 100,
                     seed: int = 0, workers: int = 1, chunk: int = 25) -> SliceReport:
    """Per-depth maximum slice count over the cone and over trials that
    survive to the deepest depth, with growth fits.

    Trees are processed by ``workers`` threads; results are folded in trial
    order so the report does not depend on the thread count.
    """
    depths = sorted(depths)
    deepest = depths[-1]
    seeds = trial_seeds(seed, trials)
    best = [0] * len(depths)
    best_line = [""] * len(depths)
    sums = [0.0] * len(depths)
    diag = []
    surviving = 0
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for i in range(0, trials, chunk):
            alive = [t for t in sample_many(spec, deepest, seeds[i:i + chunk]) if t.survives()]
            for counts, lines, row in pool.map(lambda t: _tree_slices(t, depths, eps), alive):
                surviving += 1
                for j, c in enumerate(counts):
                    sums[j] += c
                    if c > best[j]:
                        best[j] = c
                        best_line[j] = lines[j].describe()
                diag.append(row)
    notes = []
    if not transparent_regime(spec):
        notes.append("outside the transparent regime M^-2 < p <= 1/M")
    exponent = slope = float("nan")
    if surviving and len(depths) >= 2 and min(best) > 0:
        exponent = float(linregress(np.log(depths), np.log(best)).slope)
        slope = float(linregress(depths, best).slope)
    means = [s / surviving if surviving else 0.0 for s in sums]
    return SliceReport(depths, best, means, diag, best_line, exponent, slope,
                       transparent_regime(spec), surviving, trials, notes)


@dataclass
class DimensionRow:
    alpha: float
    estimate: float
    stderr: float
    target: float

    @property
    def deviation(self) -> float:
        return self.estimate - self.target


@dataclass
class DimensionTable:
    rows: list[DimensionRow]
    stage_one: bool
    surviving: int

    def table(self) -> str:
        out = ["alpha,estimate,stderr,target,deviation\n"]
        for r in self.rows:
            out.append(f"{r.alpha!r},{r.estimate:.6g},{r.stderr:.3g},{r.target:.6g},{r.deviation:.3g}\n")
        return "".join(out)


def dimension_preservation_check(spec: RetentionSpec, alphas, depth: int, trials: int,
                                 seed: int = 0, first_level: int = 2) -> DimensionTable:
    """Box-dimension slope of orthogonal projections of ``E_depth`` for each
    direction, against ``min(1, dim E)``, over trials surviving to ``depth``."""
    if not spec.is_homogeneous:
        raise ValueError("dimension preservation is checked for homogeneous specs only")
    if spec.d != 2:
        raise ValueError("projections need a planar spec")
    if mean_offspring(spec) <= 1.0:
        return DimensionTable([], True, 0)
    target = min(1.0, dimension_formula(spec).value)
    trees = [t for t in sample_many(spec, depth, trial_seeds(seed, trials)) if t.survives()]
    levels = list(range(first_level, depth + 1))
    rows = []
    for alpha in alphas:
        kind = Orthogonal(alpha)
        origin = kind.range()[0]
        counts = np.array([box_counts_union(project_level(t, depth, kind), origin, spec.M, levels)
                           for t in trees])
        est = box_dimension_estimate(counts, levels, spec.M)
        rows.append(DimensionRow(float(alpha), est.slope, est.stderr, target))
    return DimensionTable(rows, False, len(trees))
