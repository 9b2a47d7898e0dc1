"""Expected-count operators on the anti-diagonal and interval certificates.

Points of the anti-diagonal from (0, 1) to (1, 0) are parametrized by
normalized arclength ``tau`` in [0, 1].  For a word ``w`` of length ``n`` the
map ``tau -> Pi_alpha(phi_w(tau))`` is the affine contraction
``tau -> base_w + M**-n * tau``; its image of an interval is the *shadow*.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import RetentionSpec
from .projection import Diagonal
from .tree import code_to_word

WORD_CAP = 3 ** 12
POSITIVE_TOL = 1e-12
PRUNE_TOL = 1e-12


def _planar(spec: RetentionSpec) -> None:
    if spec.d != 2:
        raise ValueError("direction certificates need a planar spec")


@dataclass
class _Words:
    """Level-n words with positive probability: lattice corners, weights, codes."""

    X: np.ndarray
    Y: np.ndarray
    pw: np.ndarray
    codes: np.ndarray
    n: int

    def base(self, diag: Diagonal, M: int) -> np.ndarray:
        h = float(M) ** -self.n
        return diag.t0 * (1.0 - h) + (diag.a * self.X - diag.b * self.Y) * h


def _descend(spec: RetentionSpec, alpha: float, n: int, keep=None) -> _Words:
    """Expand words level by level, keeping prefixes whose full shadow
    ``[base, base + h]`` passes ``keep(lo, hi)``."""
    diag = Diagonal(alpha)
    M, K = spec.M, spec.K
    sym = np.nonzero(spec.probs > 0)[0]
    offs = spec.offsets()[sym]
    psym = spec.probs[sym]
    X = np.zeros(1, dtype=np.int64)
    Y = np.zeros(1, dtype=np.int64)
    pw = np.ones(1)
    codes = np.zeros(1, dtype=np.int64)
    for level in range(1, n + 1):
        if len(X) * len(sym) > 4 * WORD_CAP:
            raise ValueError(f"word enumeration at level {level} exceeds cap")
        X = (X[:, None] * M + offs[None, :, 0]).ravel()
        Y = (Y[:, None] * M + offs[None, :, 1]).ravel()
        pw = (pw[:, None] * psym[None, :]).ravel()
        codes = (codes[:, None] * K + sym[None, :]).ravel()
        if keep is not None:
            h = float(M) ** -level
            base = diag.t0 * (1.0 - h) + (diag.a * X - diag.b * Y) * h
            ok = keep(base, base + h)
            X, Y, pw, codes = X[ok], Y[ok], pw[ok], codes[ok]
    return _Words(X, Y, pw, codes, n)


def shadow(word, alpha: float, I: tuple[float, float], M: int) -> tuple[float, float]:
    """Image of ``I`` under projection of the scaled copy ``phi_word``; length
    ``M**-len(word) * |I|``."""
    diag = Diagonal(alpha)
    X = Y = 0
    for j in word:
        X = X * M + (j - 1) % M
        Y = Y * M + (j - 1) // M
    h = float(M) ** -len(word)
    base = diag.t0 * (1.0 - h) + (diag.a * X - diag.b * Y) * h
    return base + h * I[0], base + h * I[1]


def enumerate_D_n(x: float, I: tuple[float, float], alpha: float, n: int,
                  spec: RetentionSpec) -> list[tuple[int, ...]]:
    """Words of length ``n`` with positive probability whose shadow of ``I``
    contains ``x`` (closed shadows), in lexicographic order."""
    _planar(spec)
    if n == 0:
        return [()] if I[0] <= x <= I[1] else []
    words = _descend(spec, alpha, n,
                     keep=lambda lo, hi: (lo <= x + PRUNE_TOL) & (hi >= x - PRUNE_TOL))
    base = words.base(Diagonal(alpha), spec.M)
    h = float(spec.M) ** -n
    hit = (base + h * I[0] <= x) & (x <= base + h * I[1])
    codes = np.sort(words.codes[hit])
    return [code_to_word(int(c), n, spec.K) for c in codes]


def D_n_weight(x: float, I, alpha: float, n: int, spec: RetentionSpec) -> float:
    """``sum_{w in D_n(x, I, alpha)} p_w``."""
    total = 0.0
    for w in enumerate_D_n(x, I, alpha, n, spec):
        total += math.prod(spec.p[j - 1] for j in w)
    return total


class GridFunction:
    """Continuous piecewise-linear nonnegative function on [0, 1] that
    vanishes at both endpoints."""

    def __init__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or len(x) < 2:
            raise ValueError("breakpoints and values must be matching 1-D arrays")
        if x[0] != 0.0 or x[-1] != 1.0 or np.any(np.diff(x) <= 0):
            raise ValueError("breakpoints must increase strictly from 0 to 1")
        if np.any(y < 0):
            raise ValueError("values must be nonnegative")
        if y[0] != 0.0 or y[-1] != 0.0:
            raise ValueError("function must vanish at the endpoints")
        self.x, self.y = x, y

    def __call__(self, t):
        return np.interp(t, self.x, self.y)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        x = _merge_points(np.concatenate([self.x, other.x]))
        return GridFunction(x, self(x) + other(x))

    def __mul__(self, c: float) -> "GridFunction":
        return GridFunction(self.x, self.y * float(c))

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return not np.any(self.y > 0)

    @classmethod
    def tent(cls, peak: float = 0.5, height: float = 1.0) -> "GridFunction":
        return cls([0.0, peak, 1.0], [0.0, height, 0.0])

    @classmethod
    def bump(cls, a: float, b: float, height: float = 1.0) -> "GridFunction":
        """Tent supported on ``[a, b]``."""
        pts = [0.0, a, 0.5 * (a + b), b, 1.0]
        vals = [0.0, 0.0, height, 0.0, 0.0]
        x = _merge_points(np.array(pts))
        return cls(x, np.interp(x, pts, vals))


def _merge_points(x: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    x = np.unique(np.clip(x, 0.0, 1.0))
    keep = np.ones(len(x), dtype=bool)
    keep[1:] = np.diff(x) > tol
    x = x[keep]
    x[0], x[-1] = 0.0, 1.0
    return np.unique(x)


def chord_function(alpha: float) -> GridFunction:
    """Length of the unit square's chord in direction ``alpha`` through each
    point of the anti-diagonal."""
    diag = Diagonal(alpha)
    L = min(1.0 / math.cos(diag.alpha), 1.0 / math.sin(diag.alpha))
    knots = sorted({diag.b, diag.a})
    x = [0.0, *knots, 1.0]
    y = [0.0] + [L] * len(knots) + [0.0]
    return GridFunction(x, y)


def apply_F(f: GridFunction, alpha: float, spec: RetentionSpec) -> GridFunction:
    """Expected inverse-Markov operator:
    ``F f(x) = sum_{i: x in shadow_i} p_i f(psi_i(x))`` over level-one cells."""
    _planar(spec)
    words = _descend(spec, alpha, 1)
    diag = Diagonal(alpha)
    h = 1.0 / spec.M
    base = words.base(diag, spec.M)
    pts = np.concatenate([[0.0, 1.0], base, base + h, (base[:, None] + h * f.x[None, :]).ravel()])
    x = _merge_points(pts)
    vals = np.zeros(len(x))
    for b, p in zip(base, words.pw):
        inside = (x >= b) & (x <= b + h)
        vals[inside] += p * f(np.clip((x[inside] - b) / h, 0.0, 1.0))
    vals[0] = vals[-1] = 0.0
    return GridFunction(x, np.maximum(vals, 0.0))


def apply_G(f: GridFunction, alpha: float, tree, x):
    """Random counterpart of :func:`apply_F` for one realization's first level."""
    diag = Diagonal(alpha)
    h = 1.0 / tree.M
    xy = tree.cells(1)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for X, Y in xy:
        b = diag.t0 * (1.0 - h) + (diag.a * X - diag.b * Y) * h
        inside = (x >= b) & (x <= b + h)
        out[inside] += f(np.clip((x[inside] - b) / h, 0.0, 1.0))
    return out


@dataclass
class ConditionB:
    epsilon: float
    ok: bool
    reason: str = ""


def check_condition_B(alpha: float, f: GridFunction, spec: RetentionSpec,
                      tol: float = POSITIVE_TOL) -> ConditionB:
    """Largest ``eps`` with ``F f >= (1 + eps) f`` on the interior.

    On each piece of the merged grid both functions are linear, so ``F f / f``
    is monotone there and its infimum sits at a grid point; at the endpoints,
    where ``f`` vanishes, the one-sided slope ratio is used.  Success needs
    ``eps > tol``.
    """
    if f.is_zero():
        raise ValueError("f must not vanish identically")
    g = apply_F(f, alpha, spec)
    x = _merge_points(np.concatenate([f.x, g.x]))
    fv, gv = f(x), g(x)
    if np.any(fv[1:-1] <= 0.0):
        bad = float(x[1:-1][np.argmax(fv[1:-1] <= 0.0)])
        return ConditionB(-1.0, False, f"f vanishes at interior point {bad:.6g}")
    ratios = gv[1:-1] / fv[1:-1]
    left = (gv[1] - gv[0]) / (fv[1] - fv[0])
    right = (gv[-2] - gv[-1]) / (fv[-2] - fv[-1])
    eps = float(min(ratios.min(), left, right)) - 1.0
    return ConditionB(eps, eps > tol, "" if eps > tol else "no positive epsilon")


def _check_interval(I, name):
    lo, hi = float(I[0]), float(I[1])
    if lo > hi:
        raise ValueError(f"{name} is empty")
    return lo, hi


@dataclass
class ConditionAWitness:
    alpha: float
    I1: tuple[float, float] | None
    I2: tuple[float, float]
    r: int
    margin: float
    min_weight: float = 0.0

    @property
    def certified(self) -> bool:
        return self.margin >= 0.0

    def as_record(self) -> dict[str, str]:
        i1 = "empty" if self.I1 is None else "{!r},{!r}".format(*self.I1)
        return {"alpha": repr(self.alpha), "I1": i1, "I2": "{!r},{!r}".format(*self.I2),
                "r": str(self.r), "margin": repr(self.margin)}


def _weight_at(points, lo, hi, w):
    """``sum w[j] * [lo_j <= x <= hi_j]`` for each ``x`` in ``points``."""
    ol, oh = np.argsort(lo), np.argsort(hi)
    lo_s, hi_s = lo[ol], hi[oh]
    cl = np.concatenate([[0.0], np.cumsum(w[ol])])
    ch = np.concatenate([[0.0], np.cumsum(w[oh])])
    a = cl[np.searchsorted(lo_s, points, side="right")]
    b = ch[np.searchsorted(hi_s, points, side="left")]
    return a - b


def _pieces(lo, hi, w, a, b):
    """Breakpoints in [a, b] and the weight on each open piece."""
    inner = np.concatenate([lo, hi])
    inner = inner[(inner > a) & (inner < b)]
    pts = np.unique(np.concatenate([[a, b], inner]))
    if len(pts) == 1:
        return pts, _weight_at(pts, lo, hi, w)
    mids = 0.5 * (pts[:-1] + pts[1:])
    return pts, _weight_at(mids, lo, hi, w)


def check_condition_A(alpha: float, I1, I2, r: int, spec: RetentionSpec) -> ConditionAWitness:
    """Exact margin ``min_{x in I2} sum_{w in D_r(x, I1, alpha)} p_w - 2``.

    The sum is piecewise constant with jumps at shadow endpoints; closed
    shadows make its value at a jump at least that of both neighbouring open
    pieces, so the minimum over ``I2`` is the minimum over open pieces.
    """
    _planar(spec)
    a2, b2 = _check_interval(I2, "I2")
    if not (0.0 < a2 and b2 < 1.0):
        raise ValueError("I2 must lie in the interior of the diagonal")
    if I1 is None or I1[0] > I1[1]:
        return ConditionAWitness(alpha, None, (a2, b2), r, -2.0, 0.0)
    a1, b1 = _check_interval(I1, "I1")
    if not (a2 < a1 and b1 < b2):
        raise ValueError("I1 must lie in the interior of I2")
    if r < 1:
        raise ValueError("r must be a positive integer")
    words = _descend(spec, alpha, r, keep=lambda lo, hi: (hi >= a2 - PRUNE_TOL) & (lo <= b2 + PRUNE_TOL))
    h = float(spec.M) ** -r
    base = words.base(Diagonal(alpha), spec.M)
    lo, hi = base + h * a1, base + h * b1
    if len(lo) == 0:
        return ConditionAWitness(alpha, (a1, b1), (a2, b2), r, -2.0, 0.0)
    _, vals = _pieces(lo, hi, words.pw, a2, b2)
    m = float(vals.min())
    return ConditionAWitness(alpha, (a1, b1), (a2, b2), r, m - 2.0, m)


def grid_recheck(witness: ConditionAWitness, spec: RetentionSpec, npts: int = 10_000,
                 chunk: int = 2_000) -> tuple[float, np.ndarray]:
    """Brute-force weight at ``npts`` evenly spaced points of ``I2``.

    Every word of length ``r`` is tested against every point, with shadows
    taken from the projected endpoints of the scaled interval.  Returns the
    smallest weight and the point values.
    """
    diag = Diagonal(witness.alpha)
    M, r = spec.M, witness.r
    a1, b1 = witness.I1
    xs = np.linspace(witness.I2[0], witness.I2[1], npts)
    offs = spec.offsets()
    X = np.zeros(1, dtype=np.int64)
    Y = np.zeros(1, dtype=np.int64)
    pw = np.ones(1)
    for _ in range(r):
        X = (X[:, None] * M + offs[None, :, 0]).ravel()
        Y = (Y[:, None] * M + offs[None, :, 1]).ravel()
        pw = (pw[:, None] * spec.probs[None, :]).ravel()
    h = float(M) ** -r
    # endpoints of phi_w(I1) as points in the plane, then projected
    p1 = np.stack([(X + a1) * h, (Y + 1.0 - a1) * h], axis=1)
    p2 = np.stack([(X + b1) * h, (Y + 1.0 - b1) * h], axis=1)
    e1, e2 = diag(p1), diag(p2)
    lo, hi = np.minimum(e1, e2), np.maximum(e1, e2)
    vals = np.zeros(npts)
    for i in range(0, len(lo), chunk):
        sl = slice(i, i + chunk)
        hit = (lo[sl, None] <= xs[None, :]) & (xs[None, :] <= hi[sl, None])
        vals += pw[sl] @ hit
    return float(vals.min()), vals


def _full_weight_max(words: _Words, base: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    pts, vals = _pieces(base, base + h, words.pw, 0.0, 1.0)
    return pts, vals


def search_condition_A(alpha: float, spec: RetentionSpec, r_max: int = 6, grid: int = 64,
                       room: float = 0.0) -> ConditionAWitness | None:
    """First witness found over concentric lattice intervals.

    Scan order: ``r = 1..r_max``; for each, inner radius from largest to
    smallest; centres ordered by distance from 1/2.  The outer interval is the
    largest concentric lattice interval on which the weight stays >= 2 and
    whose radius exceeds the inner one by more than ``room``.  Levels where
    even the full diagonal cannot reach weight 2 are skipped.  ``None`` means
    no witness within budget, not that the condition fails.
    """
    _planar(spec)
    diag = Diagonal(alpha)
    npos = int(np.sum(spec.probs > 0))
    centres = sorted((j / grid for j in range(1, grid)), key=lambda c: (abs(c - 0.5), c))
    for r in range(1, r_max + 1):
        if npos ** r > WORD_CAP:
            break
        words = _descend(spec, alpha, r)
        if len(words.pw) == 0:
            break
        h = float(spec.M) ** -r
        base = words.base(diag, spec.M)
        fpts, fvals = _full_weight_max(words, base, h)
        if fvals.max() < 2.0:
            continue
        for k1 in range(grid // 2 - 1, 0, -1):
            rho1 = k1 / grid
            for c in centres:
                if c - rho1 - room <= 0.0 or c + rho1 + room >= 1.0:
                    continue
                if _weight_at(np.array([c]), base, base + h, words.pw)[0] < 2.0:
                    continue
                lo, hi = base + h * (c - rho1), base + h * (c + rho1)
                pts, vals = _pieces(lo, hi, words.pw, 0.0, 1.0)
                bad = vals < 2.0
                j = np.searchsorted(pts, c, side="right") - 1
                j = min(j, len(vals) - 1)
                if bad[j] or (pts[j] == c and j > 0 and bad[j - 1]):
                    continue
                left_bad = np.nonzero(bad[:j])[0]
                right_bad = np.nonzero(bad[j + 1:])[0]
                L = pts[left_bad[-1] + 1] if len(left_bad) else 0.0
                R = pts[j + 1 + right_bad[0]] if len(right_bad) else 1.0
                jc = round(c * grid)
                k2 = min(math.floor(min(c - L, R - c) * grid + 1e-9), min(jc, grid - jc) - 1)
                if k2 / grid <= rho1 + room:
                    continue
                wit = check_condition_A(alpha, (c - rho1, c + rho1), (c - k2 / grid, c + k2 / grid), r, spec)
                if wit.certified:
                    return wit
    return None


@dataclass
class RobustWitness:
    J: tuple[float, float]
    witness: ConditionAWitness
    endpoint_margins: tuple[float, float]
    centre_margin: float

    def as_record(self) -> dict[str, str]:
        rec = {"J": "{!r},{!r}".format(*self.J)}
        rec.update(self.witness.as_record())
        rec["endpoint_margins"] = "{!r},{!r}".format(*self.endpoint_margins)
        return rec


def robustness_radius(alpha: float, witness: ConditionAWitness, ell: float,
                      spec: RetentionSpec) -> RobustWitness:
    """Angle interval ``[alpha - ell M^-r, alpha + ell M^-r]`` on which the
    witness with inner interval enlarged by ``sqrt(2) ell`` holds.

    Turning a line about its foot ``x`` by ``delta`` moves its crossing with a
    level-r cell's diagonal by at most ``2 sin(delta)``, i.e. ``sqrt(2) ell``
    in that diagonal's own parameter when ``delta <= ell M^-r``; every word
    counted at ``alpha`` with the inner interval is therefore counted at each
    angle of the returned interval with the enlarged one.  The result is
    re-verified at both endpoints.
    """
    if not witness.certified or witness.I1 is None:
        raise ValueError("witness does not certify the condition")
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    grow = math.sqrt(2.0) * ell
    a1, b1 = witness.I1[0] - grow, witness.I1[1] + grow
    a2, b2 = witness.I2
    if not (a2 < a1 and b1 < b2):
        raise ValueError("inner interval has no room to grow by sqrt(2)*ell inside I2")
    delta = ell * float(spec.M) ** -witness.r
    J = (max(alpha - delta, 1e-12), min(alpha + delta, math.pi / 2 - 1e-12))
    grown = check_condition_A(alpha, (a1, b1), (a2, b2), witness.r, spec)
    m_lo = check_condition_A(J[0], (a1, b1), (a2, b2), witness.r, spec).margin
    m_hi = check_condition_A(J[1], (a1, b1), (a2, b2), witness.r, spec).margin
    if min(m_lo, m_hi) < -POSITIVE_TOL:
        raise RuntimeError(f"endpoint re-verification failed at {J}: {m_lo}, {m_hi}")
    return RobustWitness(J, grown, (m_lo, m_hi), witness.margin)


@dataclass
class DirectionCover:
    lo: float
    hi: float
    ok: bool
    pieces: list[RobustWitness] = field(default_factory=list)
    failed_at: float | None = None
    covered_to: float | None = None

    def as_table(self) -> str:
        rows = ["J_lo,J_hi,I1_lo,I1_hi,I2_lo,I2_hi,r,margin\n"]
        for pc in self.pieces:
            w = pc.witness
            rows.append(f"{pc.J[0]!r},{pc.J[1]!r},{w.I1[0]!r},{w.I1[1]!r},{w.I2[0]!r},"
                        f"{w.I2[1]!r},{w.r},{min(pc.endpoint_margins)!r}\n")
        return "".join(rows)


def certify_all_directions(spec: RetentionSpec, lo: float, hi: float, r_max: int = 6,
                           ell: float = 0.05, grid: int = 64) -> DirectionCover:
    """Greedy sweep covering ``[lo, hi]`` by robust witness intervals.

    At the current covered edge the previous witness is tried at one radius
    further; if it fails a fresh search is run at the edge itself.  A failed
    search ends the sweep with a report.
    """
    if not 0.0 < lo < hi < math.pi / 2:
        raise ValueError("need 0 < lo < hi < pi/2")
    room = math.sqrt(2.0) * ell
    cover = DirectionCover(lo, hi, False)
    cur = lo
    prev: ConditionAWitness | None = None
    while True:
        centre, wit = None, None
        if prev is not None:
            delta = ell * float(spec.M) ** -prev.r
            cand = min(cur + delta, math.pi / 2 - 1e-9)
            # (cur + delta) - delta can round above cur and open a gap
            while cand - delta > cur:
                cand = math.nextafter(cand, 0.0)
            w = check_condition_A(cand, prev.I1, prev.I2, prev.r, spec)
            if w.certified:
                centre, wit = cand, w
        if wit is None:
            wit = search_condition_A(cur, spec, r_max, grid, room)
            if wit is None:
                cover.failed_at = cur
                cover.covered_to = cur
                return cover
            centre = cur
        piece = robustness_radius(centre, wit, ell, spec)
        cover.pieces.append(piece)
        prev = wit
        if piece.J[1] <= cur:
            raise RuntimeError("sweep made no progress")
        cur = piece.J[1]
        if cur >= hi:
            cover.ok = True
            cover.covered_to = cur
            return cover
