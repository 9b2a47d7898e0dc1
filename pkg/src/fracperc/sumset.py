"""Weighted sums of independent one-dimensional percolations.

The product of ``d`` one-dimensional realizations is a random subset of the
cube whose level-n cells are coupled through shared coordinate words.  Sums
``sum b_i x_i`` over kept cells are tracked in lattice units ``M**-n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import networkx as nx
import numpy as np

from .intervals import IntervalUnion
from .model import RetentionSpec
from .rng import trial_seeds
from .tree import RealizationTree, sample_many


@dataclass(frozen=True)
class SumsetConfig:
    specs: tuple[RetentionSpec, ...]
    b: tuple[float, ...]
    n: int

    def __post_init__(self):
        if len(self.specs) < 2:
            raise ValueError("need at least two factors")
        if len(self.b) != len(self.specs):
            raise ValueError(f"{len(self.b)} weights for {len(self.specs)} factors")
        if any(s.d != 1 for s in self.specs):
            raise ValueError("factors must be one-dimensional")
        if len({s.M for s in self.specs}) != 1:
            raise ValueError("factors must share M")
        if any(w == 0 for w in self.b):
            raise ValueError("weights must be nonzero")
        if self.n < 0:
            raise ValueError("depth must be >= 0")

    @property
    def d(self) -> int:
        return len(self.specs)

    @property
    def M(self) -> int:
        return self.specs[0].M

    def factor_probs(self) -> list[float]:
        out = []
        for s in self.specs:
            if not s.is_homogeneous:
                raise ValueError("product conditions need homogeneous factors")
            out.append(float(s.p[0]))
        return out

    def sum_range(self) -> tuple[float, float]:
        return (math.fsum(min(w, 0.0) for w in self.b), math.fsum(max(w, 0.0) for w in self.b))


@dataclass
class ProductVerdicts:
    p: float
    cond1: bool
    transparent_pairs: dict[tuple[int, int], bool]
    tau: float
    reduced: tuple[float, ...] | None
    notes: list[str] = field(default_factory=list)

    @property
    def transparent(self) -> bool:
        return all(self.transparent_pairs.values())

    def as_record(self) -> dict[str, str]:
        rec = {"p": f"{self.p:.12g}", "cond1": str(self.cond1).lower(),
               "transparent": str(self.transparent).lower(), "tau": f"{self.tau:.12g}"}
        for (i, j), ok in self.transparent_pairs.items():
            rec[f"pair_{i + 1}_{j + 1}"] = str(ok).lower()
        if self.reduced is not None:
            rec["reduced"] = ",".join(f"{x:.12g}" for x in self.reduced)
        for i, note in enumerate(self.notes):
            rec[f"note_{i}"] = note
        return rec


def _pairs_ok(ps, M):
    return {(i, j): ps[i] * ps[j] < 1.0 / M
            for i in range(len(ps)) for j in range(i + 1, len(ps))}


def condition_check_product(config: SumsetConfig) -> ProductVerdicts:
    """Interval condition ``prod p_i > M**(1-d)``, pairwise transparency
    ``p_i p_j < 1/M`` and, when only the latter fails, a cap ``c`` with
    ``p_i' = min(p_i, c)`` meeting both (retention is monotone in the p_i)."""
    ps = config.factor_probs()
    M, d = config.M, config.d
    p = math.prod(ps)
    cond1 = p > float(M) ** (1 - d)
    pairs = _pairs_ok(ps, M)
    tau = math.log(M ** d * p, M) - 1.0 if p > 0 else -math.inf
    verdicts = ProductVerdicts(p, cond1, pairs, tau, None)
    if cond1 and not all(pairs.values()):
        if d == 2:
            verdicts.notes.append("for two factors the conditions are incompatible")
            return verdicts
        lo, hi = 0.0, max(ps)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if all(_pairs_ok([min(x, mid) for x in ps], M).values()):
                lo = mid
            else:
                hi = mid
        capped = tuple(min(x, lo) for x in ps)
        if math.prod(capped) > float(M) ** (1 - d):
            verdicts.reduced = capped
        else:
            verdicts.notes.append("no entrywise cap keeps the interval condition")
    return verdicts


def _check_trees(trees: Sequence[RealizationTree], n: int):
    if len(trees) < 1:
        raise ValueError("need at least one tree")
    if any(t.d != 1 for t in trees):
        raise ValueError("factors must be one-dimensional")
    if len({t.M for t in trees}) != 1:
        raise ValueError("factors must share M")
    for t in trees:
        if n > t.depth:
            raise ValueError(f"level {n} exceeds sampled depth {t.depth}")


def sumset_approximation(trees: Sequence[RealizationTree], b: Sequence[float], n: int) -> IntervalUnion:
    """Merged union over kept level-n tuples of ``sum b_i I_i``.

    With ``trees = (t2, t1)`` and ``b = (1, -1)`` this reproduces the
    difference set ``E2 - E1`` bit for bit.
    """
    _check_trees(trees, n)
    if len(b) != len(trees):
        raise ValueError("one weight per tree")
    h = float(trees[0].M) ** -n
    sums = np.zeros(1)
    for t, w in zip(trees, b):
        k = t.cells(n)[:, 0]
        if len(k) == 0:
            return IntervalUnion()
        sums = np.unique((sums[:, None] + w * k[None, :]).ravel())
    lo_off = sum(min(w, 0) for w in b)
    hi_off = sum(max(w, 0) for w in b)
    return IntervalUnion.from_arrays((sums + lo_off) * h, (sums + hi_off) * h)


def _children(tree: RealizationTree, k: int):
    """Per kept level-k node, the index range of its kept children."""
    parents = tree.level(k + 1).codes // np.uint64(tree.M)
    codes = tree.level(k).codes
    return np.searchsorted(parents, codes, "left"), np.searchsorted(parents, codes, "right")


def hyperplane_cells(trees: Sequence[RealizationTree], n: int, a) -> np.ndarray:
    """Lattice coordinates of kept level-n product cells meeting
    ``{sum x_i = a}``; a cell meets it iff ``a`` lies in its coordinate-sum
    range.  Found by descent, dropping product cells that miss the plane."""
    _check_trees(trees, n)
    d = len(trees)
    M = trees[0].M
    target = Fraction(a) * M ** n
    front = np.zeros((1, d), dtype=np.int64)  # per-axis index into level k
    for k in range(n + 1):
        s = M ** (n - k)
        if len(front) == 0:
            break
        total = np.zeros(len(front), dtype=object)
        for ax, t in enumerate(trees):
            total = total + t.cells(k)[front[:, ax], 0].astype(object)
        keep = np.array([tot * s <= target <= (tot + d) * s for tot in total], dtype=bool)
        front = front[keep]
        if k == n:
            break
        kids = [_children(t, k) for t in trees]
        rows = []
        for row in front:
            ranges = [range(kids[ax][0][row[ax]], kids[ax][1][row[ax]]) for ax in range(d)]
            if any(len(r) == 0 for r in ranges):
                continue
            grid = np.meshgrid(*[np.arange(r.start, r.stop) for r in ranges], indexing="ij")
            rows.append(np.stack([g.ravel() for g in grid], axis=1))
        front = np.concatenate(rows) if rows else np.zeros((0, d), dtype=np.int64)
    if len(front) == 0:
        return np.zeros((0, d), dtype=np.int64)
    return np.stack([t.cells(n)[front[:, ax], 0] for ax, t in enumerate(trees)], axis=1)


def hyperplane_cell_count(trees: Sequence[RealizationTree], n: int, a) -> int:
    return len(hyperplane_cells(trees, n, a))


def lattice_plane_counts(trees: Sequence[RealizationTree], n: int) -> np.ndarray:
    """Counts for ``a = k M**-n``, ``k = 0..d M**n``, from the full product.

    A cell with coordinate sum ``S`` meets the planes ``k = S..S+d``.
    """
    _check_trees(trees, n)
    d = len(trees)
    side = trees[0].M ** n
    hist = np.ones(1, dtype=np.int64)
    for t in trees:
        h1 = np.bincount(t.cells(n)[:, 0], minlength=side)
        hist = np.convolve(hist, h1)
    hist = np.concatenate([hist, np.zeros(d * side + 1 - len(hist), dtype=np.int64)])
    out = np.zeros(d * side + 1, dtype=np.int64)
    for j in range(d + 1):
        out[j:] += hist[:len(out) - j]
    return out


def dependency_classes(cells) -> list[list[tuple[int, ...]]]:
    """Partition cells so that within a class every pair differs in every
    coordinate, by greedy colouring of the conflict graph (largest degree
    first).  The class count is an upper bound, not an optimum."""
    cells = [tuple(int(v) for v in c) for c in cells]
    g = nx.Graph()
    g.add_nodes_from(range(len(cells)))
    if cells:
        for ax in range(len(cells[0])):
            groups: dict[int, list[int]] = {}
            for i, c in enumerate(cells):
                groups.setdefault(c[ax], []).append(i)
            for members in groups.values():
                for x in range(len(members)):
                    for y in range(x + 1, len(members)):
                        g.add_edge(members[x], members[y])
    colour = nx.greedy_color(g, strategy="largest_first")
    k = max(colour.values(), default=-1) + 1
    classes: list[list[tuple[int, ...]]] = [[] for _ in range(k)]
    for i in range(len(cells)):
        classes[colour[i]].append(cells[i])
    return classes


def sample_factors(config: SumsetConfig, depth: int, trials: int, seed: int = 0):
    """``trials`` tuples of independent factor trees; factor ``i`` of trial
    ``t`` uses seed number ``t * d + i``."""
    seeds = trial_seeds(seed, trials * config.d).reshape(trials, config.d)
    cols = [sample_many(s, depth, seeds[:, i]) for i, s in enumerate(config.specs)]
    return [tuple(col[t] for col in cols) for t in range(trials)]


@dataclass
class IntervalTrial:
    depths: list[int]
    frequency: list[float]
    conditioned: int
    trials: int

    def table(self) -> str:
        return "".join(f"{n},{f:.6g}\n" for n, f in zip(self.depths, self.frequency))


def sum_interval_trial(config: SumsetConfig, J: tuple[float, float], depths, trials: int,
                       seed: int = 0) -> IntervalTrial:
    """Per-depth frequency of ``J`` inside the sumset approximation, over
    trials whose factors all survive to the deepest depth."""
    lo, hi = config.sum_range()
    if not lo <= J[0] <= J[1] <= hi:
        raise ValueError(f"J={J} outside the attainable range [{lo}, {hi}]")
    depths = sorted(depths)
    hits = np.zeros(len(depths))
    kept = 0
    for trees in sample_factors(config, depths[-1], trials, seed):
        if not all(t.survives() for t in trees):
            continue
        kept += 1
        for j, n in enumerate(depths):
            if not sumset_approximation(trees, config.b, n).contains_interval(*J):
                break
            hits[j] += 1
    freq = (hits / kept).tolist() if kept else [float("nan")] * len(depths)
    return IntervalTrial(depths, freq, kept, trials)


@dataclass
class SumsetRow:
    depth: int
    a: float
    cells: int
    classes: int
    measure: float
    longest: tuple[float, float] | None


@dataclass
class SumsetReport:
    config: SumsetConfig
    rows: list[SumsetRow]
    trial: IntervalTrial | None = None

    @property
    def verdicts(self) -> ProductVerdicts:
        return condition_check_product(self.config)

    def table(self) -> str:
        out = ["depth,a,cell_count,class_count,measure,longest_lo,longest_hi,J_frequency\n"]
        freq = {}
        if self.trial is not None:
            freq = dict(zip(self.trial.depths, self.trial.frequency))
        for r in self.rows:
            lg = r.longest or (float("nan"), float("nan"))
            f = freq.get(r.depth)
            out.append(f"{r.depth},{r.a!r},{r.cells},{r.classes},{r.measure!r},{lg[0]!r},{lg[1]!r},"
                       f"{'' if f is None else f'{f:.6g}'}\n")
        return "".join(out)


def sumset_report(config: SumsetConfig, trees: Sequence[RealizationTree],
                  trial: IntervalTrial | None = None) -> SumsetReport:
    """Per-depth sumset summary for one realization: busiest lattice plane,
    its cell and class counts, and the union's measure and longest piece."""
    rows = []
    for n in range(1, config.n + 1):
        counts = lattice_plane_counts(trees, n)
        k = int(np.argmax(counts))
        a = k / config.M ** n
        cells = hyperplane_cells(trees, n, Fraction(k, config.M ** n))
        u = sumset_approximation(trees, config.b, n)
        rows.append(SumsetRow(n, a, len(cells), len(dependency_classes(cells)), u.measure(), u.longest()))
    return SumsetReport(config, rows, trial)


def class_count_growth(config: SumsetConfig, depths, trials: int, seed: int = 0) -> dict[int, float]:
    """Mean class count at the busiest lattice plane per depth, over trials
    whose factors survive to the deepest depth."""
    depths = sorted(depths)
    sums = {n: 0.0 for n in depths}
    kept = 0
    for trees in sample_factors(config, depths[-1], trials, seed):
        if not all(t.survives() for t in trees):
            continue
        kept += 1
        for n in depths:
            counts = lattice_plane_counts(trees, n)
            k = int(np.argmax(counts))
            cells = hyperplane_cells(trees, n, Fraction(k, config.M ** n))
            sums[n] += len(dependency_classes(cells))
    return {n: (s / kept if kept else float("nan")) for n, s in sums.items()}
