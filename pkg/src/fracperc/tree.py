"""Sampled realizations of fractal percolation as sparse labelled trees."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .model import RetentionSpec, symbol_offsets
from .rng import level_key, node_uniforms


@dataclass(frozen=True, eq=False)
class Level:
    """Kept words of one level: sorted integer codes and lattice coordinates.

    The code of a word ``(i_1, ..., i_n)`` is ``sum (i_k - 1) K**(n-k)``, so
    sorting by code is lexicographic word order.
    """

    codes: np.ndarray
    coords: np.ndarray

    def __len__(self) -> int:
        return len(self.codes)


def _root_level(d: int) -> Level:
    return Level(np.zeros(1, dtype=np.uint64), np.zeros((1, d), dtype=np.int64))


def max_depth(M: int, d: int) -> int:
    """Largest depth whose word codes fit in 63 bits."""
    K = M ** d
    n = 0
    while K ** (n + 1) < 2 ** 63:
        n += 1
    return n


def _grow(codes, coords, keys, probs, offsets, M):
    """One level of sampling for a batch of parents (``keys`` per parent)."""
    K = len(probs)
    k = len(codes)
    if k == 0:
        d = coords.shape[1]
        return (np.zeros(0, dtype=np.uint64), np.zeros((0, d), dtype=np.int64),
                np.zeros(0, dtype=np.int64))
    sym = np.arange(K, dtype=np.uint64)
    child = (codes[:, None] * np.uint64(K) + sym[None, :]).ravel()
    u = node_uniforms(np.repeat(keys, K), child)
    keep = u < np.tile(probs, k)
    parent = np.repeat(np.arange(k), K)[keep]
    j = np.tile(np.arange(K), k)[keep]
    new_coords = coords[parent] * M + offsets[j]
    return child[keep], new_coords, parent


@dataclass(frozen=True, eq=False)
class RealizationTree:
    """Retained words of one realization, levels 0..depth.

    ``spec`` may be ``None`` for trees restored from bytes; such trees can be
    queried but not deepened.
    """

    d: int
    M: int
    seed: int
    levels: tuple[Level, ...]
    spec: RetentionSpec | None = None

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def K(self) -> int:
        return self.M ** self.d

    def _check(self, n: int) -> None:
        if not 0 <= n <= self.depth:
            raise ValueError(f"level {n} outside sampled depth 0..{self.depth}")

    def level(self, n: int) -> Level:
        self._check(n)
        return self.levels[n]

    def count(self, n: int) -> int:
        return len(self.level(n))

    def cells(self, n: int) -> np.ndarray:
        """(k, d) lattice coordinates of kept level-n cells (side M**-n)."""
        return self.level(n).coords

    def words(self, n: int) -> list[tuple[int, ...]]:
        return [code_to_word(int(c), n, self.K) for c in self.level(n).codes]

    def kept(self, word: Sequence[int]) -> bool:
        n = len(word)
        self._check(n)
        code = np.uint64(word_to_code(word, self.K))
        codes = self.levels[n].codes
        i = np.searchsorted(codes, code)
        return bool(i < len(codes) and codes[i] == code)

    def survives(self) -> bool:
        return len(self.levels[-1]) > 0

    def deepen(self, depth: int) -> "RealizationTree":
        """Return a tree sampled to ``depth`` that agrees with this one."""
        if depth <= self.depth:
            return RealizationTree(self.d, self.M, self.seed, self.levels[:depth + 1], self.spec)
        if self.spec is None:
            raise ValueError("cannot deepen a tree without its retention spec")
        if depth > max_depth(self.M, self.d):
            raise ValueError(f"depth {depth} exceeds code capacity {max_depth(self.M, self.d)}")
        levels = list(self.levels)
        probs, offs = self.spec.probs, self.spec.offsets()
        for n in range(self.depth, depth):
            lv = levels[-1]
            key = level_key(self.seed, n + 1)
            keys = np.full(len(lv), key, dtype=np.uint64)
            codes, coords, _ = _grow(lv.codes, lv.coords, keys, probs, offs, self.M)
            levels.append(Level(codes, coords))
        return RealizationTree(self.d, self.M, self.seed, tuple(levels), self.spec)

    def same_as(self, other: "RealizationTree") -> bool:
        if (self.d, self.M, self.depth) != (other.d, other.M, other.depth):
            return False
        return all(np.array_equal(a.codes, b.codes) for a, b in zip(self.levels, other.levels))


def word_to_code(word: Sequence[int], K: int) -> int:
    code = 0
    for j in word:
        if not 1 <= j <= K:
            raise ValueError(f"symbol {j} outside 1..{K}")
        code = code * K + (int(j) - 1)
    return code


def code_to_word(code: int, n: int, K: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        code, r = divmod(code, K)
        out.append(r + 1)
    return tuple(reversed(out))


def sample_realization(spec: RetentionSpec, depth: int, seed: int) -> RealizationTree:
    """Sample levels 0..depth; each child of a kept node is kept with
    ``p[symbol]`` independently, with labels keyed by ``(seed, word)``."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    root = RealizationTree(spec.d, spec.M, seed, (_root_level(spec.d),), spec)
    return root.deepen(depth)


def sample_many(spec: RetentionSpec, depth: int, seeds: Sequence[int]) -> list[RealizationTree]:
    """Sample one tree per seed in a single vectorized pass.

    Each returned tree is identical to ``sample_realization(spec, depth, s)``.
    """
    if depth > max_depth(spec.M, spec.d):
        raise ValueError(f"depth {depth} exceeds code capacity")
    seeds = np.asarray(seeds, dtype=np.uint64)
    T = len(seeds)
    probs, offs = spec.probs, spec.offsets()
    owner = np.arange(T)
    codes = np.zeros(T, dtype=np.uint64)
    coords = np.zeros((T, spec.d), dtype=np.int64)
    per_level = [(owner, codes, coords)]
    for n in range(depth):
        keys = level_key(seeds[owner], n + 1)
        codes, coords, parent = _grow(codes, coords, keys, probs, offs, spec.M)
        owner = owner[parent]
        per_level.append((owner, codes, coords))
    trees = []
    bounds = [np.searchsorted(o, np.arange(T + 1)) for o, _, _ in per_level]
    for t in range(T):
        levels = tuple(Level(c[b[t]:b[t + 1]], x[b[t]:b[t + 1]])
                       for (_, c, x), b in zip(per_level, bounds))
        trees.append(RealizationTree(spec.d, spec.M, int(seeds[t]), levels, spec))
    return trees


def level_counts(spec: RetentionSpec, depth: int, seeds: Sequence[int]) -> np.ndarray:
    """(T, depth+1) kept-cell counts per trial, without retaining the trees."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    T = len(seeds)
    probs, offs = spec.probs, spec.offsets()
    owner = np.arange(T)
    codes = np.zeros(T, dtype=np.uint64)
    coords = np.zeros((T, spec.d), dtype=np.int64)
    out = np.zeros((T, depth + 1), dtype=np.int64)
    out[:, 0] = 1
    for n in range(depth):
        keys = level_key(seeds[owner], n + 1)
        codes, coords, parent = _grow(codes, coords, keys, probs, offs, spec.M)
        owner = owner[parent]
        out[:, n + 1] = np.bincount(owner, minlength=T)
    return out


def tree_from_words(M: int, d: int, words: Iterable[Sequence[int]], depth: int | None = None,
                    seed: int = 0) -> RealizationTree:
    """Deterministic tree whose kept words are ``words`` and all their prefixes."""
    K = M ** d
    words = [tuple(w) for w in words]
    if depth is None:
        depth = max((len(w) for w in words), default=0)
    by_level: list[set[tuple[int, ...]]] = [set() for _ in range(depth + 1)]
    by_level[0].add(())
    for w in words:
        if len(w) > depth:
            raise ValueError("word longer than depth")
        for k in range(len(w) + 1):
            by_level[k].add(w[:k])
    offs = symbol_offsets(M, d)
    levels = []
    for n, ws in enumerate(by_level):
        ws = sorted(ws)
        codes = np.array([word_to_code(w, K) for w in ws], dtype=np.uint64)
        coords = np.zeros((len(ws), d), dtype=np.int64)
        for i, w in enumerate(ws):
            for j in w:
                coords[i] = coords[i] * M + offs[j - 1]
        levels.append(Level(codes, coords))
    return RealizationTree(d, M, seed, tuple(levels), None)


class ProductRealization:
    """Cartesian product of one-dimensional trees.

    A d-dimensional cell is kept iff each of its coordinate words is kept in
    the corresponding factor, so cells sharing a coordinate word are coupled
    through that factor.
    """

    def __init__(self, factors: Sequence[RealizationTree]):
        factors = list(factors)
        if not factors:
            raise ValueError("need at least one factor")
        M, depth = factors[0].M, factors[0].depth
        for f in factors:
            if f.d != 1:
                raise ValueError("product factors must be one-dimensional")
            if f.M != M:
                raise ValueError("factors must share M")
            if f.depth != depth:
                raise ValueError(f"mismatched depth: {f.depth} != {depth}")
        self.factors = factors
        self.M = M
        self.d = len(factors)
        self.depth = depth

    @property
    def K(self) -> int:
        return self.M ** self.d

    def kept(self, word: Sequence[int]) -> bool:
        for a, f in enumerate(self.factors):
            fw = [((j - 1) // self.M ** a) % self.M + 1 for j in word]
            if not f.kept(fw):
                return False
        return True

    def count(self, n: int) -> int:
        return int(np.prod([f.count(n) for f in self.factors]))

    def cells(self, n: int) -> np.ndarray:
        axes = [f.cells(n)[:, 0] for f in self.factors]
        if any(len(a) == 0 for a in axes):
            return np.zeros((0, self.d), dtype=np.int64)
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    def survives(self) -> bool:
        return all(f.survives() for f in self.factors)


def sample_product_realization(factors: Sequence[RealizationTree]) -> ProductRealization:
    return ProductRealization(factors)


def survival_set(tree, n: int):
    """Kept words of length ``n`` and their lattice cells (side ``M**-n``)."""
    return tree.words(n), tree.cells(n)


def percolation_crossing(tree, n: int) -> bool:
    """Left-right crossing of the kept level-n squares under edge adjacency."""
    if tree.d != 2:
        raise ValueError("crossing is defined for planar realizations only")
    xy = tree.cells(n)
    k = len(xy)
    if k == 0:
        return False
    side = tree.M ** n
    lin = xy[:, 0] * side + xy[:, 1]
    order = np.argsort(lin)
    lin_sorted = lin[order]
    rows, cols = [], []
    for dx, dy in ((1, 0), (0, 1)):
        nb = xy + (dx, dy)
        ok = (nb[:, 0] < side) & (nb[:, 1] < side)
        target = nb[:, 0] * side + nb[:, 1]
        pos = np.searchsorted(lin_sorted, target)
        pos = np.minimum(pos, k - 1)
        hit = ok & (lin_sorted[pos] == target)
        rows.append(np.nonzero(hit)[0])
        cols.append(order[pos[hit]])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    graph = coo_matrix((np.ones(len(r)), (r, c)), shape=(k, k))
    _, label = connected_components(graph, directed=False)
    left = set(label[xy[:, 0] == 0].tolist())
    right = set(label[xy[:, 0] == side - 1].tolist())
    return bool(left & right)
