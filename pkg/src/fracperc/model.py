"""Model parameters and M-adic cell geometry.

Cells of the unit cube [0, 1]^d are addressed by words over the alphabet
{1, ..., M^d}.  Symbol ``j`` selects the subcell whose per-axis offsets
``u_0, ..., u_{d-1}`` (0-based) satisfy ``j - 1 = sum_a u_a * M**a``; in the
plane this is ``j - 1 = M*(v-1) + (u-1)`` with ``u`` the column (x) and ``v``
the row (y), so symbol 1 is the lower-left cell.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class SpecError(ValueError):
    """Malformed retention parameters."""


@dataclass(frozen=True)
class RetentionSpec:
    d: int
    M: int
    p: tuple[float, ...]
    name: str = field(default="", compare=False)

    @property
    def K(self) -> int:
        """Number of subcells (alphabet size)."""
        return self.M ** self.d

    @property
    def probs(self) -> np.ndarray:
        return np.asarray(self.p, dtype=float)

    @property
    def is_homogeneous(self) -> bool:
        return len(set(self.p)) == 1

    def offsets(self) -> np.ndarray:
        """(K, d) array of 0-based per-axis offsets for symbols 1..K."""
        return symbol_offsets(self.M, self.d)

    def __str__(self) -> str:
        ps = ",".join(f"{x:g}" for x in self.p)
        return f"E(d={self.d}, M={self.M}, p=({ps}))"


def validate_spec(d: int, M: int, p: Iterable[float], name: str = "") -> RetentionSpec:
    """Build a :class:`RetentionSpec`, checking shape and ranges."""
    if int(d) != d or d < 1:
        raise SpecError(f"dimension must be an integer >= 1, got {d!r}")
    if int(M) != M or M < 2:
        raise SpecError(f"subdivision base must be an integer >= 2, got {M!r}")
    d, M = int(d), int(M)
    p = tuple(float(x) for x in p)
    if len(p) != M ** d:
        raise SpecError(f"expected {M ** d} retention probabilities, got {len(p)}")
    for i, x in enumerate(p, start=1):
        if not (0.0 <= x <= 1.0):
            raise SpecError(f"p_{i} = {x} outside [0, 1]")
    return RetentionSpec(d, M, p, name)


def homogeneous(d: int, M: int, p: float) -> RetentionSpec:
    return validate_spec(d, M, [p] * M ** d, name=f"homogeneous {p:g}")


def carpet(p: float, q: float = 0.0) -> RetentionSpec:
    """Random Sierpinski carpet on the 3x3 grid, centre cell kept with ``q``."""
    probs = [p] * 9
    probs[4] = q
    return validate_spec(2, 3, probs, name=f"carpet {p:g} {q:g}")


def product_spec(factors: Sequence[RetentionSpec]) -> RetentionSpec:
    """Tensor product of one-dimensional specs.

    The entry for symbol ``j`` is ``prod_a factors[a].p[u_a]`` where ``u`` are
    the per-axis offsets of ``j``; for two factors ``a, b`` this is
    ``p_i = a_u * b_v`` with ``i - 1 = M*(v-1) + (u-1)``.
    """
    if not factors:
        raise SpecError("need at least one factor")
    M = factors[0].M
    for f in factors:
        if f.d != 1:
            raise SpecError("product factors must be one-dimensional")
        if f.M != M:
            raise SpecError(f"mismatched subdivision base: {f.M} != {M}")
    d = len(factors)
    offs = symbol_offsets(M, d)
    vals = np.ones(M ** d)
    for a, f in enumerate(factors):
        vals = vals * f.probs[offs[:, a]]
    return validate_spec(d, M, vals.tolist())


def symbol_offsets(M: int, d: int) -> np.ndarray:
    j = np.arange(M ** d)
    return np.stack([(j // M ** a) % M for a in range(d)], axis=1).astype(np.int64)


def offsets_to_symbol(offsets: Sequence[int], M: int) -> int:
    return 1 + sum(int(u) * M ** a for a, u in enumerate(offsets))


@dataclass(frozen=True)
class Cell:
    word: tuple[int, ...]
    lower: tuple[float, ...]
    side: float

    @property
    def level(self) -> int:
        return len(self.word)

    @property
    def center(self) -> tuple[float, ...]:
        return tuple(x + self.side / 2 for x in self.lower)

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(x + self.side for x in self.lower)

    def corners(self) -> list[tuple[float, ...]]:
        d = len(self.lower)
        out = []
        for mask in range(2 ** d):
            out.append(tuple(self.lower[a] + (self.side if mask >> a & 1 else 0.0)
                             for a in range(d)))
        return out


def word_to_lattice(word: Sequence[int], M: int, d: int) -> np.ndarray:
    """Integer lower-corner coordinates of a cell on the M^n lattice."""
    K = M ** d
    coords = np.zeros(d, dtype=np.int64)
    for j in word:
        if not (1 <= j <= K):
            raise ValueError(f"symbol {j} outside 1..{K}")
        u = j - 1
        for a in range(d):
            coords[a] = coords[a] * M + (u // M ** a) % M
    return coords


def cell_geometry(word: Sequence[int], spec: RetentionSpec) -> Cell:
    """Geometry of the cell addressed by ``word``.

    The centre equals the image of the cube centre under the composed
    homotheties ``y -> x_i + M^-1 (y - 1/2)``.
    """
    word = tuple(int(j) for j in word)
    coords = word_to_lattice(word, spec.M, spec.d)
    side = float(spec.M) ** -len(word)
    return Cell(word, tuple(float(c) * side for c in coords), side)
