"""Binary tree format ``FPT1``.

Header (little endian): magic ``b"FPT1"``, ``d``, ``M``, ``depth`` as
uint32 and ``seed`` as uint64.  Body: for every kept node at levels
``0..depth-1`` in breadth-first order (sorted word order within a level),
a child mask of ``ceil(M**d / 8)`` bytes; bit ``j - 1`` (least significant
first) marks child symbol ``j`` as kept.
"""
from __future__ import annotations

import struct

import numpy as np

from .model import symbol_offsets
from .tree import Level, RealizationTree

MAGIC = b"FPT1"
HEADER = struct.Struct("<4sIIIQ")


class FormatError(ValueError):
    pass


def serialize_tree(tree: RealizationTree) -> bytes:
    K = tree.K
    width = (K + 7) // 8
    parts = [HEADER.pack(MAGIC, tree.d, tree.M, tree.depth, tree.seed)]
    for n in range(tree.depth):
        parents = tree.level(n).codes
        children = tree.level(n + 1).codes
        bits = np.zeros((len(parents), width * 8), dtype=np.uint8)
        row = np.searchsorted(parents, children // np.uint64(K))
        bits[row, (children % np.uint64(K)).astype(np.int64)] = 1
        parts.append(np.packbits(bits, axis=1, bitorder="little").tobytes())
    return b"".join(parts)


def deserialize_tree(data: bytes) -> RealizationTree:
    if len(data) < HEADER.size:
        raise FormatError("truncated header")
    magic, d, M, depth, seed = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if d < 1 or M < 2:
        raise FormatError(f"invalid dimensions d={d}, M={M}")
    K = M ** d
    width = (K + 7) // 8
    offs = symbol_offsets(M, d)
    pos = HEADER.size
    levels = [Level(np.zeros(1, dtype=np.uint64), np.zeros((1, d), dtype=np.int64))]
    for _ in range(depth):
        lv = levels[-1]
        need = len(lv) * width
        if pos + need > len(data):
            raise FormatError("truncated body")
        masks = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos).reshape(len(lv), width)
        pos += need
        bits = np.unpackbits(masks, axis=1, bitorder="little")
        if np.any(bits[:, K:]):
            raise FormatError("padding bits set")
        parent, sym = np.nonzero(bits[:, :K])
        codes = lv.codes[parent] * np.uint64(K) + sym.astype(np.uint64)
        coords = lv.coords[parent] * M + offs[sym]
        levels.append(Level(codes, coords))
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes")
    return RealizationTree(d, M, seed, tuple(levels), None)
