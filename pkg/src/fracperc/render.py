"""Grayscale rasters, one pixel per level-n cell."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

from .intervals import IntervalUnion

DARK, LIGHT = 0, 255


def cells_raster(coords: np.ndarray, n: int, M: int) -> np.ndarray:
    """Image rows top to bottom: pixel ``(row, col)`` is dark iff cell
    ``(x=col, y=side-1-row)`` is kept."""
    side = M ** n
    img = np.full((side, side), LIGHT, dtype=np.uint8)
    if len(coords):
        img[side - 1 - coords[:, 1], coords[:, 0]] = DARK
    return img


def union_strip(union: IntervalUnion, lo: float, hi: float, pixels: int, height: int = 16) -> np.ndarray:
    """Strip of ``pixels`` columns over ``[lo, hi]``; a column is dark iff its
    closed mesh interval meets the union."""
    row = np.full(pixels, LIGHT, dtype=np.uint8)
    if not union.is_empty:
        h = (hi - lo) / pixels
        a = np.clip(np.floor((union.lo - lo) / h).astype(np.int64), 0, pixels - 1)
        b = np.clip(np.ceil((union.hi - lo) / h).astype(np.int64) - 1, 0, pixels - 1)
        diff = np.zeros(pixels + 1, dtype=np.int64)
        np.add.at(diff, a, 1)
        np.add.at(diff, np.maximum(a, b) + 1, -1)
        row[np.cumsum(diff[:-1]) > 0] = DARK
    return np.tile(row, (height, 1))


def write_raster(img: np.ndarray, path: Path, echo: dict[str, str]) -> Path:
    """PNG with the echo as text chunks, or binary PGM with comment lines."""
    path = Path(path)
    if path.suffix == ".pgm":
        head = ["P5"] + [f"# {k}={v}" for k, v in echo.items()]
        head += [f"{img.shape[1]} {img.shape[0]}", "255"]
        path.write_bytes(("\n".join(head) + "\n").encode() + img.tobytes())
        return path
    info = PngInfo()
    for k, v in echo.items():
        info.add_text(k, v)
    Image.fromarray(img).save(path, pnginfo=info)
    return path
