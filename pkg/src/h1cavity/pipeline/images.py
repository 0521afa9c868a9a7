"""Plain-text grids and 8-bit grayscale PGM images."""

from __future__ import annotations

import csv
import re

import numpy as np


def write_pgm(path, values, vmin=None, vmax=None) -> None:
    """Binary PGM (P5) of a 2D array indexed ``[i, j]`` = (x, y).

    The image shows x to the right and y upward; NaN pixels are black.
    """
    a = np.asarray(values, float)
    finite = np.isfinite(a)
    lo = np.nanmin(a) if vmin is None else vmin
    hi = np.nanmax(a) if vmax is None else vmax
    scale = 255.0 / (hi - lo) if finite.any() and hi > lo else 0.0
    img = np.where(finite, np.clip((a - lo) * scale, 0, 255), 0).round().astype(np.uint8)
    img = img.T[::-1]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    """Inverse of :func:`write_pgm` (returns the 8-bit image as ``[i, j]``)."""
    raw = open(path, "rb").read()
    # header: magic, width, height, maxval, then exactly one whitespace byte
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", raw)
    if m is None:
        raise ValueError(f"{path} is not a binary PGM file")
    w, h = int(m.group(1)), int(m.group(2))
    data = np.frombuffer(raw, dtype=np.uint8, count=w * h, offset=m.end()).reshape(h, w)
    return data[::-1].T


def write_grid_csv(path, x, y, values, names=("x", "y", "value")) -> None:
    """Long-format CSV of a 2D grid: one ``x, y, value`` row per cell."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for i, xi in enumerate(x):
            for j, yj in enumerate(y):
                w.writerow([f"{xi:.6g}", f"{yj:.6g}", f"{values[i, j]:.6g}"])
