"""Binary P5 graymap emitter for sample grids: bit-exact and dependency-free."""
from __future__ import annotations

import numpy as np


def to_bytes(gray: np.ndarray) -> bytes:
    """Encode a uint8 H x W array as a binary P5 graymap."""
    if gray.ndim != 2 or gray.dtype != np.uint8:
        raise ValueError("expected a uint8 H x W array")
    h, w = gray.shape
    return f"P5\n{w} {h}\n255\n".encode() + gray.tobytes()


def pixels_to_bytes(values: np.ndarray) -> np.ndarray:
    """Map [-1, 1] pixels to 0..255 via round((p + 1) * 127.5)."""
    return np.round((np.asarray(values) + 1.0) * 127.5).clip(0, 255).astype(np.uint8)


def pair_grid(pairs_a: np.ndarray, pairs_b: np.ndarray,
              rows: int, cols: int) -> np.ndarray:
    """Tile rows x cols cells, each cell a (domain A | domain B) pair.

    Accepts (N, C, H, W) single-channel images or (N, F) flat vectors, which
    render as 1 x F strips.
    """
    a = np.asarray(pairs_a, dtype=np.float64)
    b = np.asarray(pairs_b, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, None, None, :]
        b = b[:, None, None, :]
    if a.ndim != 4 or a.shape[1] != 1:
        raise ValueError(f"cannot render shape {a.shape} as a graymap grid")
    n, _, h, w = a.shape
    if n < rows * cols:
        raise ValueError("not enough pairs for the requested grid")
    grid = np.empty((rows * h, cols * 2 * w), dtype=np.uint8)
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            cell = np.concatenate([a[i, 0], b[i, 0]], axis=1)
            grid[r * h:(r + 1) * h, c * 2 * w:(c + 1) * 2 * w] = \
                pixels_to_bytes(cell)
    return grid
