"""Invertible reshaping between a detector frame and a 4-channel tensor.

A 2H x 2W frame becomes four H x W channels, one per position inside each
non-overlapping 2x2 block, ordered (top-left, top-right, bottom-left,
bottom-right). The nominal detector is 256x256, giving 128x128x4; any even
dimensions work. Pure reindexing, so the round trip is bit exact.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError

__all__ = ["space_to_depth", "depth_to_space"]


def space_to_depth(y: np.ndarray) -> np.ndarray:
    a = np.asarray(y, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2D frame, got shape {a.shape}")
    h, w = a.shape
    if h < 2 or w < 2 or h % 2 or w % 2:
        raise DimensionError(f"frame dims must be even and >= 2, got {(h, w)}")
    return np.stack([a[0::2, 0::2], a[0::2, 1::2], a[1::2, 0::2], a[1::2, 1::2]])


def depth_to_space(t: np.ndarray) -> np.ndarray:
    a = np.asarray(t, dtype=np.float64)
    if a.ndim != 3 or a.shape[0] != 4:
        raise DimensionError(f"expected a (4, H, W) tensor, got shape {a.shape}")
    h, w = a.shape[1], a.shape[2]
    out = np.empty((2 * h, 2 * w), dtype=np.float64)
    out[0::2, 0::2] = a[0]
    out[0::2, 1::2] = a[1]
    out[1::2, 0::2] = a[2]
    out[1::2, 1::2] = a[3]
    return out
