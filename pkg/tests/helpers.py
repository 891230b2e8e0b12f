"""Shared test utilities."""

import numpy as np

from giscsim import HsiCube


def f32_cube(rng, mx, nx, l, scale=1.0):
    """Random cube whose samples are exactly representable in float32,
    so disk round trips are bit-exact."""
    data = (scale * rng.random((l, mx, nx))).astype(np.float32).astype(np.float64)
    return HsiCube(wavelengths=np.arange(1.0, l + 1.0), data=data)


def f32_array(rng, *shape, signed=False):
    a = rng.random(shape)
    if signed:
        a = a - 0.5
    return a.astype(np.float32).astype(np.float64)
