"""Domain types, vectorization conventions and the deterministic RNG contract.

Conventions used everywhere in this package:

* A hyperspectral cube with ``mx`` spatial rows, ``nx`` spatial columns and
  ``l`` bands is stored band-major: ``data[b, r, c]``.  Its canonical flat
  index is ``b*(mx*nx) + r*nx + c``, so the vectorized cube consists of the
  full band-0 raster, then band 1, and so on.
* Detector images are plain row-major 2D arrays.
* A sensing matrix holds one detector speckle pattern per cube voxel:
  column ``j`` is the (vectorized) detector response to a unit source at
  canonical voxel ``j``.
* In-memory arithmetic is float64; the on-disk formats (see ``dataio``)
  store samples as little-endian float32.

All types are immutable after construction (their arrays are marked
read-only), so instances can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError

__all__ = [
    "HsiCube",
    "DetectorImage",
    "SensingMatrix",
    "RngSpec",
    "ReconResult",
    "canonical_index",
    "vectorize",
    "devectorize",
]


def _frozen_f64(arr, order: str = "C") -> np.ndarray:
    """Return a read-only float64 copy of ``arr`` in the given memory order."""
    out = np.array(arr, dtype=np.float64, order=order, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class HsiCube:
    """A 3D hyperspectral object: ``data[b, r, c]`` with wavelengths in nm."""

    wavelengths: np.ndarray  # (l,) strictly increasing, nm
    data: np.ndarray         # (l, mx, nx) nonnegative, band-major

    def __post_init__(self):
        wl = _frozen_f64(self.wavelengths)
        data = _frozen_f64(self.data)
        if wl.ndim != 1 or wl.size < 1:
            raise DimensionError("wavelengths must be a non-empty 1D sequence")
        if data.ndim != 3:
            raise DimensionError(f"cube data must be 3D (l, mx, nx), got ndim={data.ndim}")
        if data.shape[0] != wl.size:
            raise DimensionError(
                f"band count mismatch: {data.shape[0]} data bands vs {wl.size} wavelengths"
            )
        if not np.all(np.isfinite(wl)) or np.any(np.diff(wl) <= 0):
            raise ParameterError("wavelengths must be finite and strictly increasing")
        if not np.all(np.isfinite(data)):
            raise ParameterError("cube data must be finite")
        if np.any(data < 0):
            raise ParameterError("cube data must be nonnegative")
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "data", data)

    @property
    def l(self) -> int:
        return self.data.shape[0]

    @property
    def mx(self) -> int:
        return self.data.shape[1]

    @property
    def nx(self) -> int:
        return self.data.shape[2]

    @property
    def dims(self) -> tuple[int, int, int]:
        """(mx, nx, l)."""
        return (self.mx, self.nx, self.l)


@dataclass(frozen=True)
class DetectorImage:
    """A single-shot 2D measurement; values may be negative after noise."""

    data: np.ndarray  # (my, ny) row-major

    def __post_init__(self):
        data = _frozen_f64(self.data)
        if data.ndim != 2:
            raise DimensionError(f"detector image must be 2D, got ndim={data.ndim}")
        if not np.all(np.isfinite(data)):
            raise ParameterError("detector image must be finite")
        object.__setattr__(self, "data", data)

    @property
    def my(self) -> int:
        return self.data.shape[0]

    @property
    def ny(self) -> int:
        return self.data.shape[1]

    @property
    def vector(self) -> np.ndarray:
        """Row-major vectorized view, length my*ny."""
        return self.data.reshape(-1)


@dataclass(frozen=True)
class SensingMatrix:
    """Calibrated speckle matrix: column j = detector response to voxel j.

    ``data`` has shape (my*ny, mx*nx*l) and is stored column-contiguous
    (Fortran order) because calibration produces it one column at a time.

    Structural invariants (shape consistency, finite nonnegative entries)
    are enforced here.  The physical invariant that every column has a
    strictly positive sum is guaranteed by ``forward.calibrate`` and checked
    where it matters numerically (DGI, step estimation), so synthetic
    degenerate matrices can still be constructed in order to exercise those
    error paths.
    """

    mx: int
    nx: int
    l: int
    my: int
    ny: int
    data: np.ndarray  # (rows, cols), Fortran order

    def __post_init__(self):
        for name in ("mx", "nx", "l", "my", "ny"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise DimensionError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        data = _frozen_f64(self.data, order="F")
        if data.ndim != 2:
            raise DimensionError("sensing matrix data must be 2D")
        expect = (self.my * self.ny, self.mx * self.nx * self.l)
        if data.shape != expect:
            raise DimensionError(
                f"sensing matrix shape {data.shape} does not match metadata {expect}"
            )
        if not np.all(np.isfinite(data)):
            raise ParameterError("sensing matrix must be finite")
        if np.any(data < 0):
            raise ParameterError("sensing matrix must be nonnegative")
        object.__setattr__(self, "data", data)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def cube_dims(self) -> tuple[int, int, int]:
        return (self.mx, self.nx, self.l)

    @property
    def detector_dims(self) -> tuple[int, int]:
        return (self.my, self.ny)

    def column(self, j: int) -> np.ndarray:
        if not 0 <= j < self.cols:
            raise DimensionError(f"column {j} out of range [0, {self.cols})")
        return self.data[:, j]


@dataclass(frozen=True)
class RngSpec:
    """Counter-based RNG identity: equal (seed, stream) pairs replay the
    exact same draw sequence on every platform and with any thread count.

    Substreams for parallel work (one per sensing-matrix column) are derived
    by XOR-ing the substream index into ``stream``, so generation order
    never affects the result.
    """

    seed: int = 0
    stream: int = 0

    _MASK = (1 << 64) - 1

    def __post_init__(self):
        for name in ("seed", "stream"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= v <= self._MASK:
                raise ParameterError(f"{name} must be an unsigned 64-bit integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    def generator(self, substream: int = 0) -> np.random.Generator:
        key = [self.seed, (self.stream ^ substream) & self._MASK]
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class ReconResult:
    """A reconstructed cube plus solver telemetry."""

    cube: HsiCube
    iterations: int
    objective_trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    wall_time_s: float = 0.0

    def __post_init__(self):
        trace = _frozen_f64(self.objective_trace)
        if trace.ndim != 1:
            raise DimensionError("objective trace must be 1D")
        if trace.size and not np.all(np.isfinite(trace)):
            raise ParameterError("objective trace must be finite")
        object.__setattr__(self, "objective_trace", trace)
        object.__setattr__(self, "iterations", int(self.iterations))


def canonical_index(b: int, r: int, c: int, dims: tuple[int, int, int]) -> int:
    """Flat index of voxel (band b, row r, col c) in a cube with dims (mx, nx, l).

    Band-major: all of band 0's row-major raster precedes band 1's.
    """
    mx, nx, l = dims
    if not (0 <= b < l and 0 <= r < mx and 0 <= c < nx):
        raise DimensionError(
            f"voxel (b={b}, r={r}, c={c}) out of range for dims (mx={mx}, nx={nx}, l={l})"
        )
    return b * (mx * nx) + r * nx + c


def vectorize(cube: HsiCube) -> np.ndarray:
    """Flatten a cube to its canonical vector X of length mx*nx*l."""
    return cube.data.reshape(-1)


def devectorize(x: np.ndarray, dims: tuple[int, int, int],
                wavelengths=None) -> HsiCube:
    """Inverse of :func:`vectorize`.

    ``wavelengths`` defaults to the band indices 1..l (a sensing matrix
    carries no spectral axis, so reconstructions get placeholder values
    unless the caller knows the true grid).
    """
    mx, nx, l = dims
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != mx * nx * l:
        raise DimensionError(
            f"vector of length {x.size} does not match dims (mx={mx}, nx={nx}, l={l})"
        )
    if wavelengths is None:
        wavelengths = np.arange(1, l + 1, dtype=np.float64)
    return HsiCube(wavelengths=wavelengths, data=x.reshape(l, mx, nx))
