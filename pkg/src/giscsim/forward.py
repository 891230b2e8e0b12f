"""Forward model: speckle calibration, single-shot sensing and detector noise.

Calibration plays the role of the physical procedure: light up one voxel at
a time and record the detector speckle it produces.  Column j of the result
is the pattern for canonical voxel j, so a measurement of an arbitrary cube
is the voxel-value-weighted superposition of those columns.

Speckle columns are synthesized statistically, not by wave propagation:
each is |g|^2 of a complex circular-Gaussian field low-pass filtered to the
requested grain size, which gives the negative-exponential intensity
statistics of fully developed speckle.  Columns are mutually independent
(one RNG substream per column), so generation order and thread schedule
cannot affect the output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DetectorImage, HsiCube, RngSpec, SensingMatrix, vectorize
from .errors import CapacityError, DimensionError, ParameterError

__all__ = [
    "SpeckleSpec",
    "NoiseSpec",
    "SNR_HIGH_DB",
    "SNR_LOW_DB",
    "MAX_MATRIX_ELEMENTS",
    "calibrate",
    "sense",
    "add_noise",
]

# Standard operating points for measurement noise.
SNR_HIGH_DB = 30.0
SNR_LOW_DB = 10.0

# Dense f64 sensing matrices beyond this many entries (1 GiB) are refused.
MAX_MATRIX_ELEMENTS = 2 ** 27

# Columns per batched FFT during calibration. Purely a speed knob: fields
# are drawn per column from that column's own substream, so batching cannot
# change any value.
_CALIBRATE_CHUNK = 128


@dataclass(frozen=True)
class SpeckleSpec:
    """Statistics of one calibration speckle column.

    correlation_px sets the grain size in detector pixels; mean_intensity is
    the exact column mean after normalization.
    """

    correlation_px: float = 1.0
    mean_intensity: float = 1.0
    rng: RngSpec = RngSpec()

    def __post_init__(self):
        if not math.isfinite(self.correlation_px) or self.correlation_px < 1:
            raise ParameterError(f"correlation_px must be >= 1, got {self.correlation_px!r}")
        if not math.isfinite(self.mean_intensity) or self.mean_intensity <= 0:
            raise ParameterError(f"mean_intensity must be > 0, got {self.mean_intensity!r}")


@dataclass(frozen=True)
class NoiseSpec:
    """Additive detector noise level. snr_db may be +inf for noise-free."""

    snr_db: float = math.inf
    rng: RngSpec = RngSpec()

    def __post_init__(self):
        snr = float(self.snr_db)
        if math.isnan(snr) or snr == -math.inf:
            raise ParameterError(f"snr_db must be finite or +inf, got {self.snr_db!r}")
        object.__setattr__(self, "snr_db", snr)


def _speckle_fields(gen: np.random.Generator, count: int, my: int, ny: int) -> np.ndarray:
    """Complex circular-Gaussian white fields, shape (count, my, ny)."""
    draws = gen.standard_normal((count, 2, my, ny))
    return draws[:, 0] + 1j * draws[:, 1]


def _grain_mask(my: int, ny: int, correlation_px: float) -> np.ndarray:
    """Circular low-pass mask keeping spatial frequencies up to 0.5/grain."""
    fy = np.fft.fftfreq(my)[:, None]
    fx = np.fft.fftfreq(ny)[None, :]
    cutoff = 0.5 / correlation_px
    return np.hypot(fy, fx) <= cutoff


def calibrate(cube_dims: tuple[int, int, int], detector_dims: tuple[int, int],
              spec: SpeckleSpec) -> SensingMatrix:
    """Generate the sensing matrix, one speckle column per voxel.

    Column j is drawn from RNG substream j (seed, stream ^ j), so the matrix
    is reproducible bit-for-bit regardless of how the work is scheduled.
    Each column is normalized to mean exactly spec.mean_intensity.
    """
    mx, nx, l = (int(v) for v in cube_dims)
    my, ny = (int(v) for v in detector_dims)
    if min(mx, nx, l, my, ny) < 1:
        raise DimensionError(
            f"all dims must be >= 1, got cube {(mx, nx, l)}, detector {(my, ny)}"
        )
    rows = my * ny
    cols = mx * nx * l
    if rows * cols > MAX_MATRIX_ELEMENTS:
        raise CapacityError(
            f"matrix of {rows}x{cols} = {rows * cols} entries exceeds the "
            f"{MAX_MATRIX_ELEMENTS}-entry budget"
        )

    mask = _grain_mask(my, ny, spec.correlation_px)
    data = np.empty((rows, cols), dtype=np.float64, order="F")
    for start in range(0, cols, _CALIBRATE_CHUNK):
        stop = min(start + _CALIBRATE_CHUNK, cols)
        fields = np.stack([
            _speckle_fields(spec.rng.generator(substream=j), 1, my, ny)[0]
            for j in range(start, stop)
        ])
        filtered = np.fft.ifft2(np.fft.fft2(fields) * mask)
        intensity = np.abs(filtered) ** 2
        means = intensity.mean(axis=(1, 2))
        intensity *= (spec.mean_intensity / means)[:, None, None]
        data[:, start:stop] = intensity.reshape(stop - start, rows).T
    return SensingMatrix(mx=mx, nx=nx, l=l, my=my, ny=ny, data=data)


def sense(phi: SensingMatrix, cube: HsiCube) -> DetectorImage:
    """Noise-free single-shot measurement: Y = Phi * vectorize(cube).

    The sum over voxels is accumulated left to right in canonical index
    order (vectorized across detector pixels), a fixed association that an
    independent column-by-column summation reproduces bit-for-bit. In
    particular a one-hot cube returns column j exactly, and a measurement
    decomposes exactly into the weighted sum of its one-voxel measurements.
    """
    if phi.cube_dims != cube.dims:
        raise DimensionError(
            f"matrix expects cube dims {phi.cube_dims}, got {cube.dims}"
        )
    x = vectorize(cube)
    scaled = phi.data.T * x[:, None]  # row j = x_j * column_j
    y = np.add.reduce(scaled, axis=0)  # sequential fold over j
    return DetectorImage(data=y.reshape(phi.my, phi.ny))


def add_noise(y: DetectorImage, spec: NoiseSpec) -> DetectorImage:
    """Add i.i.d. zero-mean Gaussian noise at the requested SNR.

    The noise variance is mean(y^2) / 10^(snr_db/10): SNR is defined
    against the mean signal power, not the signal variance. snr_db = +inf
    returns the input unchanged.
    """
    if spec.snr_db == math.inf:
        return y
    power = float(np.mean(y.data ** 2))
    sigma = math.sqrt(power / 10.0 ** (spec.snr_db / 10.0))
    eps = spec.rng.generator().normal(0.0, sigma, size=y.data.shape)
    return DetectorImage(data=y.data + eps)
