"""Readers and writers for the measurement pipeline's three file formats.

This package talks to the simulator purely through files, so it carries its
own implementation of the formats instead of importing the producer:

  cube      "GSC1" | u32 mx, nx, l | f64 wavelengths[l] | f32 data (l, mx, nx) C order
  matrix    "GSM1" | u32 rows, cols, mx, nx, l, my, ny | f32 data, column-contiguous
  detector  "GSD1" | u32 my, ny | f32 data, row-major

All integers and floats are little-endian. Payloads are stored as float32
and surfaced as float64 arrays.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, TruncationError

__all__ = [
    "Cube",
    "Matrix",
    "Detector",
    "read_cube",
    "write_cube",
    "read_matrix",
    "write_matrix",
    "read_detector",
    "write_detector",
]

_MAGIC_CUBE = b"GSC1"
_MAGIC_MATRIX = b"GSM1"
_MAGIC_DETECTOR = b"GSD1"


@dataclass(frozen=True)
class Cube:
    """Spectral cube: data[band, row, col] with one wavelength per band."""

    wavelengths: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.wavelengths, dtype=np.float64)
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 3:
            raise DimensionError(f"cube data must be 3D (l, mx, nx), got {d.shape}")
        if w.shape != (d.shape[0],):
            raise DimensionError(
                f"need one wavelength per band: {w.shape} vs {d.shape[0]} bands"
            )
        object.__setattr__(self, "wavelengths", w)
        object.__setattr__(self, "data", d)

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
        return (self.mx, self.nx, self.l)


@dataclass(frozen=True)
class Matrix:
    """Sensing matrix: one column per cube voxel, one row per detector pixel."""

    mx: int
    nx: int
    l: int
    my: int
    ny: int
    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        expect = (self.my * self.ny, self.mx * self.nx * self.l)
        if d.shape != expect:
            raise DimensionError(f"matrix data must be {expect}, got {d.shape}")
        object.__setattr__(self, "data", d)

    @property
    def rows(self) -> int:
        return self.my * self.ny

    @property
    def cols(self) -> int:
        return self.mx * self.nx * self.l

    @property
    def cube_dims(self) -> tuple[int, int, int]:
        return (self.mx, self.nx, self.l)

    @property
    def detector_dims(self) -> tuple[int, int]:
        return (self.my, self.ny)


@dataclass(frozen=True)
class Detector:
    """One single-shot detector frame."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2:
            raise DimensionError(f"detector data must be 2D, got {d.shape}")
        object.__setattr__(self, "data", d)

    @property
    def my(self) -> int:
        return self.data.shape[0]

    @property
    def ny(self) -> int:
        return self.data.shape[1]

    @property
    def vector(self) -> np.ndarray:
        return self.data.reshape(-1)


class _Blob:
    """Byte cursor with truncation and trailing-garbage checks."""

    def __init__(self, path, magic: bytes):
        self.path = str(path)
        self.buf = Path(path).read_bytes()
        self.pos = 0
        head = self.take(4, "magic")
        if head != magic:
            raise FormatError(
                f"{self.path}: bad magic {head!r}, expected {magic.decode()!r}"
            )

    def take(self, n: int, what: str) -> bytes:
        end = self.pos + n
        if end > len(self.buf):
            raise TruncationError(
                f"{self.path}: truncated in {what}: need {n} bytes at offset "
                f"{self.pos}, have {len(self.buf) - self.pos}"
            )
        out = self.buf[self.pos:end]
        self.pos = end
        return out

    def u32s(self, count: int, what: str) -> tuple[int, ...]:
        return struct.unpack(f"<{count}I", self.take(4 * count, what))

    def f64s(self, count: int, what: str) -> np.ndarray:
        return np.frombuffer(self.take(8 * count, what), dtype="<f8").astype(np.float64)

    def f32s(self, count: int, what: str) -> np.ndarray:
        return np.frombuffer(self.take(4 * count, what), dtype="<f4").astype(np.float64)

    def finish(self):
        extra = len(self.buf) - self.pos
        if extra:
            raise FormatError(f"{self.path}: {extra} trailing bytes after payload")


def read_cube(path) -> Cube:
    blob = _Blob(path, _MAGIC_CUBE)
    mx, nx, l = blob.u32s(3, "cube header")
    wavelengths = blob.f64s(l, "wavelengths")
    data = blob.f32s(l * mx * nx, "cube samples").reshape(l, mx, nx)
    blob.finish()
    return Cube(wavelengths=wavelengths, data=data)


def write_cube(path, cube: Cube):
    Path(path).write_bytes(
        _MAGIC_CUBE
        + struct.pack("<3I", cube.mx, cube.nx, cube.l)
        + cube.wavelengths.astype("<f8").tobytes()
        + cube.data.astype("<f4").tobytes()
    )


def read_matrix(path) -> Matrix:
    blob = _Blob(path, _MAGIC_MATRIX)
    rows, cols, mx, nx, l, my, ny = blob.u32s(7, "matrix header")
    if rows != my * ny or cols != mx * nx * l:
        raise FormatError(
            f"{path}: header {rows}x{cols} inconsistent with dims "
            f"cube {(mx, nx, l)}, detector {(my, ny)}"
        )
    data = blob.f32s(rows * cols, "matrix entries").reshape((rows, cols), order="F")
    blob.finish()
    return Matrix(mx=mx, nx=nx, l=l, my=my, ny=ny, data=data)


def write_matrix(path, phi: Matrix):
    Path(path).write_bytes(
        _MAGIC_MATRIX
        + struct.pack("<7I", phi.rows, phi.cols, phi.mx, phi.nx, phi.l, phi.my, phi.ny)
        + phi.data.astype("<f4").tobytes(order="F")
    )


def read_detector(path) -> Detector:
    blob = _Blob(path, _MAGIC_DETECTOR)
    my, ny = blob.u32s(2, "detector header")
    data = blob.f32s(my * ny, "detector samples").reshape(my, ny)
    blob.finish()
    return Detector(data=data)


def write_detector(path, img: Detector):
    Path(path).write_bytes(
        _MAGIC_DETECTOR
        + struct.pack("<2I", img.my, img.ny)
        + img.data.astype("<f4").tobytes()
    )
