"""Persistence and dataset preparation.

Three self-describing little-endian binary formats, all bit-exact on round
trip (disk precision is float32; wavelength grids are float64):

  cube      "GSC1" | u32 mx, nx, l | f64 wavelengths[l] | f32 data, canonical order
  matrix    "GSM1" | u32 rows, cols, mx, nx, l, my, ny | f32 data, column-contiguous
  detector  "GSD1" | u32 my, ny | f32 data, row-major

Plus band selection, spatial patching, max-normalization, 8-bit PGM band
export, and a plain-float raw import with a sidecar text header for cubes
that originate outside this toolkit.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DetectorImage, HsiCube, SensingMatrix
from .errors import (
    DimensionError,
    FormatError,
    ParameterError,
    SelectionError,
    TruncationError,
)

__all__ = [
    "PatchSpec",
    "read_cube",
    "write_cube",
    "read_matrix",
    "write_matrix",
    "read_detector",
    "write_detector",
    "select_bands",
    "extract_patches",
    "normalize",
    "export_band_images",
    "import_raw_cube",
]

_MAGIC_CUBE = b"GSC1"
_MAGIC_MATRIX = b"GSM1"
_MAGIC_DETECTOR = b"GSD1"
_U32_MAX = 0xFFFFFFFF


@dataclass(frozen=True)
class PatchSpec:
    """Spatial patch grid plus an inclusive wavelength window."""

    size: int
    stride: int
    band_lo_nm: float = -math.inf
    band_hi_nm: float = math.inf

    def __post_init__(self):
        if int(self.size) < 1 or int(self.stride) < 1:
            raise ParameterError(
                f"size and stride must be >= 1, got {self.size!r}, {self.stride!r}"
            )
        object.__setattr__(self, "size", int(self.size))
        object.__setattr__(self, "stride", int(self.stride))
        if math.isnan(self.band_lo_nm) or math.isnan(self.band_hi_nm) \
                or self.band_lo_nm > self.band_hi_nm:
            raise ParameterError(
                f"band range [{self.band_lo_nm}, {self.band_hi_nm}] is invalid"
            )


class _Reader:
    """Cursor over a fully loaded file, with hard bounds checks."""

    def __init__(self, path, magic: bytes):
        self.path = str(path)
        self.buf = Path(path).read_bytes()
        self.pos = 0
        got = self._take(4, "magic")
        if got != magic:
            raise FormatError(
                f"{self.path}: bad magic {got!r}, expected {magic.decode()!r}"
            )

    def _take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncationError(
                f"{self.path}: truncated while reading {what} "
                f"(need {n} bytes at offset {self.pos}, have {len(self.buf) - self.pos})"
            )
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self._take(4, what))[0]

    def f64s(self, count: int, what: str) -> np.ndarray:
        raw = self._take(8 * count, what)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64)

    def f32s(self, count: int, what: str) -> np.ndarray:
        raw = self._take(4 * count, what)
        return np.frombuffer(raw, dtype="<f4").astype(np.float64)

    def done(self):
        if self.pos != len(self.buf):
            raise FormatError(
                f"{self.path}: {len(self.buf) - self.pos} trailing bytes after payload"
            )


def _u32_bytes(*values: int) -> bytes:
    for v in values:
        if not 0 <= v <= _U32_MAX:
            raise FormatError(f"dimension {v} does not fit in u32")
    return struct.pack("<" + "I" * len(values), *values)


def write_cube(path, cube: HsiCube):
    blob = (_MAGIC_CUBE + _u32_bytes(cube.mx, cube.nx, cube.l)
            + cube.wavelengths.astype("<f8").tobytes()
            + cube.data.astype("<f4").tobytes())
    Path(path).write_bytes(blob)


def read_cube(path) -> HsiCube:
    r = _Reader(path, _MAGIC_CUBE)
    mx = r.u32("mx")
    nx = r.u32("nx")
    l = r.u32("l")
    wavelengths = r.f64s(l, "wavelengths")
    data = r.f32s(l * mx * nx, "cube samples")
    r.done()
    return HsiCube(wavelengths=wavelengths, data=data.reshape(l, mx, nx))


def write_matrix(path, phi: SensingMatrix):
    blob = (_MAGIC_MATRIX
            + _u32_bytes(phi.rows, phi.cols, phi.mx, phi.nx, phi.l, phi.my, phi.ny)
            + phi.data.astype("<f4").tobytes(order="F"))
    Path(path).write_bytes(blob)


def read_matrix(path) -> SensingMatrix:
    r = _Reader(path, _MAGIC_MATRIX)
    rows = r.u32("rows")
    cols = r.u32("cols")
    mx = r.u32("mx")
    nx = r.u32("nx")
    l = r.u32("l")
    my = r.u32("my")
    ny = r.u32("ny")
    if rows != my * ny or cols != mx * nx * l:
        raise FormatError(
            f"{path}: header {rows}x{cols} inconsistent with dims "
            f"cube {(mx, nx, l)}, detector {(my, ny)}"
        )
    data = r.f32s(rows * cols, "matrix entries")
    r.done()
    return SensingMatrix(mx=mx, nx=nx, l=l, my=my, ny=ny,
                         data=data.reshape((rows, cols), order="F"))


def write_detector(path, img: DetectorImage):
    blob = (_MAGIC_DETECTOR + _u32_bytes(img.my, img.ny)
            + img.data.astype("<f4").tobytes())
    Path(path).write_bytes(blob)


def read_detector(path) -> DetectorImage:
    r = _Reader(path, _MAGIC_DETECTOR)
    my = r.u32("my")
    ny = r.u32("ny")
    data = r.f32s(my * ny, "detector samples")
    r.done()
    return DetectorImage(data=data.reshape(my, ny))


def select_bands(cube: HsiCube, lo_nm: float, hi_nm: float) -> HsiCube:
    """Sub-cube with exactly the bands whose wavelength is in [lo, hi]."""
    mask = (cube.wavelengths >= lo_nm) & (cube.wavelengths <= hi_nm)
    if not mask.any():
        raise SelectionError(
            f"no bands in [{lo_nm}, {hi_nm}] nm; cube covers "
            f"[{cube.wavelengths[0]:g}, {cube.wavelengths[-1]:g}] nm"
        )
    return HsiCube(wavelengths=cube.wavelengths[mask], data=cube.data[mask])


def extract_patches(cube: HsiCube, spec: PatchSpec) -> list[HsiCube]:
    """Band-filter, then cut fully contained size x size patches.

    Offsets run (i*stride, j*stride), row-major over offsets, so the patch
    count is (floor((mx-size)/stride)+1) * (floor((nx-size)/stride)+1).
    """
    sub = select_bands(cube, spec.band_lo_nm, spec.band_hi_nm)
    k = spec.size
    if k > sub.mx or k > sub.nx:
        raise DimensionError(
            f"patch size {k} exceeds spatial dims ({sub.mx}, {sub.nx})"
        )
    out = []
    for r in range(0, sub.mx - k + 1, spec.stride):
        for c in range(0, sub.nx - k + 1, spec.stride):
            out.append(HsiCube(wavelengths=sub.wavelengths,
                               data=sub.data[:, r:r + k, c:c + k]))
    return out


def normalize(cube: HsiCube) -> HsiCube:
    """Scale so the global max is exactly 1.0; all-zero cubes pass through."""
    peak = float(cube.data.max())
    if peak == 0.0:
        return cube
    return HsiCube(wavelengths=cube.wavelengths, data=cube.data / peak)


def export_band_images(cube: HsiCube, out_dir) -> list[Path]:
    """One 8-bit grayscale PGM (P5) per band, pixel = round-half-up(255 v).

    The cube must already be normalized to [0, 1].
    """
    if float(cube.data.max()) > 1.0:
        raise ParameterError("cube must be normalized to [0, 1] before export")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for b in range(cube.l):
        pixels = np.floor(255.0 * cube.data[b] + 0.5).astype(np.uint8)
        path = out_dir / f"band_{cube.wavelengths[b]:g}nm.pgm"
        header = f"P5\n{cube.nx} {cube.mx}\n255\n".encode("ascii")
        path.write_bytes(header + pixels.tobytes())
        paths.append(path)
    return paths


def import_raw_cube(raw_path, header_path) -> HsiCube:
    """Read a plain little-endian float dump described by a sidecar header.

    The header is text, one "key value" pair per line:

        mx 512
        nx 512
        l 31
        dtype float32            (or float64)
        wavelengths 400,410,...  (l comma-separated values, nm)

    The raw file holds exactly mx*nx*l samples in canonical order. This is
    the ingestion path for cubes exported from other tools.
    """
    fields = {}
    for line_no, line in enumerate(Path(header_path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(" ")
        if not value:
            raise FormatError(f"{header_path}:{line_no}: expected 'key value'")
        fields[key] = value.strip()
    missing = {"mx", "nx", "l", "dtype", "wavelengths"} - fields.keys()
    if missing:
        raise FormatError(f"{header_path}: missing keys {sorted(missing)}")
    try:
        mx, nx, l = int(fields["mx"]), int(fields["nx"]), int(fields["l"])
        wavelengths = np.array([float(v) for v in fields["wavelengths"].split(",")])
    except ValueError as e:
        raise FormatError(f"{header_path}: {e}") from e
    if fields["dtype"] not in ("float32", "float64"):
        raise FormatError(f"{header_path}: dtype must be float32 or float64")
    if wavelengths.size != l:
        raise FormatError(
            f"{header_path}: {wavelengths.size} wavelengths for l={l}"
        )
    dtype = "<f4" if fields["dtype"] == "float32" else "<f8"
    raw = Path(raw_path).read_bytes()
    expect = mx * nx * l * np.dtype(dtype).itemsize
    if len(raw) != expect:
        raise TruncationError(
            f"{raw_path}: {len(raw)} bytes, header implies {expect}"
        )
    data = np.frombuffer(raw, dtype=dtype).astype(np.float64).reshape(l, mx, nx)
    return HsiCube(wavelengths=wavelengths, data=data)
