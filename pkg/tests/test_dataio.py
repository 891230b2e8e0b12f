import math
import struct

import numpy as np
import pytest

from giscsim import (
    DetectorImage,
    DimensionError,
    FormatError,
    HsiCube,
    ParameterError,
    PatchSpec,
    RngSpec,
    SelectionError,
    SensingMatrix,
    SpeckleSpec,
    TruncationError,
    calibrate,
    export_band_images,
    extract_patches,
    import_raw_cube,
    normalize,
    read_cube,
    read_detector,
    read_matrix,
    select_bands,
    write_cube,
    write_detector,
    write_matrix,
)
from giscsim.dataio import _u32_bytes
from helpers import f32_array, f32_cube


def test_cube_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(1)
    cube = f32_cube(rng, 5, 7, 3)
    p = tmp_path / "c.gsc1"
    write_cube(p, cube)
    back = read_cube(p)
    assert np.array_equal(back.wavelengths, cube.wavelengths)
    assert np.array_equal(back.data, cube.data)
    assert back.dims == cube.dims


def test_matrix_round_trip_bit_exact(tmp_path):
    phi = calibrate((3, 4, 2), (5, 6), SpeckleSpec(rng=RngSpec(seed=2)))
    # stored as f32; round-trip equality is against the f32-rounded original
    expected = phi.data.astype(np.float32).astype(np.float64)
    p = tmp_path / "m.gsm1"
    write_matrix(p, phi)
    back = read_matrix(p)
    assert (back.mx, back.nx, back.l, back.my, back.ny) == (3, 4, 2, 5, 6)
    assert np.array_equal(back.data, expected)


def test_detector_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    img = DetectorImage(f32_array(rng, 6, 9, signed=True))  # negatives allowed
    p = tmp_path / "d.gsd1"
    write_detector(p, img)
    back = read_detector(p)
    assert np.array_equal(back.data, img.data)


def test_bad_magic_names_expected(tmp_path):
    rng = np.random.default_rng(4)
    p = tmp_path / "x.bin"
    write_detector(p, DetectorImage(f32_array(rng, 2, 2)))
    with pytest.raises(FormatError, match="GSC1"):
        read_cube(p)
    with pytest.raises(FormatError, match="GSM1"):
        read_matrix(p)
    p2 = tmp_path / "junk.bin"
    p2.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(FormatError, match="GSD1"):
        read_detector(p2)


def test_truncated_file(tmp_path):
    rng = np.random.default_rng(5)
    cube = f32_cube(rng, 2, 2, 3)
    p = tmp_path / "c.gsc1"
    write_cube(p, cube)
    blob = p.read_bytes()
    assert len(blob) == 4 + 12 + 24 + 48
    short = tmp_path / "short.gsc1"
    short.write_bytes(blob[:50])  # cut inside the sample block
    with pytest.raises(TruncationError, match="truncated"):
        read_cube(short)
    short.write_bytes(blob[:10])  # cut inside the header
    with pytest.raises(TruncationError):
        read_cube(short)
    short.write_bytes(b"")
    with pytest.raises(TruncationError):
        read_cube(short)


def test_trailing_bytes(tmp_path):
    rng = np.random.default_rng(6)
    p = tmp_path / "d.gsd1"
    write_detector(p, DetectorImage(f32_array(rng, 3, 3)))
    p.write_bytes(p.read_bytes() + b"\x00")
    with pytest.raises(FormatError, match="trailing"):
        read_detector(p)


def test_matrix_header_consistency(tmp_path):
    # rows=4 contradicts my*ny=6
    blob = (b"GSM1" + struct.pack("<7I", 4, 12, 2, 2, 3, 2, 3)
            + b"\x00" * (4 * 4 * 12))
    p = tmp_path / "bad.gsm1"
    p.write_bytes(blob)
    with pytest.raises(FormatError, match="inconsistent"):
        read_matrix(p)


def test_u32_overflow_rejected():
    _u32_bytes(0, 0xFFFFFFFF)  # bounds are fine
    with pytest.raises(FormatError):
        _u32_bytes(0x1_0000_0000)
    with pytest.raises(FormatError):
        _u32_bytes(-1)


def test_select_bands():
    wl = np.arange(400.0, 701.0, 10.0)  # 31 bands
    rng = np.random.default_rng(7)
    cube = HsiCube(wl, rng.random((31, 4, 4)))
    sub = select_bands(cube, 560.0, 700.0)
    assert sub.l == 15
    assert sub.wavelengths[0] == 560.0 and sub.wavelengths[-1] == 700.0
    np.testing.assert_array_equal(sub.data, cube.data[16:])

    full = select_bands(cube, -math.inf, math.inf)
    assert np.array_equal(full.data, cube.data)

    single = select_bands(cube, 555.0, 565.0)
    assert single.l == 1 and single.wavelengths[0] == 560.0

    with pytest.raises(SelectionError):
        select_bands(cube, 100.0, 200.0)


def test_patch_grid_counts():
    rng = np.random.default_rng(8)
    big = HsiCube(np.array([500.0]), rng.random((1, 1024, 1392)))
    patches = extract_patches(big, PatchSpec(size=128, stride=128))
    assert len(patches) == 8 * 10
    assert all(p.dims == (128, 128, 1) for p in patches)

    whole = extract_patches(big, PatchSpec(size=1024, stride=1))
    # only one vertical offset fits; horizontally floor((1392-1024)/1)+1
    assert len(whole) == 369

    small = HsiCube(np.array([500.0]), rng.random((1, 4, 4)))
    assert len(extract_patches(small, PatchSpec(size=4, stride=1))) == 1
    with pytest.raises(DimensionError):
        extract_patches(small, PatchSpec(size=5, stride=1))


def test_patch_offsets_and_content():
    rng = np.random.default_rng(9)
    cube = HsiCube(np.array([500.0, 510.0]), rng.random((2, 300, 300)))
    patches = extract_patches(cube, PatchSpec(size=128, stride=64))
    assert len(patches) == 9  # offsets 0, 64, 128 on each axis
    k = 0
    for r in (0, 64, 128):
        for c in (0, 64, 128):
            np.testing.assert_array_equal(
                patches[k].data, cube.data[:, r:r + 128, c:c + 128])
            k += 1


def test_patch_band_filter_applies_first():
    wl = np.arange(400.0, 701.0, 100.0)  # 400, 500, 600, 700
    rng = np.random.default_rng(10)
    cube = HsiCube(wl, rng.random((4, 8, 8)))
    patches = extract_patches(cube, PatchSpec(size=8, stride=8,
                                              band_lo_nm=450.0, band_hi_nm=650.0))
    assert len(patches) == 1
    assert patches[0].l == 2
    np.testing.assert_array_equal(patches[0].wavelengths, [500.0, 600.0])


def test_normalize():
    rng = np.random.default_rng(11)
    cube = HsiCube(np.array([1.0, 2.0]), 3.7 * rng.random((2, 5, 5)) + 0.1)
    out = normalize(cube)
    assert float(out.data.max()) == 1.0
    again = normalize(out)
    assert np.array_equal(again.data, out.data)  # idempotent: peak is 1.0
    zero = HsiCube(np.array([1.0]), np.zeros((1, 3, 3)))
    assert np.array_equal(normalize(zero).data, zero.data)


def test_export_band_images(tmp_path):
    data = np.zeros((2, 2, 3))
    data[0] = [[0.0, 0.5, 1.0], [0.25, 0.75, 1.0]]
    data[1] = 0.5
    cube = HsiCube(np.array([560.0, 570.0]), data)
    paths = export_band_images(cube, tmp_path)
    assert [p.name for p in paths] == ["band_560nm.pgm", "band_570nm.pgm"]
    blob = paths[0].read_bytes()
    assert blob.startswith(b"P5\n3 2\n255\n")
    pixels = np.frombuffer(blob[len(b"P5\n3 2\n255\n"):], dtype=np.uint8)
    # round-half-up of 255 v
    np.testing.assert_array_equal(pixels, [0, 128, 255, 64, 191, 255])

    too_big = HsiCube(np.array([560.0]), np.full((1, 2, 2), 1.5))
    with pytest.raises(ParameterError):
        export_band_images(too_big, tmp_path)


def test_import_raw_cube_round_trip(tmp_path):
    rng = np.random.default_rng(12)
    cube = f32_cube(rng, 4, 5, 3)
    raw = tmp_path / "cube.raw"
    hdr = tmp_path / "cube.txt"
    raw.write_bytes(cube.data.astype("<f4").tobytes())
    hdr.write_text("# exported cube\nmx 4\nnx 5\nl 3\ndtype float32\n"
                   "wavelengths 1,2,3\n")
    back = import_raw_cube(raw, hdr)
    assert np.array_equal(back.data, cube.data)
    assert np.array_equal(back.wavelengths, [1.0, 2.0, 3.0])

    raw.write_bytes(cube.data.astype("<f8").tobytes())
    hdr.write_text("mx 4\nnx 5\nl 3\ndtype float64\nwavelengths 1,2,3\n")
    back = import_raw_cube(raw, hdr)
    assert np.array_equal(back.data, cube.data)


def test_import_raw_cube_errors(tmp_path):
    raw = tmp_path / "cube.raw"
    hdr = tmp_path / "cube.txt"
    raw.write_bytes(b"\x00" * (4 * 2 * 2 * 2))

    hdr.write_text("mx 2\nnx 2\nl 2\nwavelengths 1,2\n")
    with pytest.raises(FormatError, match="dtype"):
        import_raw_cube(raw, hdr)

    hdr.write_text("mx 2\nnx 2\nl 2\ndtype int16\nwavelengths 1,2\n")
    with pytest.raises(FormatError, match="dtype"):
        import_raw_cube(raw, hdr)

    hdr.write_text("mx 2\nnx 2\nl 2\ndtype float32\nwavelengths 1,2,3\n")
    with pytest.raises(FormatError, match="wavelengths"):
        import_raw_cube(raw, hdr)

    hdr.write_text("mx 2\nnx 2\nl 2\ndtype float32\nwavelengths 1,2\n")
    raw.write_bytes(b"\x00" * 15)
    with pytest.raises(TruncationError):
        import_raw_cube(raw, hdr)


def test_many_round_trips_bit_exact(tmp_path):
    # a fast version of the acceptance sweep: varied shapes, all three formats
    rng = np.random.default_rng(13)
    for k in range(25):
        mx, nx, l = (int(rng.integers(1, 7)) for _ in range(3))
        cube = f32_cube(rng, mx, nx, l)
        p = tmp_path / f"c{k}.gsc1"
        write_cube(p, cube)
        back = read_cube(p)
        assert np.array_equal(back.data, cube.data)
        assert np.array_equal(back.wavelengths, cube.wavelengths)

        my, ny = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        img = DetectorImage(f32_array(rng, my, ny))
        p = tmp_path / f"d{k}.gsd1"
        write_detector(p, img)
        assert np.array_equal(read_detector(p).data, img.data)

        phi = SensingMatrix(mx=mx, nx=nx, l=l, my=my, ny=ny,
                            data=f32_array(rng, my * ny, mx * nx * l))
        p = tmp_path / f"m{k}.gsm1"
        write_matrix(p, phi)
        assert np.array_equal(read_matrix(p).data, phi.data)
