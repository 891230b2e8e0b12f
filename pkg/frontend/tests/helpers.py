"""Shared builders for the test suite.

Every dataset here is produced by driving the giscsim command line in a
subprocess; nothing in these tests imports giscsim. That keeps the two
packages coupled only through files and exit codes.
"""

import subprocess
import sys
from pathlib import Path

import numpy as np

from vdunet import Cube, write_cube

GISCSIM = [sys.executable, "-m", "giscsim.cli"]
VDUNET = [sys.executable, "-m", "vdunet.cli"]


def run_giscsim(*args):
    """Run a giscsim subcommand and fail the test on a nonzero exit."""
    proc = subprocess.run(GISCSIM + [str(a) for a in args],
                          capture_output=True, text=True)
    assert proc.returncode == 0, (
        f"giscsim {' '.join(str(a) for a in args)}\n"
        f"exit {proc.returncode}\nstderr: {proc.stderr}"
    )
    return proc


def run_vdunet(*args):
    """Run a vdunet subcommand; callers assert on the returned process."""
    return subprocess.run(VDUNET + [str(a) for a in args],
                          capture_output=True, text=True)


def blob_cube(rng, mx, nx, l):
    """Smooth test scene: three Gaussian spots with per-band amplitudes."""
    yy, xx = np.mgrid[0:mx, 0:nx]
    data = np.zeros((l, mx, nx))
    for _ in range(3):
        cy, cx = rng.uniform(2, mx - 2), rng.uniform(2, nx - 2)
        sigma = rng.uniform(1.5, 3.0)
        spot = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma * sigma))
        data += rng.uniform(0.3, 1.0, size=l)[:, None, None] * spot
    data = (data / max(data.max(), 1e-9)).astype(np.float32).astype(np.float64)
    return Cube(wavelengths=np.linspace(450.0, 650.0, l), data=data)


def make_dataset(root, n, seed0=0, snr="inf", mx=16, nx=16, l=5):
    """Build `n` sample triples under `root` via the giscsim CLI.

    Layout: matrix.gsm1 plus sNNN.{scene.gsc1,meas.gsd1,dgi.gsc1}.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    run_giscsim("calibrate", "--cube-dims", f"{mx}x{nx}x{l}",
                "--detector", f"{2 * mx}x{2 * nx}", "--grain", "2",
                "--seed", "7", "--out", root / "matrix.gsm1")
    for i in range(n):
        rng = np.random.default_rng(seed0 + i)
        scene = root / f"s{i:03d}.scene.gsc1"
        write_cube(scene, blob_cube(rng, mx, nx, l))
        run_giscsim("sense", "--matrix", root / "matrix.gsm1",
                    "--cube", scene, "--snr-db", snr, "--seed", 100 + i,
                    "--out", root / f"s{i:03d}.meas.gsd1")
        run_giscsim("reconstruct", "--algo", "dgi",
                    "--matrix", root / "matrix.gsm1",
                    "--meas", root / f"s{i:03d}.meas.gsd1",
                    "--out", root / f"s{i:03d}.dgi.gsc1")
    return root
