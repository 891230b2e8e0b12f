"""Command-line pipeline: calibrate -> sense -> reconstruct -> eval, plus patch.

Every stage reads and writes the documented file formats, so external tools
(and the learned-reconstruction component) interoperate without linking
against this package. Each run writes a JSON manifest next to its outputs.

Exit codes are a stable scripting contract:

  0  success
  2  usage or parameter error
  3  I/O, file format, or capacity error
  4  dimension mismatch
  5  numerical failure (degenerate matrix, divergence)

The heavy imports happen inside main() so that GISC_THREADS can cap the
BLAS thread pools before numpy first loads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

_THREAD_ENV_VARS = (
    "OPENBLAS_NUM_THREADS",
    "OMP_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)


def _usage_error(msg: str) -> SystemExit:
    print(f"error: {msg}", file=sys.stderr)
    return SystemExit(2)


def _apply_thread_cap():
    cap = os.environ.get("GISC_THREADS")
    if cap is None:
        return
    try:
        n = int(cap)
        if n < 1:
            raise ValueError
    except ValueError:
        raise _usage_error(f"GISC_THREADS must be a positive integer, got {cap!r}")
    for var in _THREAD_ENV_VARS:
        os.environ[var] = str(n)


def _dims3(text: str) -> tuple[int, int, int]:
    parts = text.lower().split("x")
    if len(parts) != 3 or not all(p.isdigit() for p in parts):
        raise argparse.ArgumentTypeError(f"expected MXxNXxL, got {text!r}")
    return tuple(int(p) for p in parts)


def _dims2(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise argparse.ArgumentTypeError(f"expected MYxNY, got {text!r}")
    return tuple(int(p) for p in parts)


def _band_range(text: str) -> tuple[float, float]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected LO:HI nm, got {text!r}")
    try:
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI nm, got {text!r}")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="giscsim",
        description="Speckle-encoding hyperspectral camera simulator and "
                    "reconstruction toolkit.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", help="synthesize the speckle sensing matrix")
    c.add_argument("--cube-dims", type=_dims3, required=True, metavar="MXxNXxL")
    c.add_argument("--detector", type=_dims2, required=True, metavar="MYxNY")
    c.add_argument("--grain", type=float, default=1.0,
                   help="speckle grain size in detector pixels (default 1)")
    c.add_argument("--mean-intensity", type=float, default=1.0)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--stream", type=int, default=0)
    c.add_argument("--out", required=True, help="output matrix file")

    s = sub.add_parser("sense", help="single-shot measurement of a cube")
    s.add_argument("--matrix", required=True)
    s.add_argument("--cube", required=True)
    s.add_argument("--snr-db", type=float, default=float("inf"),
                   help="target SNR in dB against mean signal power mean(y^2); "
                        "inf for noise-free (default inf)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--stream", type=int, default=0)
    s.add_argument("--out", required=True, help="output detector file")

    r = sub.add_parser("reconstruct", help="recover a cube from a measurement")
    r.add_argument("--algo", choices=("dgi", "twist"), required=True)
    r.add_argument("--matrix", required=True)
    r.add_argument("--meas", required=True)
    r.add_argument("--lambda-reg", type=float, default=0.05)
    r.add_argument("--alpha", type=float, default=1.78)
    r.add_argument("--beta", type=float, default=1.0)
    r.add_argument("--iters", type=int, default=500)
    r.add_argument("--tol", type=float, default=1e-6)
    r.add_argument("--regularizer", choices=("soft_threshold_l1", "tv_per_band"),
                   default="soft_threshold_l1")
    r.add_argument("--nonneg", action="store_true")
    r.add_argument("--out", required=True, help="output cube file")

    e = sub.add_parser("eval", help="score a reconstruction against a reference")
    e.add_argument("--ref", required=True)
    e.add_argument("--rec", required=True)
    e.add_argument("--matrix")
    e.add_argument("--meas")
    e.add_argument("--peak", type=float, default=1.0)
    e.add_argument("--loss-alpha", type=float, default=50.0)
    e.add_argument("--loss-beta", type=float, default=1.0)
    e.add_argument("--loss-gamma", type=float, default=50.0)
    e.add_argument("--out", required=True, help="output JSON report")

    t = sub.add_parser("patch", help="cut a cube into training patches")
    t.add_argument("--cube", required=True)
    t.add_argument("--size", type=int, required=True)
    t.add_argument("--stride", type=int, required=True)
    t.add_argument("--bands", type=_band_range, metavar="LO:HI",
                   default=(float("-inf"), float("inf")))
    t.add_argument("--out-dir", required=True)
    return p


def _write_manifest(path, args: argparse.Namespace, outputs: list, wall: float):
    import math

    from . import __version__

    def enc(v):
        if isinstance(v, float) and not math.isfinite(v):
            return str(v)
        if isinstance(v, tuple):
            return list(v)
        return v

    params = {k: enc(v) for k, v in vars(args).items() if k != "command"}
    manifest = {
        "command": " ".join(sys.argv) if sys.argv else args.command,
        "subcommand": args.command,
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "parameters": params,
        "outputs": [str(o) for o in outputs],
        "wall_time_s": wall,
    }
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, default=str)
        f.write("\n")


def _cmd_calibrate(args):
    from .core import RngSpec
    from .dataio import write_matrix
    from .forward import SpeckleSpec, calibrate

    t0 = time.perf_counter()
    spec = SpeckleSpec(correlation_px=args.grain, mean_intensity=args.mean_intensity,
                       rng=RngSpec(seed=args.seed, stream=args.stream))
    phi = calibrate(args.cube_dims, args.detector, spec)
    write_matrix(args.out, phi)
    _write_manifest(args.out + ".manifest.json", args, [args.out],
                    time.perf_counter() - t0)


def _cmd_sense(args):
    import math

    from .core import RngSpec
    from .dataio import read_cube, read_matrix, write_detector
    from .forward import NoiseSpec, add_noise, sense

    t0 = time.perf_counter()
    phi = read_matrix(args.matrix)
    cube = read_cube(args.cube)
    y = sense(phi, cube)
    if args.snr_db != math.inf:
        y = add_noise(y, NoiseSpec(snr_db=args.snr_db,
                                   rng=RngSpec(seed=args.seed, stream=args.stream)))
    write_detector(args.out, y)
    _write_manifest(args.out + ".manifest.json", args, [args.out],
                    time.perf_counter() - t0)


def _cmd_reconstruct(args):
    from .dataio import read_detector, read_matrix, write_cube
    from .recon import TwistConfig, dgi, twist

    t0 = time.perf_counter()
    phi = read_matrix(args.matrix)
    y = read_detector(args.meas)
    outputs = [args.out]
    if args.algo == "dgi":
        result = dgi(y, phi)
    else:
        cfg = TwistConfig(lambda_reg=args.lambda_reg, alpha_tw=args.alpha,
                          beta_tw=args.beta, max_iters=args.iters, tol=args.tol,
                          regularizer=args.regularizer, nonneg=args.nonneg)
        result = twist(y, phi, cfg)
        trace_path = args.out + ".trace.csv"
        with open(trace_path, "w") as f:
            f.write("iteration,objective\n")
            for i, v in enumerate(result.objective_trace, 1):
                f.write(f"{i},{float(v)!r}\n")
        outputs.append(trace_path)
    write_cube(args.out, result.cube)
    _write_manifest(args.out + ".manifest.json", args, outputs,
                    time.perf_counter() - t0)


def _cmd_eval(args):
    from .dataio import read_cube, read_detector, read_matrix
    from .metrics import LossWeights, evaluate

    if (args.matrix is None) != (args.meas is None):
        raise _usage_error("--matrix and --meas must be given together")
    t0 = time.perf_counter()
    ref = read_cube(args.ref)
    rec = read_cube(args.rec)
    y = read_detector(args.meas) if args.meas else None
    phi = read_matrix(args.matrix) if args.matrix else None
    weights = LossWeights(alpha=args.loss_alpha, beta=args.loss_beta,
                          gamma=args.loss_gamma)
    report = evaluate(ref, rec, y=y, phi=phi, weights=weights, peak=args.peak)
    with open(args.out, "w") as f:
        json.dump(report.to_json_obj(), f, indent=2)
        f.write("\n")
    _write_manifest(args.out + ".manifest.json", args, [args.out],
                    time.perf_counter() - t0)


def _cmd_patch(args):
    from pathlib import Path

    from .dataio import PatchSpec, extract_patches, read_cube, write_cube

    t0 = time.perf_counter()
    cube = read_cube(args.cube)
    lo, hi = args.bands
    spec = PatchSpec(size=args.size, stride=args.stride,
                     band_lo_nm=lo, band_hi_nm=hi)
    patches = extract_patches(cube, spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for i, patch in enumerate(patches):
        path = out_dir / f"patch_{i:04d}.gsc1"
        write_cube(path, patch)
        files.append(str(path))
    _write_manifest(out_dir / "manifest.json", args, files,
                    time.perf_counter() - t0)


_DISPATCH = {
    "calibrate": _cmd_calibrate,
    "sense": _cmd_sense,
    "reconstruct": _cmd_reconstruct,
    "eval": _cmd_eval,
    "patch": _cmd_patch,
}


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = _build_parser()
    args = parser.parse_args(argv)

    from .errors import (
        CapacityError,
        DegenerateMatrixError,
        DimensionError,
        DivergenceError,
        FormatError,
        ParameterError,
        SelectionError,
    )

    try:
        _DISPATCH[args.command](args)
    except (ParameterError, SelectionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except DimensionError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except (DegenerateMatrixError, DivergenceError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 5
    except (FormatError, CapacityError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
