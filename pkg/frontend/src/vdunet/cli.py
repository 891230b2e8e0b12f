"""Command-line front end: train, eval, gradcheck.

Exit codes match the simulator CLI's contract: 0 success, 2 usage or
parameter errors, 3 I/O or file-format errors, 4 dimension mismatches,
5 numerical failures (non-finite loss, failed gradient audit).

`train` consumes a dataset directory laid out as

    matrix.gsm1
    <name>.scene.gsc1   ground truth
    <name>.meas.gsd1    detector frame
    <name>.dgi.gsc1     correlation estimate fed to the net

with one triple per sample, discovered by the .scene.gsc1 suffix.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from .errors import DimensionError, FormatError, NumericalError, ParameterError
from .formats import Cube, read_cube, read_detector, read_matrix, write_cube
from .gradcheck import grad_check
from .loss import DEFAULT_WEIGHTS, composite_loss, ssim
from .model import NetConfig
from .train import TrainConfig, load_checkpoint, train

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vdunet", description="Toy learned reconstruction front end."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train on a directory of sample triples")
    t.add_argument("--data-dir", required=True)
    t.add_argument("--out-dir", required=True)
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--batch-size", type=int, default=4)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--base-channels", type=int, default=8)
    t.add_argument("--depth", type=int, default=3)
    t.add_argument("--layers", type=int, default=4,
                   help="dense layers per block")
    t.add_argument("--growth", type=int, default=8)
    t.add_argument("--dropout", type=float, default=0.05)
    t.add_argument("--alpha", type=float, default=DEFAULT_WEIGHTS[0])
    t.add_argument("--beta", type=float, default=DEFAULT_WEIGHTS[1])
    t.add_argument("--gamma", type=float, default=DEFAULT_WEIGHTS[2])

    e = sub.add_parser("eval", help="run a checkpoint on one sample")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--meas", required=True)
    e.add_argument("--dgi", required=True)
    e.add_argument("--out-cube", required=True)
    e.add_argument("--ref", help="ground truth cube; enables the loss report")
    e.add_argument("--matrix", help="sensing matrix; enables the loss report")
    e.add_argument("--report", help="write scores to this JSON file")

    g = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    g.add_argument("--term", choices=("composite", "ssim", "l1"),
                   default="composite")
    g.add_argument("--base-channels", type=int, default=4)
    g.add_argument("--depth", type=int, default=2)
    g.add_argument("--layers", type=int, default=2)
    g.add_argument("--growth", type=int, default=4)
    g.add_argument("--bands", type=int, default=3)
    g.add_argument("--spatial", type=int, default=16)
    g.add_argument("--params", type=int, default=120)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--tol", type=float, default=1e-4)
    g.add_argument("--h-rel", type=float, default=1e-4)
    g.add_argument("--report", help="write the audit details to this JSON file")
    return parser


def _scan_data_dir(data_dir: str) -> TrainConfig:
    root = Path(data_dir)
    matrix = root / "matrix.gsm1"
    if not matrix.is_file():
        raise ParameterError(f"{root}: no matrix.gsm1 in the data directory")
    scenes, frames, estimates = [], [], []
    for scene in sorted(root.glob("*.scene.gsc1")):
        stem = scene.name[:-len(".scene.gsc1")]
        frame = root / f"{stem}.meas.gsd1"
        estimate = root / f"{stem}.dgi.gsc1"
        if not frame.is_file() or not estimate.is_file():
            raise ParameterError(
                f"{scene.name}: missing sibling {stem}.meas.gsd1 or {stem}.dgi.gsc1"
            )
        scenes.append(str(scene))
        frames.append(str(frame))
        estimates.append(str(estimate))
    if not scenes:
        raise ParameterError(f"{root}: no *.scene.gsc1 samples found")
    return TrainConfig(matrix=str(matrix), scenes=tuple(scenes),
                       measurements=tuple(frames), dgi_inputs=tuple(estimates))


def _cmd_train(args) -> int:
    base = _scan_data_dir(args.data_dir)
    cfg = TrainConfig(matrix=base.matrix, scenes=base.scenes,
                      measurements=base.measurements, dgi_inputs=base.dgi_inputs,
                      epochs=args.epochs, batch_size=args.batch_size,
                      lr=args.lr, seed=args.seed,
                      weights=(args.alpha, args.beta, args.gamma))
    net_cfg = NetConfig(base_channels=args.base_channels, depth=args.depth,
                        dense_layers_per_block=args.layers, growth_rate=args.growth,
                        dropout=args.dropout)
    result = train(cfg, net_cfg, args.out_dir)
    print(f"trained {len(base.scenes)} samples for {cfg.epochs} epochs: "
          f"loss {result.loss_curve[0]:.6g} -> {result.loss_curve[-1]:.6g}")
    print(f"wrote {result.checkpoint_path}, {result.sidecar_path.name}, "
          f"{result.curve_path.name}")
    return 0


def _cmd_eval(args) -> int:
    if (args.ref is None) != (args.matrix is None):
        raise ParameterError("--ref and --matrix must be given together")
    net, _ = load_checkpoint(args.checkpoint)
    frame = read_detector(args.meas)
    estimate = read_cube(args.dgi)
    with torch.no_grad():
        out = net(frame.data, estimate.data)
    # Exported cubes are physical intensities; clamp the linear head's output.
    cube = Cube(wavelengths=estimate.wavelengths,
                data=out.double().clamp(min=0.0).numpy())
    write_cube(args.out_cube, cube)
    print(f"wrote {args.out_cube}")

    if args.ref is not None:
        ref = read_cube(args.ref)
        phi = read_matrix(args.matrix)
        ref_t = torch.as_tensor(ref.data)[None]
        rec_t = torch.as_tensor(cube.data)[None]
        y_t = torch.as_tensor(frame.data)[None]
        phi_t = torch.as_tensor(phi.data)
        scores = {
            "loss": float(composite_loss(ref_t, rec_t, y_t, phi_t)[0]),
            "ssim": float(ssim(ref_t, rec_t)[0]),
        }
        print(f"loss {scores['loss']:.6g}, ssim {scores['ssim']:.6g}")
        if args.report:
            Path(args.report).write_text(json.dumps(scores, indent=2) + "\n")
    return 0


def _cmd_gradcheck(args) -> int:
    net_cfg = NetConfig(base_channels=args.base_channels, depth=args.depth,
                        dense_layers_per_block=args.layers, growth_rate=args.growth,
                        dropout=0.0)
    report = grad_check(net_cfg, bands=args.bands, spatial=args.spatial,
                        n_params=args.params, seed=args.seed, term=args.term,
                        tol=args.tol, h_rel=args.h_rel)
    print(report.summary())
    if args.report:
        Path(args.report).write_text(json.dumps(asdict(report), indent=2) + "\n")
    return 0 if report.passed else 5


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"train": _cmd_train, "eval": _cmd_eval,
                "gradcheck": _cmd_gradcheck}
    try:
        return handlers[args.command](args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DimensionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
