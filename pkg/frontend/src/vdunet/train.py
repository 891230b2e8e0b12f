"""Seeded training loop over file-based datasets, with checkpointing.

A training sample is a triple of files: the ground-truth scene cube
(.gsc1), the detector measurement it produced (.gsd1), and the
correlation-estimate cube fed to the net alongside the frame (.gsc1). One
sensing matrix (.gsm1) is shared by every sample and powers the
measurement-consistency term of the loss.

Outputs: `checkpoint.pt` (serialized weights plus architecture fields),
`checkpoint.json` (human-readable config sidecar), and `loss_curve.csv`
(per-epoch mean training loss). A fixed seed reproduces the loss curve
bit for bit on the same device type.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import DimensionError, NumericalError, ParameterError
from .formats import read_cube, read_detector, read_matrix
from .loss import DEFAULT_WEIGHTS, composite_loss
from .model import NetConfig, VDUnet

__all__ = ["TrainConfig", "TrainResult", "train", "load_checkpoint"]


@dataclass(frozen=True)
class TrainConfig:
    """Dataset paths and optimization knobs."""

    matrix: str
    scenes: tuple[str, ...]
    measurements: tuple[str, ...]
    dgi_inputs: tuple[str, ...]
    epochs: int = 100
    batch_size: int = 4
    lr: float = 1e-3
    seed: int = 0
    weights: tuple[float, float, float] = DEFAULT_WEIGHTS

    def __post_init__(self):
        object.__setattr__(self, "scenes", tuple(str(p) for p in self.scenes))
        object.__setattr__(self, "measurements",
                           tuple(str(p) for p in self.measurements))
        object.__setattr__(self, "dgi_inputs",
                           tuple(str(p) for p in self.dgi_inputs))
        n = len(self.scenes)
        if n == 0:
            raise ParameterError("need at least one training sample")
        if len(self.measurements) != n or len(self.dgi_inputs) != n:
            raise ParameterError(
                f"sample lists disagree: {n} scenes, {len(self.measurements)} "
                f"measurements, {len(self.dgi_inputs)} dgi inputs"
            )
        for name, lo in (("epochs", 1), ("batch_size", 1), ("seed", 0)):
            v = getattr(self, name)
            if int(v) != v or int(v) < lo:
                raise ParameterError(f"{name} must be an integer >= {lo}, got {v!r}")
            object.__setattr__(self, name, int(v))
        if not (math.isfinite(self.lr) and self.lr > 0):
            raise ParameterError(f"lr must be finite and > 0, got {self.lr!r}")
        w = tuple(float(v) for v in self.weights)
        if len(w) != 3 or any(not (math.isfinite(v) and v >= 0) for v in w):
            raise ParameterError(f"weights must be three finite values >= 0, got {self.weights!r}")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class TrainResult:
    loss_curve: np.ndarray
    checkpoint_path: Path
    sidecar_path: Path
    curve_path: Path
    net: VDUnet


def _load_dataset(cfg: TrainConfig):
    phi = read_matrix(cfg.matrix)
    scenes, frames, estimates = [], [], []
    for scene_path, meas_path, dgi_path in zip(cfg.scenes, cfg.measurements,
                                               cfg.dgi_inputs):
        scene = read_cube(scene_path)
        frame = read_detector(meas_path)
        estimate = read_cube(dgi_path)
        if scene.dims != phi.cube_dims:
            raise DimensionError(
                f"{scene_path}: cube dims {scene.dims} do not match the "
                f"matrix's {phi.cube_dims}"
            )
        if estimate.dims != phi.cube_dims:
            raise DimensionError(
                f"{dgi_path}: cube dims {estimate.dims} do not match the "
                f"matrix's {phi.cube_dims}"
            )
        if (frame.my, frame.ny) != phi.detector_dims:
            raise DimensionError(
                f"{meas_path}: frame dims {(frame.my, frame.ny)} do not match "
                f"the matrix's {phi.detector_dims}"
            )
        scenes.append(scene.data)
        frames.append(frame.data)
        estimates.append(estimate.data)
    if (phi.my, phi.ny) != (2 * phi.mx, 2 * phi.nx):
        raise DimensionError(
            f"net needs the frame to be 2x the cube grid, got detector "
            f"{phi.detector_dims} for cube {phi.cube_dims}"
        )
    def stack32(arrs):
        return torch.as_tensor(np.stack(arrs), dtype=torch.float32)

    return (torch.as_tensor(phi.data, dtype=torch.float32), phi.l,
            stack32(scenes), stack32(frames), stack32(estimates))


def train(cfg: TrainConfig, net_cfg: NetConfig, out_dir, net: VDUnet | None = None) -> TrainResult:
    """Run the loop and write checkpoint + sidecar + loss curve to out_dir."""
    phi, bands, scenes, frames, estimates = _load_dataset(cfg)
    n = scenes.shape[0]

    torch.manual_seed(cfg.seed)
    if net is None:
        net = VDUnet(net_cfg, bands=bands)
    elif net.bands != bands:
        raise DimensionError(f"net has {net.bands} bands, dataset has {bands}")
    net.train()
    optimizer = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    order_rng = torch.Generator().manual_seed(cfg.seed)

    curve = np.empty(cfg.epochs, dtype=np.float64)
    for epoch in range(cfg.epochs):
        order = torch.randperm(n, generator=order_rng)
        epoch_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            out = net(frames[batch], estimates[batch])
            losses = composite_loss(scenes[batch], out, frames[batch], phi,
                                    weights=cfg.weights)
            loss = losses.mean()
            if not torch.isfinite(loss):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_sum += float(losses.detach().sum())
        curve[epoch] = epoch_sum / n

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out_dir / "checkpoint.pt"
    sidecar_path = out_dir / "checkpoint.json"
    curve_path = out_dir / "loss_curve.csv"

    torch.save({"state_dict": net.state_dict(),
                "net_config": asdict(net_cfg),
                "bands": bands}, checkpoint_path)
    sidecar_path.write_text(json.dumps({
        "net_config": asdict(net_cfg),
        "bands": bands,
        "train": {
            "matrix": cfg.matrix,
            "samples": n,
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "lr": cfg.lr,
            "seed": cfg.seed,
            "weights": list(cfg.weights),
            "final_loss": curve[-1],
        },
        "checkpoint": checkpoint_path.name,
        "loss_curve_csv": curve_path.name,
    }, indent=2) + "\n")
    with open(curve_path, "w") as f:
        f.write("epoch,loss\n")
        for i, v in enumerate(curve, start=1):
            f.write(f"{i},{float(v)!r}\n")

    return TrainResult(loss_curve=curve, checkpoint_path=checkpoint_path,
                       sidecar_path=sidecar_path, curve_path=curve_path, net=net)


def load_checkpoint(path) -> tuple[VDUnet, dict]:
    """Rebuild the net from a checkpoint; returns it in eval mode."""
    blob = torch.load(path, map_location="cpu", weights_only=True)
    for key in ("state_dict", "net_config", "bands"):
        if key not in blob:
            raise ParameterError(f"{path}: checkpoint is missing {key!r}")
    net = VDUnet(NetConfig(**blob["net_config"]), bands=blob["bands"])
    net.load_state_dict(blob["state_dict"])
    net.eval()
    return net, {"net_config": blob["net_config"], "bands": blob["bands"]}
