"""Dual-input dense U-net for learned spectral cube reconstruction.

Two inputs: the raw detector frame (folded to four channels so it aligns
spatially with the cube grid) and a correlation-estimate cube of the scene.
Each passes two convolution units, the results are concatenated, and a
U-shaped body refines them: every encoder level is a dense block followed
by stride-2 average pooling, every decoder level is a factor-2 upscale, an
attention-gated skip concatenation, and another dense block. A 1x1
convolution maps the final features to the output bands.

Convolution units follow the pre-activation convention norm -> ReLU ->
conv (-> dropout). Inside a dense block, layer i receives the block input
plus all i-1 earlier layer outputs, so its input width is
in_channels + (i-1) * growth_rate.

The nominal geometry is a 256x256 frame with a 128x128xL cube; any sizes
with frame = 2x cube and cube dims divisible by 2^depth are accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import DimensionError, ParameterError

__all__ = ["NetConfig", "DenseBlock", "AttentionGate", "VDUnet"]


@dataclass(frozen=True)
class NetConfig:
    """Architecture knobs, defaulted to a toy scale that trains on a CPU."""

    base_channels: int = 8
    depth: int = 3
    dense_layers_per_block: int = 4
    dropout: float = 0.05
    growth_rate: int = 8

    def __post_init__(self):
        for name in ("base_channels", "depth", "dense_layers_per_block", "growth_rate"):
            v = getattr(self, name)
            if int(v) != v or int(v) < 1:
                raise ParameterError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.depth < 2:
            raise ParameterError(f"depth must be >= 2, got {self.depth}")
        d = float(self.dropout)
        if math.isnan(d) or not 0.0 <= d < 1.0:
            raise ParameterError(f"dropout must be in [0, 1), got {self.dropout!r}")
        object.__setattr__(self, "dropout", d)


class _ConvUnit(nn.Module):
    """norm -> ReLU -> 3x3 conv -> dropout."""

    def __init__(self, in_channels: int, out_channels: int, dropout: float):
        super().__init__()
        self.norm = nn.BatchNorm2d(in_channels)
        self.conv = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.drop = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.drop(self.conv(F.relu(self.norm(x))))


class DenseBlock(nn.Module):
    """Stack of conv units where each layer sees all previous outputs."""

    def __init__(self, in_channels: int, n_layers: int, growth: int, dropout: float):
        super().__init__()
        self.layers = nn.ModuleList(
            _ConvUnit(in_channels + i * growth, growth, dropout)
            for i in range(n_layers)
        )
        self.in_channels = in_channels
        self.out_channels = in_channels + n_layers * growth

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for layer in self.layers:
            x = torch.cat([x, layer(x)], dim=1)
        return x


class AttentionGate(nn.Module):
    """Additive attention over a skip tensor, driven by a gating tensor.

    Both inputs map through 1x1 convolutions to a shared width, their sum
    passes a ReLU and a 1x1 convolution to a single channel, and the
    sigmoid of that mask scales the skip. A mask saturated at 1 returns
    the skip unchanged.
    """

    def __init__(self, skip_channels: int, gate_channels: int):
        super().__init__()
        inter = max(skip_channels // 2, 1)
        self.map_skip = nn.Conv2d(skip_channels, inter, 1)
        self.map_gate = nn.Conv2d(gate_channels, inter, 1)
        self.to_mask = nn.Conv2d(inter, 1, 1)

    def forward(self, skip: torch.Tensor, gate: torch.Tensor) -> torch.Tensor:
        a = F.relu(self.map_skip(skip) + self.map_gate(gate))
        return skip * torch.sigmoid(self.to_mask(a))


def _fold_frame(y: torch.Tensor) -> torch.Tensor:
    # (n, 2H, 2W) -> (n, 4, H, W), channels ordered TL, TR, BL, BR.
    return torch.stack(
        [y[:, 0::2, 0::2], y[:, 0::2, 1::2], y[:, 1::2, 0::2], y[:, 1::2, 1::2]],
        dim=1,
    )


class VDUnet(nn.Module):
    """See the module docstring for the architecture.

    `denoiser`, when set, is a callable applied to the network output (a
    post-processing hook, e.g. a pretrained denoising net); it is off by
    default and must preserve the tensor shape.
    """

    def __init__(self, cfg: NetConfig, bands: int, denoiser=None):
        super().__init__()
        if int(bands) != bands or int(bands) < 1:
            raise ParameterError(f"bands must be a positive integer, got {bands!r}")
        self.cfg = cfg
        self.bands = int(bands)
        self.denoiser = denoiser
        b, k, g, d = (cfg.base_channels, cfg.dense_layers_per_block,
                      cfg.growth_rate, cfg.dropout)

        self.frame_stem = nn.Sequential(_ConvUnit(4, b, d), _ConvUnit(b, b, d))
        self.cube_stem = nn.Sequential(_ConvUnit(self.bands, b, d), _ConvUnit(b, b, d))

        channels = 2 * b
        self.encoder = nn.ModuleList()
        skip_channels = []
        for _ in range(cfg.depth):
            block = DenseBlock(channels, k, g, d)
            self.encoder.append(block)
            skip_channels.append(block.out_channels)
            channels = block.out_channels
        self.pool = nn.AvgPool2d(2)

        self.gates = nn.ModuleList()
        self.decoder = nn.ModuleList()
        for skip in reversed(skip_channels):
            self.gates.append(AttentionGate(skip, channels))
            block = DenseBlock(skip + channels, k, g, d)
            self.decoder.append(block)
            channels = block.out_channels
        self.head = nn.Conv2d(channels, self.bands, 1)

    def _check_shapes(self, y: torch.Tensor, dgi: torch.Tensor):
        if y.ndim != 3 or dgi.ndim != 4:
            raise DimensionError(
                f"expected frame (n, 2H, 2W) and cube (n, l, H, W), got "
                f"{tuple(y.shape)} and {tuple(dgi.shape)}"
            )
        n, l, h, w = dgi.shape
        if l != self.bands:
            raise DimensionError(f"net expects {self.bands} bands, got {l}")
        if y.shape != (n, 2 * h, 2 * w):
            raise DimensionError(
                f"frame must be ({n}, {2 * h}, {2 * w}) for a cube of "
                f"{(h, w)}, got {tuple(y.shape)}"
            )
        step = 2 ** self.cfg.depth
        if h % step or w % step:
            raise DimensionError(
                f"cube dims must be divisible by 2^depth = {step}, got {(h, w)}"
            )

    def forward(self, y, dgi) -> torch.Tensor:
        dtype = self.head.weight.dtype
        device = self.head.weight.device
        y = torch.as_tensor(np.asarray(y) if isinstance(y, np.ndarray) else y,
                            dtype=dtype, device=device)
        dgi = torch.as_tensor(np.asarray(dgi) if isinstance(dgi, np.ndarray) else dgi,
                              dtype=dtype, device=device)
        unbatched = y.ndim == 2
        if unbatched:
            y = y[None]
            dgi = dgi[None]
        self._check_shapes(y, dgi)

        x = torch.cat([self.frame_stem(_fold_frame(y)), self.cube_stem(dgi)], dim=1)
        skips = []
        for block in self.encoder:
            x = block(x)
            skips.append(x)
            x = self.pool(x)
        for gate, block, skip in zip(self.gates, self.decoder, reversed(skips)):
            x = F.interpolate(x, scale_factor=2, mode="nearest")
            x = block(torch.cat([gate(skip, x), x], dim=1))
        out = self.head(x)

        if self.denoiser is not None:
            cleaned = self.denoiser(out)
            if cleaned.shape != out.shape:
                raise DimensionError(
                    f"denoiser changed the shape: {tuple(out.shape)} -> "
                    f"{tuple(cleaned.shape)}"
                )
            out = cleaned
        return out[0] if unbatched else out
