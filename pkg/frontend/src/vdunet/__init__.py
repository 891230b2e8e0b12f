"""Toy learned-reconstruction front end for the spectral camera pipeline.

Consumes the simulator's GSC1/GSM1/GSD1 files, trains a dual-input dense
U-net against the same composite loss the simulator reports, and writes
reconstructions back as GSC1 cubes.
"""

from .errors import (
    DimensionError,
    FormatError,
    NumericalError,
    ParameterError,
    TruncationError,
    VdunetError,
)
from .formats import (
    Cube,
    Detector,
    Matrix,
    read_cube,
    read_detector,
    read_matrix,
    write_cube,
    write_detector,
    write_matrix,
)
from .gradcheck import GradCheckReport, grad_check
from .loss import (
    DEFAULT_WEIGHTS,
    SSIM_C1,
    SSIM_C2,
    SSIM_SIGMA,
    SSIM_WINDOW,
    composite_loss,
    ssim,
)
from .model import AttentionGate, DenseBlock, NetConfig, VDUnet
from .ops import depth_to_space, space_to_depth
from .train import TrainConfig, TrainResult, load_checkpoint, train

__all__ = [
    "VdunetError",
    "ParameterError",
    "DimensionError",
    "FormatError",
    "TruncationError",
    "NumericalError",
    "Cube",
    "Matrix",
    "Detector",
    "read_cube",
    "write_cube",
    "read_matrix",
    "write_matrix",
    "read_detector",
    "write_detector",
    "space_to_depth",
    "depth_to_space",
    "NetConfig",
    "DenseBlock",
    "AttentionGate",
    "VDUnet",
    "SSIM_WINDOW",
    "SSIM_SIGMA",
    "SSIM_C1",
    "SSIM_C2",
    "DEFAULT_WEIGHTS",
    "ssim",
    "composite_loss",
    "TrainConfig",
    "TrainResult",
    "train",
    "load_checkpoint",
    "GradCheckReport",
    "grad_check",
]
