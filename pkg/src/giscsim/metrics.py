"""Quality metrics: PSNR, windowed SSIM, spectral angle, and the composite loss.

All comparisons are between a reference cube and a reconstruction of the
same shape (wavelength grids are not compared: reconstructions carry
placeholder grids when the matrix does not know the true one).

Numerical care: several identities are exact by construction, not just
approximate. ssim(x, x) == 1.0 because every numerator expression is the
bit-identical twin of its denominator expression when the inputs agree;
sam(x, x) == 0.0 because sqrt(q*q) == q in IEEE arithmetic, so the cosine
evaluates to exactly 1; the composite loss of a perfect reconstruction is
exactly 0.0 because all three residuals vanish bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import DetectorImage, HsiCube, SensingMatrix
from .errors import DimensionError, ParameterError
from .forward import sense

__all__ = [
    "LossWeights",
    "MetricsReport",
    "psnr",
    "per_band_psnr",
    "ssim",
    "sam",
    "composite_loss",
    "evaluate",
    "SSIM_WINDOW",
    "SSIM_SIGMA",
    "SSIM_C1",
    "SSIM_C2",
]

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 1e-4
SSIM_C2 = 9e-4


@dataclass(frozen=True)
class LossWeights:
    """Weights of the composite loss: alpha |X - Xhat|_1 + beta |Y - Phi Xhat|_1
    + gamma (1 - ssim)."""

    alpha: float = 50.0
    beta: float = 1.0
    gamma: float = 50.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ParameterError(f"{name} must be finite and >= 0, got {v!r}")


@dataclass(frozen=True)
class MetricsReport:
    """Scores for one (reference, reconstruction) pair.

    loss is None when no measurement/matrix pair was supplied. psnr_db and
    per_band_psnr entries may be +inf for identical inputs.
    """

    psnr_db: float
    ssim: float
    sam_rad: float
    loss: float | None
    per_band_psnr: tuple[float, ...]

    def __post_init__(self):
        if math.isnan(self.psnr_db):
            raise ParameterError("psnr_db must not be NaN")
        for name in ("ssim", "sam_rad"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if self.loss is not None and not (math.isfinite(self.loss) and self.loss >= 0):
            raise ParameterError(f"loss must be finite and >= 0, got {self.loss!r}")
        object.__setattr__(self, "per_band_psnr", tuple(float(v) for v in self.per_band_psnr))

    def to_json_obj(self) -> dict:
        def enc(v):
            return "inf" if v == math.inf else v
        obj = {
            "psnr_db": enc(self.psnr_db),
            "ssim": self.ssim,
            "sam_rad": self.sam_rad,
            "per_band_psnr": [enc(v) for v in self.per_band_psnr],
        }
        if self.loss is not None:
            obj["loss"] = self.loss
        return obj


def _check_same_dims(ref: HsiCube, rec: HsiCube):
    if ref.dims != rec.dims:
        raise DimensionError(f"cube dims differ: {ref.dims} vs {rec.dims}")


def _mse_to_db(mse: float, peak: float) -> float:
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def psnr(ref: HsiCube, rec: HsiCube, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE) over the full cube; +inf when identical."""
    _check_same_dims(ref, rec)
    if not (math.isfinite(peak) and peak > 0):
        raise ParameterError(f"peak must be finite and > 0, got {peak!r}")
    diff = ref.data - rec.data
    return _mse_to_db(float(np.mean(diff * diff)), peak)


def per_band_psnr(ref: HsiCube, rec: HsiCube, peak: float = 1.0) -> tuple[float, ...]:
    _check_same_dims(ref, rec)
    if not (math.isfinite(peak) and peak > 0):
        raise ParameterError(f"peak must be finite and > 0, got {peak!r}")
    diff = ref.data - rec.data
    return tuple(_mse_to_db(float(np.mean(d * d)), peak) for d in diff)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    g = np.arange(size) - half
    k = np.exp(-(g * g) / (2.0 * sigma * sigma))
    w = np.outer(k, k)
    return w / w.sum()


_SSIM_KERNEL = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)


def _local_mean(img: np.ndarray) -> np.ndarray:
    # Gaussian-weighted local means over all fully contained windows.
    win = sliding_window_view(img, (SSIM_WINDOW, SSIM_WINDOW))
    return np.tensordot(win, _SSIM_KERNEL, axes=([2, 3], [0, 1]))


def _ssim_plane(x: np.ndarray, y: np.ndarray) -> float:
    if x.shape != y.shape:
        raise DimensionError(f"image shapes differ: {x.shape} vs {y.shape}")
    if x.ndim != 2 or min(x.shape) < SSIM_WINDOW:
        raise DimensionError(
            f"ssim needs a 2D image at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {x.shape}"
        )
    mu_x = _local_mean(x)
    mu_y = _local_mean(y)
    # Covariances from the moment identity; each numerator term below is the
    # bitwise twin of its denominator term when x == y, making the map
    # exactly 1.0 there.
    sxx = _local_mean(x * x) - mu_x * mu_x
    syy = _local_mean(y * y) - mu_y * mu_y
    sxy = _local_mean(x * y) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * sxy + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (sxx + syy + SSIM_C2)
    return float(np.mean(num / den))


def ssim(ref, rec) -> float:
    """Mean local SSIM (11x11 Gaussian window, sigma 1.5, C1=1e-4, C2=9e-4).

    Accepts a pair of 2D arrays or a pair of cubes; cube scores are the
    average of the per-band scores. Windows are fully contained (no edge
    padding).
    """
    if isinstance(ref, HsiCube) and isinstance(rec, HsiCube):
        _check_same_dims(ref, rec)
        return float(np.mean([
            _ssim_plane(ref.data[b], rec.data[b]) for b in range(ref.l)
        ]))
    return _ssim_plane(np.asarray(ref, dtype=np.float64),
                       np.asarray(rec, dtype=np.float64))


def sam(ref: HsiCube, rec: HsiCube) -> float:
    """Mean spectral angle in radians.

    Per spatial pixel: arccos of the cosine between the two l-vectors,
    argument clamped to [-1, 1]. Pixels where both spectra are zero
    contribute 0; where exactly one is zero, pi/2.
    """
    _check_same_dims(ref, rec)
    if ref.l < 2:
        raise DimensionError(f"spectral angle needs at least 2 bands, got {ref.l}")
    ss = (ref.data * ref.data).sum(axis=0)
    rr = (rec.data * rec.data).sum(axis=0)
    dot = (ref.data * rec.data).sum(axis=0)
    zs = ss == 0.0
    zr = rr == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = dot / np.sqrt(ss * rr)
    angle = np.arccos(np.clip(cos, -1.0, 1.0))
    angle[zs & zr] = 0.0
    angle[zs ^ zr] = math.pi / 2.0
    return float(np.mean(angle))


def composite_loss(ref: HsiCube, rec: HsiCube, y: DetectorImage,
                   phi: SensingMatrix, w: LossWeights = LossWeights()) -> float:
    """alpha |X - Xhat|_1 + beta |Y - Phi Xhat|_1 + gamma (1 - ssim(X, Xhat)).

    Exactly zero for a perfect reconstruction of a noise-free measurement.
    """
    _check_same_dims(ref, rec)
    if phi.cube_dims != rec.dims:
        raise DimensionError(f"matrix expects cube dims {phi.cube_dims}, got {rec.dims}")
    if (y.my, y.ny) != phi.detector_dims:
        raise DimensionError(
            f"matrix expects detector dims {phi.detector_dims}, got {(y.my, y.ny)}"
        )
    fidelity = float(np.abs(ref.data - rec.data).sum())
    resid = float(np.abs(y.vector - sense(phi, rec).vector).sum())
    structure = 1.0 - ssim(ref, rec)
    return w.alpha * fidelity + w.beta * resid + w.gamma * structure


def evaluate(ref: HsiCube, rec: HsiCube, y: DetectorImage | None = None,
             phi: SensingMatrix | None = None,
             weights: LossWeights = LossWeights(), peak: float = 1.0) -> MetricsReport:
    """Assemble the full report; the loss term needs both y and phi."""
    if (y is None) != (phi is None):
        raise ParameterError("loss needs both the measurement and the matrix")
    loss = None if y is None else composite_loss(ref, rec, y, phi, weights)
    return MetricsReport(
        psnr_db=psnr(ref, rec, peak),
        ssim=ssim(ref, rec),
        sam_rad=sam(ref, rec),
        loss=loss,
        per_band_psnr=per_band_psnr(ref, rec, peak),
    )
