"""Simulator and reconstruction toolkit for a speckle-encoding snapshot
hyperspectral camera.

The pipeline: calibrate a speckle sensing matrix (one detector pattern per
cube voxel), measure a cube in a single shot, reconstruct with DGI or
TwIST, and score the result. Everything is deterministic under a fixed
(seed, stream) pair and persists through bit-exact binary formats.

Submodules load lazily so the command-line front end can cap the BLAS
thread pools (GISC_THREADS) before numpy first loads.
"""

import importlib

__version__ = "0.1.0"

_EXPORTS = {
    # core
    "HsiCube": "core",
    "DetectorImage": "core",
    "SensingMatrix": "core",
    "RngSpec": "core",
    "ReconResult": "core",
    "canonical_index": "core",
    "vectorize": "core",
    "devectorize": "core",
    # errors
    "GiscError": "errors",
    "ParameterError": "errors",
    "DimensionError": "errors",
    "SelectionError": "errors",
    "CapacityError": "errors",
    "FormatError": "errors",
    "TruncationError": "errors",
    "DegenerateMatrixError": "errors",
    "DivergenceError": "errors",
    # forward
    "SpeckleSpec": "forward",
    "NoiseSpec": "forward",
    "SNR_HIGH_DB": "forward",
    "SNR_LOW_DB": "forward",
    "MAX_MATRIX_ELEMENTS": "forward",
    "calibrate": "forward",
    "sense": "forward",
    "add_noise": "forward",
    # recon
    "TwistConfig": "recon",
    "dgi": "recon",
    "dgi_estimate": "recon",
    "twist": "recon",
    "twist_solve": "recon",
    "estimate_step": "recon",
    "soft_threshold": "recon",
    "tv_value": "recon",
    "tv_denoise": "recon",
    # metrics
    "SSIM_WINDOW": "metrics",
    "SSIM_SIGMA": "metrics",
    "SSIM_C1": "metrics",
    "SSIM_C2": "metrics",
    "LossWeights": "metrics",
    "MetricsReport": "metrics",
    "psnr": "metrics",
    "per_band_psnr": "metrics",
    "ssim": "metrics",
    "sam": "metrics",
    "composite_loss": "metrics",
    "evaluate": "metrics",
    # dataio
    "PatchSpec": "dataio",
    "read_cube": "dataio",
    "write_cube": "dataio",
    "read_matrix": "dataio",
    "write_matrix": "dataio",
    "read_detector": "dataio",
    "write_detector": "dataio",
    "select_bands": "dataio",
    "extract_patches": "dataio",
    "normalize": "dataio",
    "export_band_images": "dataio",
    "import_raw_cube": "dataio",
}

__all__ = ["__version__", *_EXPORTS]


def __getattr__(name):
    if name in _EXPORTS:
        module = importlib.import_module(f".{_EXPORTS[name]}", __name__)
        value = getattr(module, name)
        globals()[name] = value
        return value
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(__all__)
