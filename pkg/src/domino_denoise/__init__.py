"""Zero-shot single-image denoising validated by pixel domino tilings."""

from .imaging import FormatError, Image, NoiseSpec, add_noise, load_image, psnr, save_image, ssim
from .nnet import Network, init_network, partial_conv_forward
from .tiling import (
    Parity,
    Tiling,
    count_tilings_exact,
    count_tilings_formula,
    domino_tiling,
    enumerate_tilings,
    pixel_domino_pair,
    solve_lap,
    verify_tiling,
)
from .trainer import DenoiseConfig, MaskPlan, NumericalError, denoise, n2f_domino_denoise

__all__ = [
    "DenoiseConfig",
    "FormatError",
    "Image",
    "MaskPlan",
    "Network",
    "NoiseSpec",
    "NumericalError",
    "Parity",
    "Tiling",
    "add_noise",
    "count_tilings_exact",
    "count_tilings_formula",
    "denoise",
    "domino_tiling",
    "enumerate_tilings",
    "init_network",
    "load_image",
    "n2f_domino_denoise",
    "partial_conv_forward",
    "pixel_domino_pair",
    "psnr",
    "save_image",
    "solve_lap",
    "ssim",
    "verify_tiling",
]
