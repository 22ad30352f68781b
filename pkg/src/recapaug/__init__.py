"""Recapture-artifact augmentation engine for face anti-spoofing data.

Physics-based simulations of the capture and recapture pipeline (color
gamut shifts, motion blur, resolution loss, screen reflection, moiré,
halftone noise, printer color distortion), an AutoAugment-style policy
sampler with spoof-label semantics, and a risk-equalization training
objective with a desk-scale gradient-checked trainer.
"""

from .capture import BlurDirection, BlurSpec, ResolutionSpec, hand_trembling, low_resolution
from .icc import IccProfile, color_diversity, gamut_map, parse_icc
from .image import ColorMode, ImageBuffer, Kernel, convex_blend, convolve, resize_nearest, to_grayscale
from .imageio import load_image, save_image
from .policy import (
    AssetBanks,
    AugOpKind,
    Label,
    Policy,
    Sample,
    SubPolicy,
    apply_subpolicy,
    augment_sample,
    magnitude_value,
    sample_policy,
)
from .press import PressPreset, cmyk_render, color_distortion, rgb_to_cmyk
from .printsim import bn_halftone, build_bluenoise_bank, generate_blue_noise, sfc_halftone
from .replay import moire, specular_reflection, synth_moire_bank
from .sare import (
    LossReport,
    RiskVector,
    TrainConfig,
    build_megabatch,
    sare_grad,
    sare_loss,
    spoof_risks,
    supcon_loss,
    total_loss,
    train_toy,
)
from .spectral import band_power, radial_power_spectrum

__version__ = "0.1.0"
