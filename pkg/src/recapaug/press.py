"""Printer color model: RGB->CMYK separation and parametric press rendering.

A press preset renders CMYK ink coverage back to RGB through per-ink dot
gain and a 4×3 ink-absorption matrix. Seven presets with distinct
gain/tint parameter sets stand in for physical printer profiles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ModeError, ValidationError
from .icc import IccProfile, gamut_map
from .image import ColorMode, ImageBuffer


def rgb_to_cmyk(img: ImageBuffer) -> ImageBuffer:
    """K = 1 - max(R,G,B); C,M,Y = (1 - RGB - K)/(1 - K); K=1 maps to pure K."""
    if img.mode != ColorMode.RGB:
        raise ModeError(f"rgb_to_cmyk needs RGB input, got {img.mode.value}")
    rgb = img.data
    k = 1.0 - rgb.max(axis=2)
    denom = 1.0 - k
    safe = denom > 0.0
    cmy = np.zeros_like(rgb)
    np.divide(1.0 - rgb - k[:, :, None], denom[:, :, None], out=cmy, where=safe[:, :, None])
    out = np.concatenate([cmy, k[:, :, None]], axis=2)
    return ImageBuffer(np.clip(out, 0.0, 1.0), ColorMode.CMYK)


def cmyk_to_rgb_naive(img: ImageBuffer) -> ImageBuffer:
    """Direct inverse of the separation: R = (1-C)(1-K), etc."""
    if img.mode != ColorMode.CMYK:
        raise ModeError(f"cmyk_to_rgb_naive needs CMYK input, got {img.mode.value}")
    cmy = img.data[:, :, :3]
    k = img.data[:, :, 3:4]
    return ImageBuffer(np.clip((1.0 - cmy) * (1.0 - k), 0.0, 1.0), ColorMode.RGB)


@dataclass
class PressPreset:
    """Dot gain + ink tints of one simulated press/paper combination."""

    name: str
    dot_gain: np.ndarray  # per ink CMYK, in [0, 0.5]
    ink_tint: np.ndarray  # 4×3: RGB absorption of unit ink coverage

    def __post_init__(self):
        self.dot_gain = np.asarray(self.dot_gain, dtype=np.float64)
        self.ink_tint = np.asarray(self.ink_tint, dtype=np.float64)
        if self.dot_gain.shape != (4,):
            raise ValidationError("dot_gain must hold one value per CMYK ink")
        if (self.dot_gain < 0).any() or (self.dot_gain > 0.5).any():
            raise ValidationError("dot gain must lie in [0, 0.5]")
        if self.ink_tint.shape != (4, 3):
            raise ValidationError("ink_tint must be a 4×3 matrix")
        if (self.ink_tint < 0).any() or (self.ink_tint > 1.2).any():
            raise ValidationError("ink tints must lie in [0, 1.2]")
        # paper with no ink must stay white; solid K must go near-black
        black = 1.0 - np.clip(self.ink_tint[3], 0.0, 1.0)
        if (black > 0.1).any():
            raise ValidationError("solid K must render each channel <= 0.1")


def cmyk_render(img: ImageBuffer, preset: PressPreset) -> ImageBuffer:
    """Render ink coverage to RGB: dot gain, then subtractive absorption."""
    if img.mode != ColorMode.CMYK:
        raise ModeError(f"cmyk_render needs CMYK input, got {img.mode.value}")
    gained = img.data ** (1.0 / (1.0 + preset.dot_gain))
    absorbed = gained.reshape(-1, 4) @ preset.ink_tint
    out = np.clip(1.0 - absorbed, 0.0, 1.0).reshape(img.height, img.width, 3)
    return ImageBuffer(out, ColorMode.RGB)


# Pure subtractive inks, zero gain: used to adapt CMYK textures for blending.
NEUTRAL_PRESET = PressPreset(
    name="neutral",
    dot_gain=np.zeros(4),
    ink_tint=np.array(
        [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 1.0, 1.0],
        ]
    ),
)

_DEFAULT_PRESET_DEFS = [
    # name, gains (C M Y K), tint rows: absorption of C / M / Y / K ink
    ("coated_sheetfed", (0.14, 0.14, 0.12, 0.16),
     [[0.95, 0.08, 0.02], [0.10, 0.92, 0.06], [0.02, 0.06, 0.90], [0.96, 0.95, 0.93]]),
    ("uncoated_offset", (0.22, 0.22, 0.20, 0.26),
     [[0.88, 0.14, 0.06], [0.16, 0.84, 0.10], [0.05, 0.10, 0.82], [0.92, 0.91, 0.90]]),
    ("newsprint_coldset", (0.32, 0.32, 0.30, 0.38),
     [[0.78, 0.20, 0.12], [0.24, 0.74, 0.16], [0.10, 0.16, 0.70], [0.90, 0.90, 0.90]]),
    ("web_coated", (0.18, 0.18, 0.16, 0.20),
     [[0.92, 0.10, 0.04], [0.12, 0.89, 0.08], [0.03, 0.08, 0.87], [0.94, 0.93, 0.92]]),
    ("gravure_publication", (0.10, 0.10, 0.09, 0.12),
     [[0.97, 0.05, 0.01], [0.07, 0.95, 0.04], [0.01, 0.04, 0.94], [0.98, 0.97, 0.96]]),
    ("toner_laser", (0.06, 0.06, 0.06, 0.08),
     [[0.90, 0.18, 0.10], [0.20, 0.88, 0.14], [0.08, 0.14, 0.86], [0.99, 0.99, 0.99]]),
    ("inkjet_photo", (0.26, 0.24, 0.22, 0.30),
     [[0.93, 0.06, 0.08], [0.09, 0.90, 0.12], [0.06, 0.03, 0.92], [0.95, 0.96, 0.97]]),
]


def build_default_presets() -> list[PressPreset]:
    return [
        PressPreset(name, np.array(gains), np.array(tints))
        for name, gains, tints in _DEFAULT_PRESET_DEFS
    ]


def write_preset_bank(path: Path, presets=None) -> None:
    presets = build_default_presets() if presets is None else presets
    doc = {
        "version": 1,
        "presets": [
            {
                "name": p.name,
                "dot_gain": p.dot_gain.tolist(),
                "ink_tint": p.ink_tint.tolist(),
            }
            for p in presets
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2))


def load_preset_bank(path: Path) -> list[PressPreset]:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != 1:
        raise ConfigError(f"unsupported preset schema version: {doc.get('version')}")
    presets = [
        PressPreset(e["name"], np.array(e["dot_gain"]), np.array(e["ink_tint"]))
        for e in doc["presets"]
    ]
    if not presets:
        raise ConfigError(f"preset bank at {path} is empty")
    return presets


def color_distortion(
    img: ImageBuffer,
    rng,
    cmyk_bank: list[PressPreset],
    rgb_bank: list[IccProfile],
    trace=None,
) -> ImageBuffer:
    """Separate to CMYK, render through a drawn press, remap to a drawn profile.

    The press render is display-referred (sRGB-like), so the final gamut
    map treats sRGB as the source profile.
    """
    if not cmyk_bank or not rgb_bank:
        raise ConfigError("color_distortion needs non-empty preset and profile banks")
    preset = cmyk_bank[int(rng.integers(len(cmyk_bank)))]
    profile = rgb_bank[int(rng.integers(len(rgb_bank)))]
    srgb = next((p for p in rgb_bank if p.name == "sRGB"), rgb_bank[0])
    if trace is not None:
        trace.append({"press_preset": preset.name, "dst_profile": profile.name})
    rendered = cmyk_render(rgb_to_cmyk(img), preset)
    return gamut_map(rendered, srgb, profile)
