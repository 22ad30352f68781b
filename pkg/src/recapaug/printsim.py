"""Printed-photo recapture simulation: clustered-dot and blue-noise halftones.

The clustered-dot path quantizes a 1/3-scale grayscale into 10 levels and
stamps nested 3×3 ink clusters. The blue-noise path generates rank-ordered
dither arrays with the void-and-cluster method (wrapped Gaussian energy,
sigma 1.5, 10% seed density) and blends them as textures.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ModeError, RangeError, ValidationError
from .image import (
    MODE_CHANNELS,
    ColorMode,
    ImageBuffer,
    convex_blend,
    replicate_channels,
    resize_nearest,
    to_grayscale,
)
from .press import NEUTRAL_PRESET, cmyk_render, rgb_to_cmyk
from .rng import derive_rng

SFC_GAMMA_RANGE = (0.01, 0.2)
BN_GAMMA_RANGE = (0.01, 0.4)
BLUENOISE_SIZE = 256
BLUENOISE_INSTANCES = 8
BLUENOISE_MODES = (
    ColorMode.L,
    ColorMode.LA,
    ColorMode.RGB,
    ColorMode.RGBA,
    ColorMode.CMYK,
    ColorMode.CMYKA,
)
# number of independently generated channels per mode (CMYK derives from RGB)
_SOURCE_CHANNELS = {
    ColorMode.L: 1,
    ColorMode.LA: 2,
    ColorMode.RGB: 3,
    ColorMode.RGBA: 4,
    ColorMode.CMYK: 3,
    ColorMode.CMYKA: 4,
}

# 3×3 fill order: center, then edge-adjacent, then corners
_CLUSTER_FILL_ORDER = [(1, 1), (0, 1), (1, 2), (2, 1), (1, 0), (0, 0), (0, 2), (2, 2), (2, 0)]


@dataclass
class DotClusterTable:
    """Ink masks for the 10 quantization levels; level k lights k dots."""

    masks: np.ndarray  # (10, 3, 3) bool

    def __post_init__(self):
        masks = np.asarray(self.masks, dtype=bool)
        if masks.shape != (10, 3, 3):
            raise ValidationError(f"cluster table must be 10×3×3, got {masks.shape}")
        counts = masks.sum(axis=(1, 2))
        if (np.diff(counts) < 0).any():
            raise ValidationError("cluster popcounts must be non-decreasing")
        for lvl in range(9):
            if (masks[lvl] & ~masks[lvl + 1]).any():
                raise ValidationError(f"cluster {lvl} is not nested in {lvl + 1}")
        self.masks = masks

    @classmethod
    def default(cls) -> "DotClusterTable":
        masks = np.zeros((10, 3, 3), dtype=bool)
        for lvl in range(10):
            for y, x in _CLUSTER_FILL_ORDER[:lvl]:
                masks[lvl, y, x] = True
        return cls(masks)


def write_cluster_table(path: Path, table: DotClusterTable | None = None) -> None:
    table = DotClusterTable.default() if table is None else table
    doc = {"version": 1, "masks": table.masks.astype(int).tolist()}
    Path(path).write_text(json.dumps(doc))


def load_cluster_table(path: Path) -> DotClusterTable:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != 1:
        raise ConfigError(f"unsupported cluster schema version: {doc.get('version')}")
    return DotClusterTable(np.array(doc["masks"], dtype=bool))


def sfc_halftone_image(img: ImageBuffer, table: DotClusterTable | None = None) -> ImageBuffer:
    """Clustered-dot halftone: gray, 1/3 scale, 10 levels, 3×3 dot stamps."""
    if img.mode in (ColorMode.RGB, ColorMode.RGBA):
        gray = to_grayscale(img)
    elif img.mode is ColorMode.L:
        gray = img
    else:
        raise ModeError(f"halftone needs RGB or L input, got {img.mode.value}")
    if img.width < 3 or img.height < 3:
        raise RangeError(f"image too small to halftone: {img.width}×{img.height}")
    table = DotClusterTable.default() if table is None else table

    small = resize_nearest(gray, img.width // 3, img.height // 3)
    levels = np.minimum(9, np.floor((1.0 - small.data[:, :, 0]) * 10.0)).astype(np.int64)
    ink = table.masks[levels]  # (h3, w3, 3, 3)
    h3, w3 = levels.shape
    stamped = np.where(ink.transpose(0, 2, 1, 3).reshape(h3 * 3, w3 * 3), 0.0, 1.0)
    halftone = ImageBuffer(stamped[:, :, None], ColorMode.L)
    if (h3 * 3, w3 * 3) != (img.height, img.width):
        halftone = resize_nearest(halftone, img.width, img.height)
    if img.mode is ColorMode.L:
        return halftone
    return replicate_channels(halftone, img.mode)


def sfc_halftone(img: ImageBuffer, gamma: float, table: DotClusterTable | None = None) -> ImageBuffer:
    """Blend the clustered-dot rendition back over the input."""
    lo, hi = SFC_GAMMA_RANGE
    if not lo <= gamma <= hi:
        raise RangeError(f"halftone gamma must be in [{lo}, {hi}], got {gamma}")
    return convex_blend(img, sfc_halftone_image(img, table), gamma)


# --- blue-noise dither arrays -----------------------------------------------

def _gaussian_patch(sigma: float, radius: int) -> np.ndarray:
    d = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(d, d, indexing="ij")
    return np.exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).astype(np.float32)


def void_and_cluster_ranks(
    height: int, width: int, rng, sigma: float = 1.5, seed_density: float = 0.1
) -> np.ndarray:
    """Rank every pixel 0..N-1 by the three-phase void-and-cluster ordering.

    The energy field is the toroidally wrapped Gaussian sum of the current
    binary pattern; phases use incremental patch updates for speed.
    """
    n = height * width
    radius = 8  # exp(-64/4.5) ~ 7e-7: truncation is negligible
    patch = _gaussian_patch(sigma, radius).ravel()
    offs = np.arange(-radius, radius + 1)

    def patch_indices(flat: int) -> np.ndarray:
        y, x = divmod(flat, width)
        rows = (offs + y) % height
        cols = (offs + x) % width
        return (rows[:, None] * width + cols[None, :]).ravel()

    n_ones = max(1, int(round(n * seed_density)))
    pattern = np.zeros(n, dtype=bool)
    pattern[rng.choice(n, size=n_ones, replace=False)] = True
    energy = np.zeros(n, dtype=np.float32)
    for j in np.flatnonzero(pattern):
        energy[patch_indices(int(j))] += patch

    # relax the prototype: move tightest cluster into largest void until
    # they coincide (cap guards against float-tie cycling)
    for _ in range(n):
        j_cluster = int(np.argmax(np.where(pattern, energy, -np.inf)))
        pattern[j_cluster] = False
        energy[patch_indices(j_cluster)] -= patch
        j_void = int(np.argmin(np.where(pattern, np.inf, energy)))
        if j_void == j_cluster:
            pattern[j_cluster] = True
            energy[patch_indices(j_cluster)] += patch
            break
        pattern[j_void] = True
        energy[patch_indices(j_void)] += patch

    rank = np.empty(n, dtype=np.int64)
    # phase 1: peel the prototype, tightest cluster first, ranks n_ones-1..0
    peel = np.where(pattern, energy, -np.inf).astype(np.float32)
    for r in range(n_ones - 1, -1, -1):
        j = int(np.argmax(peel))
        rank[j] = r
        peel[patch_indices(j)] -= patch
        peel[j] = -np.inf
    # phases 2+3: grow from the prototype into the emptiest spot each step
    grow = np.where(pattern, np.inf, energy).astype(np.float32)
    for r in range(n_ones, n):
        j = int(np.argmin(grow))
        rank[j] = r
        grow[patch_indices(j)] += patch
        grow[j] = np.inf
    return rank.reshape(height, width)


def generate_blue_noise_channels(height: int, width: int, channels: int, seed) -> np.ndarray:
    """Stack of independent dither arrays, quantized to levels 0..255."""
    if height != width or height < 16 or height % 16 != 0:
        raise RangeError(f"texture size must be a square multiple of 16, got {height}×{width}")
    if channels not in (1, 2, 3, 4):
        raise RangeError(f"channel count must be 1..4, got {channels}")
    parts = (seed,) if isinstance(seed, (int, np.integer)) else tuple(seed)
    n = height * width
    out = np.empty((height, width, channels), dtype=np.uint8)
    for ch in range(channels):
        ranks = void_and_cluster_ranks(height, width, derive_rng("bluenoise", *parts, ch))
        out[:, :, ch] = (ranks * 256 // n).astype(np.uint8)
    return out


@dataclass
class BlueNoiseTexture:
    color_mode: ColorMode
    instance: int
    raster: np.ndarray  # uint8, channel count of color_mode
    source_channels: np.ndarray  # uint8, the independently generated arrays

    def __post_init__(self):
        if self.raster.shape[2] != MODE_CHANNELS[self.color_mode]:
            raise ValidationError(
                f"{self.color_mode.value} raster needs {MODE_CHANNELS[self.color_mode]} channels"
            )


def generate_blue_noise(
    height: int, width: int, channels: int, seed: int, instance: int = 0
) -> BlueNoiseTexture:
    """Single texture in the mode implied by the channel count."""
    mode = {1: ColorMode.L, 2: ColorMode.LA, 3: ColorMode.RGB, 4: ColorMode.RGBA}.get(channels)
    if mode is None:
        raise RangeError(f"channel count must be 1..4, got {channels}")
    src = generate_blue_noise_channels(height, width, channels, (seed, mode.value, instance))
    return BlueNoiseTexture(mode, instance, src, src)


def texture_from_source(mode: ColorMode, instance: int, src: np.ndarray) -> BlueNoiseTexture:
    """Assemble a texture from its generated channels (CMYK modes derive
    ink values from the first three channels)."""
    if src.shape[2] != _SOURCE_CHANNELS[mode]:
        raise ValidationError(
            f"{mode.value} needs {_SOURCE_CHANNELS[mode]} source channels, got {src.shape[2]}"
        )
    if mode in (ColorMode.CMYK, ColorMode.CMYKA):
        rgb = ImageBuffer(src[:, :, :3].astype(np.float64) / 255.0, ColorMode.RGB)
        cmyk = np.clip(np.floor(rgb_to_cmyk(rgb).data * 255.0 + 0.5), 0, 255).astype(np.uint8)
        raster = cmyk if mode is ColorMode.CMYK else np.concatenate([cmyk, src[:, :, 3:4]], axis=2)
    else:
        raster = src
    return BlueNoiseTexture(mode, instance, raster, src)


def make_bluenoise_texture(
    mode: ColorMode, instance: int, seed: int, size: int = BLUENOISE_SIZE
) -> BlueNoiseTexture:
    """Bank texture for any of the six color modes."""
    n_src = _SOURCE_CHANNELS[mode]
    src = generate_blue_noise_channels(size, size, n_src, (seed, mode.value, instance))
    return texture_from_source(mode, instance, src)


def _bank_job(args):
    mode_value, instance, seed, size = args
    return make_bluenoise_texture(ColorMode(mode_value), instance, seed, size)


def build_bluenoise_bank(
    seed: int, size: int = BLUENOISE_SIZE, workers: int | None = None
) -> list[BlueNoiseTexture]:
    """All 6 modes × 8 instances, deterministic regardless of worker count."""
    jobs = [
        (mode.value, instance, seed, size)
        for mode in BLUENOISE_MODES
        for instance in range(BLUENOISE_INSTANCES)
    ]
    workers = workers if workers is not None else (os.cpu_count() or 1)
    if workers <= 1:
        return [_bank_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_bank_job, jobs, chunksize=1))


def _adapt_texture_to_rgb(tex: BlueNoiseTexture, height: int, width: int):
    """Resize + mode-convert a texture for blending over an RGB image.

    Returns (overlay RGB float array, alpha float array or None).
    """
    rows = (np.arange(height, dtype=np.int64) * tex.raster.shape[0]) // height
    cols = (np.arange(width, dtype=np.int64) * tex.raster.shape[1]) // width
    raster = tex.raster[rows[:, None], cols[None, :]].astype(np.float64) / 255.0
    mode = tex.color_mode
    alpha = None
    if mode is ColorMode.L:
        overlay = np.repeat(raster, 3, axis=2)
    elif mode is ColorMode.LA:
        overlay = np.repeat(raster[:, :, :1], 3, axis=2)
        alpha = raster[:, :, 1]
    elif mode is ColorMode.RGB:
        overlay = raster
    elif mode is ColorMode.RGBA:
        overlay = raster[:, :, :3]
        alpha = raster[:, :, 3]
    else:
        cmyk = ImageBuffer(raster[:, :, :4], ColorMode.CMYK)
        overlay = cmyk_render(cmyk, NEUTRAL_PRESET).data
        if mode is ColorMode.CMYKA:
            alpha = raster[:, :, 4]
    return overlay, alpha


def bn_halftone(img: ImageBuffer, rng, bank, gamma: float, trace=None) -> ImageBuffer:
    """Blend a drawn blue-noise texture; alpha channels attenuate gamma."""
    lo, hi = BN_GAMMA_RANGE
    if not lo <= gamma <= hi:
        raise RangeError(f"blue-noise gamma must be in [{lo}, {hi}], got {gamma}")
    if not len(bank):
        raise ConfigError("blue-noise texture bank is empty")
    if img.mode is not ColorMode.RGB:
        raise ModeError(f"bn_halftone blends over RGB images, got {img.mode.value}")
    idx = int(rng.integers(len(bank)))
    tex = bank[idx]
    overlay, alpha = _adapt_texture_to_rgb(tex, img.height, img.width)
    if trace is not None:
        trace.append({"texture": f"{tex.color_mode.value}_{tex.instance}"})
    if alpha is None:
        return convex_blend(img, ImageBuffer(np.clip(overlay, 0, 1), ColorMode.RGB), gamma)
    g = gamma * alpha[:, :, None]
    out = (1.0 - g) * img.data + g * overlay
    return ImageBuffer(np.clip(out, 0.0, 1.0), ColorMode.RGB)
