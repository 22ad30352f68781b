"""Raster container and the shared pixel primitives.

Intensities live in [0, 1] as float64 for the whole pipeline; 8-bit
quantization happens only at file I/O so chained operations never
compound rounding error. All operations are pure: they return new
buffers and never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ModeError, RangeError, ShapeError, ValidationError


class ColorMode(Enum):
    L = "L"
    LA = "LA"
    RGB = "RGB"
    RGBA = "RGBA"
    CMYK = "CMYK"
    CMYKA = "CMYKA"


MODE_CHANNELS = {
    ColorMode.L: 1,
    ColorMode.LA: 2,
    ColorMode.RGB: 3,
    ColorMode.RGBA: 4,
    ColorMode.CMYK: 4,
    ColorMode.CMYKA: 5,
}

# BT.601 luma weights
_GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass
class ImageBuffer:
    """H×W×C raster with intensities in [0, 1].

    Treat instances as immutable: operations construct new buffers.
    """

    data: np.ndarray
    mode: ColorMode = ColorMode.RGB

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ShapeError(f"expected H×W×C data, got ndim={arr.ndim}")
        h, w, c = arr.shape
        if h < 1 or w < 1:
            raise ShapeError(f"empty image: {h}×{w}")
        if c != MODE_CHANNELS[self.mode]:
            raise ValidationError(
                f"{self.mode.value} needs {MODE_CHANNELS[self.mode]} channels, got {c}"
            )
        if not np.isfinite(arr).all():
            raise ValidationError("non-finite intensities")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValidationError("intensities outside [0, 1]")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def from_array(cls, arr, mode: ColorMode = ColorMode.RGB) -> "ImageBuffer":
        return cls(np.array(arr, dtype=np.float64, copy=True), mode)

    @classmethod
    def full(cls, height: int, width: int, value, mode: ColorMode = ColorMode.RGB) -> "ImageBuffer":
        c = MODE_CHANNELS[mode]
        data = np.empty((height, width, c), dtype=np.float64)
        data[:] = np.asarray(value, dtype=np.float64)
        return cls(data, mode)


@dataclass
class Kernel:
    """Square convolution kernel, normalized to unit sum at construction."""

    weights: np.ndarray = field()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise ShapeError(f"kernel must be square and non-empty, got {w.shape}")
        total = w.sum()
        if total <= 0.0:
            raise ValidationError("kernel weights must sum to a positive value")
        self.weights = w / total

    @property
    def size(self) -> int:
        return self.weights.shape[0]


def convex_blend(base: ImageBuffer, overlay: ImageBuffer, gamma: float) -> ImageBuffer:
    """Pixelwise (1-gamma)*base + gamma*overlay; output keeps base's mode."""
    if base.data.shape != overlay.data.shape:
        raise ShapeError(
            f"blend shape mismatch: {base.data.shape} vs {overlay.data.shape}"
        )
    if not (0.0 <= gamma <= 1.0):
        raise RangeError(f"gamma must be in [0, 1], got {gamma}")
    out = (1.0 - gamma) * base.data + gamma * overlay.data
    return ImageBuffer(np.clip(out, 0.0, 1.0), base.mode)


def convolve(img: ImageBuffer, kernel: Kernel) -> ImageBuffer:
    """Per-channel 2-D correlation with replicate-edge borders."""
    k = kernel.size
    top = (k - 1) // 2
    left = (k - 1) // 2
    bottom = k - 1 - top
    right = k - 1 - left
    padded = np.pad(img.data, ((top, bottom), (left, right), (0, 0)), mode="edge")
    h, w = img.height, img.width
    out = np.zeros_like(img.data)
    # accumulate only non-zero taps; motion kernels have k of k*k
    for dy, dx in zip(*np.nonzero(kernel.weights)):
        out += kernel.weights[dy, dx] * padded[dy : dy + h, dx : dx + w, :]
    return ImageBuffer(np.clip(out, 0.0, 1.0), img.mode)


def resize_nearest(img: ImageBuffer, new_w: int, new_h: int) -> ImageBuffer:
    """Nearest-neighbor resize: src index = floor(dst_index * src / dst)."""
    if new_w < 1 or new_h < 1:
        raise RangeError(f"target size must be >= 1, got {new_w}×{new_h}")
    rows = (np.arange(new_h, dtype=np.int64) * img.height) // new_h
    cols = (np.arange(new_w, dtype=np.int64) * img.width) // new_w
    return ImageBuffer(img.data[rows[:, None], cols[None, :], :], img.mode)


def to_grayscale(img: ImageBuffer) -> ImageBuffer:
    """BT.601 luma of an RGB or RGBA image (alpha is dropped)."""
    if img.mode not in (ColorMode.RGB, ColorMode.RGBA):
        raise ModeError(f"grayscale needs RGB or RGBA input, got {img.mode.value}")
    gray = img.data[:, :, :3] @ _GRAY_WEIGHTS
    return ImageBuffer(np.clip(gray, 0.0, 1.0)[:, :, None], ColorMode.L)


def replicate_channels(img: ImageBuffer, mode: ColorMode) -> ImageBuffer:
    """Broadcast a single-channel image into the channels of `mode`."""
    if img.channels != 1:
        raise ModeError("replicate_channels expects a single-channel image")
    c = MODE_CHANNELS[mode]
    return ImageBuffer(np.repeat(img.data, c, axis=2), mode)
