"""Capturing-procedure simulation: hand-trembling blur and low resolution.

Both operations keep the input label: they model the ordinary capture
path, not a recapture.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import RangeError
from .image import ImageBuffer, Kernel, convolve, resize_nearest


class BlurDirection(Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"
    DIAGONAL = "diagonal"
    ANTI_DIAGONAL = "anti_diagonal"


@dataclass
class BlurSpec:
    k: int
    direction: BlurDirection

    def __post_init__(self):
        if not 1 <= int(self.k) <= 16:
            raise RangeError(f"kernel size must be in [1, 16], got {self.k}")
        self.k = int(self.k)


@dataclass
class ResolutionSpec:
    s: float

    def __post_init__(self):
        if not 0.0 < self.s <= 1.0:
            raise RangeError(f"scale factor must be in (0, 1], got {self.s}")


def motion_kernel(spec: BlurSpec) -> Kernel:
    """k×k line kernel with k taps of 1/k along the blur direction.

    Index convention: the first kernel axis is vertical (rows), the
    second horizontal, so a horizontal blur fills the middle row.
    """
    k = spec.k
    w = np.zeros((k, k))
    mid = (k + 1) // 2 - 1
    idx = np.arange(k)
    if spec.direction is BlurDirection.HORIZONTAL:
        w[mid, :] = 1.0
    elif spec.direction is BlurDirection.VERTICAL:
        w[:, mid] = 1.0
    elif spec.direction is BlurDirection.DIAGONAL:
        w[idx, idx] = 1.0
    else:
        w[k - 1 - idx, idx] = 1.0
    return Kernel(w)


def hand_trembling(img: ImageBuffer, spec: BlurSpec) -> ImageBuffer:
    """Motion blur: convolve with the directional line kernel."""
    return convolve(img, motion_kernel(spec))


def low_resolution(img: ImageBuffer, spec: ResolutionSpec) -> ImageBuffer:
    """Decimate to s times the size, then nearest-upsample back."""
    down_w = int(np.floor(spec.s * img.width))
    down_h = int(np.floor(spec.s * img.height))
    if down_w < 1 or down_h < 1:
        raise RangeError(
            f"scale {spec.s} collapses a {img.width}×{img.height} image to zero pixels"
        )
    small = resize_nearest(img, down_w, down_h)
    return resize_nearest(small, img.width, img.height)
