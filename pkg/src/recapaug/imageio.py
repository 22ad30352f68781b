"""PNG/JPEG boundary: 8-bit encode/decode for ImageBuffer.

Quantization is round-half-up and happens only here.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import FormatError, ModeError
from .image import ColorMode, ImageBuffer

_PIL_MODES = {
    ColorMode.L: "L",
    ColorMode.LA: "LA",
    ColorMode.RGB: "RGB",
    ColorMode.RGBA: "RGBA",
}


def quantize_u8(data: np.ndarray) -> np.ndarray:
    """[0,1] floats to uint8 with ties rounded up."""
    return np.clip(np.floor(data * 255.0 + 0.5), 0, 255).astype(np.uint8)


def from_u8(arr: np.ndarray, mode: ColorMode) -> ImageBuffer:
    return ImageBuffer(arr.astype(np.float64) / 255.0, mode)


def load_image(path) -> ImageBuffer:
    """Decode a PNG/JPEG file to an RGB buffer."""
    try:
        with Image.open(path) as im:
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except (OSError, SyntaxError) as exc:
        raise FormatError(f"cannot decode image {path}: {exc}") from exc
    return from_u8(arr, ColorMode.RGB)


def save_image(img: ImageBuffer, path, **save_kwargs) -> None:
    """Encode to the format implied by the path suffix."""
    pil_mode = _PIL_MODES.get(img.mode)
    if pil_mode is None:
        raise ModeError(f"cannot encode {img.mode.value} to PNG/JPEG")
    arr = quantize_u8(img.data)
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr, mode=pil_mode).save(path, **save_kwargs)
