"""Replay-attack recapture simulation: moiré textures and screen reflections.

Moiré textures come from tiling 12×12 display subpixel layouts to
1024×1024 and warping them with small random projective transforms (ten
warps per layout). Compositing is the plain convex blend, which forces
the Spoof label downstream.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, RangeError, ValidationError
from .image import ColorMode, ImageBuffer, convex_blend
from .rng import derive_rng

TEXTURE_SIZE = 1024
WARPS_PER_LAYOUT = 10
WARP_RADIUS = 0.1

MOIRE_GAMMA_RANGE = (0.01, 0.3)
REFLECTION_GAMMA_RANGE = (0.03, 0.2)


@dataclass
class SubpixelLayout:
    """One display subpixel pattern as a 12×12 RGB tile (uint8)."""

    name: str
    tile: np.ndarray

    def __post_init__(self):
        tile = np.asarray(self.tile, dtype=np.uint8)
        if tile.shape != (12, 12, 3):
            raise ValidationError(f"layout tile must be 12×12×3, got {tile.shape}")
        if not tile.any():
            raise ValidationError("layout tile has no lit subpixels")
        self.tile = tile


@dataclass
class MoireTexture:
    source_layout: str
    warp_index: int
    raster: np.ndarray  # 1024×1024×3 uint8

    def __post_init__(self):
        if self.raster.shape != (TEXTURE_SIZE, TEXTURE_SIZE, 3):
            raise ValidationError(f"texture must be {TEXTURE_SIZE}², got {self.raster.shape}")


# --- default subpixel layouts ----------------------------------------------

def _layout_from_rule(name, rule):
    y, x = np.indices((12, 12))
    tile = np.zeros((12, 12, 3), dtype=np.uint8)
    channel = rule(y, x)
    for ch in range(3):
        tile[:, :, ch] = np.where(channel == ch, 255, 0)
    white = channel == 3
    tile[white] = 255
    return SubpixelLayout(name, tile)


def _pentile_diamond():
    y, x = np.indices((12, 12))
    tile = np.zeros((12, 12, 3), dtype=np.uint8)
    green = (x + y) % 2 == 0
    tile[green, 1] = 255
    red = (~green) & (((x // 2) + (y // 2)) % 2 == 0)
    blue = (~green) & (~red)
    tile[red, 0] = 255
    tile[blue, 2] = 255
    return SubpixelLayout("pentile_diamond", tile)


def _dotted_rgb():
    tile = np.zeros((12, 12, 3), dtype=np.uint8)
    for cy in range(4):
        for cx in range(4):
            tile[cy * 3 + 1, cx * 3 + 1, (cx + cy) % 3] = 255
    return SubpixelLayout("dotted_rgb", tile)


def _white_mesh():
    y, x = np.indices((12, 12))
    tile = np.zeros((12, 12, 3), dtype=np.uint8)
    tile[(x % 4 == 0) | (y % 4 == 0)] = 255
    return SubpixelLayout("white_mesh", tile)


def build_default_layouts() -> list[SubpixelLayout]:
    """The 19 stock subpixel layouts (stripes, PenTile, RGBW, mosaics)."""
    rules = [
        ("rgb_stripe", lambda y, x: x % 3),
        ("bgr_stripe", lambda y, x: 2 - x % 3),
        ("rgb_stripe_h", lambda y, x: y % 3),
        ("bgr_stripe_h", lambda y, x: 2 - y % 3),
        ("rgb_stripe_wide", lambda y, x: (x // 2) % 3),
        ("bgr_stripe_wide", lambda y, x: 2 - (x // 2) % 3),
        ("rgbw_quad", lambda y, x: ((y // 3) % 2) * 2 + ((x // 3) % 2)),
        ("rgbw_stripe", lambda y, x: (x // 3) % 4),
        ("pentile_rgbg", lambda y, x: np.choose((x // 3) % 4, [0, 1, 2, 1])),
        ("delta_triad", lambda y, x: ((x + ((y // 3) % 2) * 3) // 2) % 3),
        ("rgb_diag", lambda y, x: (x + y) % 3),
        ("bgr_diag", lambda y, x: 2 - (x + y) % 3),
        ("rgb_checker", lambda y, x: ((x // 2) + (y // 2)) % 3),
        ("rgb_gap", lambda y, x: np.where(x % 4 < 3, x % 4, -1)),
        ("slant_rgb", lambda y, x: (x + 2 * y) % 3),
        ("slant_bgr", lambda y, x: 2 - (x + 2 * y) % 3),
    ]
    layouts = [_layout_from_rule(name, rule) for name, rule in rules]
    layouts.extend([_pentile_diamond(), _dotted_rgb(), _white_mesh()])
    return layouts


def write_layout_bank(path: Path, layouts=None) -> None:
    layouts = build_default_layouts() if layouts is None else layouts
    doc = {
        "version": 1,
        "layouts": [{"name": l.name, "tile": l.tile.tolist()} for l in layouts],
    }
    Path(path).write_text(json.dumps(doc))


def load_layout_bank(path: Path) -> list[SubpixelLayout]:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != 1:
        raise ConfigError(f"unsupported layout schema version: {doc.get('version')}")
    return [SubpixelLayout(e["name"], np.array(e["tile"], dtype=np.uint8)) for e in doc["layouts"]]


# --- projective warp --------------------------------------------------------

def solve_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """3×3 homography mapping the 4 src points onto the 4 dst points (DLT)."""
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v
    try:
        h = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise ValidationError(f"degenerate corner configuration: {exc}") from exc
    return np.append(h, 1.0).reshape(3, 3)


def warp_wrap_bilinear(raster: np.ndarray, homography: np.ndarray) -> np.ndarray:
    """Inverse-map the raster through the homography; wrap out-of-bounds."""
    h, w = raster.shape[:2]
    inv = np.linalg.inv(homography)
    yy, xx = np.meshgrid(
        np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij"
    )
    den = inv[2, 0] * xx + inv[2, 1] * yy + inv[2, 2]
    if np.abs(den).min() < 1e-9:
        raise ValidationError("homography denominator vanishes inside the raster")
    sx = (inv[0, 0] * xx + inv[0, 1] * yy + inv[0, 2]) / den
    sy = (inv[1, 0] * xx + inv[1, 1] * yy + inv[1, 2]) / den
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = (sx - x0)[:, :, None]
    fy = (sy - y0)[:, :, None]
    flat = raster.reshape(-1, raster.shape[2]).astype(np.float64)
    i00 = (y0 % h) * w + (x0 % w)
    i01 = (y0 % h) * w + ((x0 + 1) % w)
    i10 = ((y0 + 1) % h) * w + (x0 % w)
    i11 = ((y0 + 1) % h) * w + ((x0 + 1) % w)
    out = (
        flat[i00.ravel()].reshape(raster.shape) * (1 - fx) * (1 - fy)
        + flat[i01.ravel()].reshape(raster.shape) * fx * (1 - fy)
        + flat[i10.ravel()].reshape(raster.shape) * (1 - fx) * fy
        + flat[i11.ravel()].reshape(raster.shape) * fx * fy
    )
    return out


def tile_layout(layout: SubpixelLayout, size: int = TEXTURE_SIZE) -> np.ndarray:
    reps = math.ceil(size / layout.tile.shape[0])
    return np.tile(layout.tile, (reps, reps, 1))[:size, :size]


def synth_moire_texture(
    layout: SubpixelLayout,
    warp_index: int,
    seed: int,
    radius: float = WARP_RADIUS,
    max_retries: int = 8,
) -> MoireTexture:
    """Tile the layout and apply the warp_index-th random projective jitter."""
    base = tile_layout(layout)
    size = float(TEXTURE_SIZE)
    corners = np.array([[0, 0], [size, 0], [size, size], [0, size]], dtype=np.float64)
    rng = derive_rng(seed, "moire", layout.name, warp_index)
    for _ in range(max_retries):
        offsets = rng.uniform(-radius * size, radius * size, size=(4, 2))
        try:
            hom = solve_homography(corners, corners + offsets)
            warped = warp_wrap_bilinear(base, hom)
        except ValidationError:
            continue
        raster = np.clip(np.rint(warped), 0, 255).astype(np.uint8)
        return MoireTexture(layout.name, warp_index, raster)
    raise ValidationError(
        f"no valid corner configuration for {layout.name} warp {warp_index}"
    )


def iter_moire_bank(layouts, seed: int, radius: float = WARP_RADIUS):
    """Yield the bank textures one at a time (layout-major, warp-minor)."""
    if not layouts:
        raise ConfigError("moire synthesis needs at least one layout")
    for layout in layouts:
        for warp_index in range(WARPS_PER_LAYOUT):
            yield synth_moire_texture(layout, warp_index, seed, radius)


def synth_moire_bank(layouts, seed: int, radius: float = WARP_RADIUS) -> list[MoireTexture]:
    """Full texture bank: ten warps of every layout."""
    return list(iter_moire_bank(layouts, seed, radius))


def moire(img: ImageBuffer, rng, bank, gamma: float, trace=None) -> ImageBuffer:
    """Blend a randomly drawn, randomly cropped moiré texture over the image."""
    lo, hi = MOIRE_GAMMA_RANGE
    if not lo <= gamma <= hi:
        raise RangeError(f"moire gamma must be in [{lo}, {hi}], got {gamma}")
    if not len(bank):
        raise ConfigError("moire texture bank is empty")
    idx = int(rng.integers(len(bank)))
    tex = bank[idx]
    raster = tex.raster
    if img.height > raster.shape[0] or img.width > raster.shape[1]:
        reps_y = math.ceil(img.height / raster.shape[0])
        reps_x = math.ceil(img.width / raster.shape[1])
        raster = np.tile(raster, (reps_y, reps_x, 1))
    y0 = int(rng.integers(raster.shape[0] - img.height + 1))
    x0 = int(rng.integers(raster.shape[1] - img.width + 1))
    crop = raster[y0 : y0 + img.height, x0 : x0 + img.width].astype(np.float64) / 255.0
    if trace is not None:
        trace.append(
            {"texture": f"{tex.source_layout}_{tex.warp_index}", "crop": [y0, x0]}
        )
    return convex_blend(img, ImageBuffer(crop, ColorMode.RGB), gamma)


# --- reflection backgrounds --------------------------------------------------

def _procedural_background(index: int) -> np.ndarray:
    """Gradient sky/wall plus simple geometry, mimicking scene photos."""
    rng = derive_rng("background", index)
    h = int(rng.integers(160, 420))
    w = int(rng.integers(160, 420))
    c0 = rng.random(3)
    c1 = rng.random(3)
    yy, xx = np.meshgrid(np.linspace(0, 1, h), np.linspace(0, 1, w), indexing="ij")
    angle = rng.uniform(0, np.pi)
    t = np.clip(xx * np.cos(angle) + yy * np.sin(angle), 0, 1)[:, :, None]
    img = c0 * (1 - t) + c1 * t
    for _ in range(int(rng.integers(2, 6))):
        color = rng.random(3)
        if rng.random() < 0.5:  # rectangle block
            y0, x0 = int(rng.integers(h)), int(rng.integers(w))
            y1 = min(h, y0 + int(rng.integers(10, h // 2 + 11)))
            x1 = min(w, x0 + int(rng.integers(10, w // 2 + 11)))
            img[y0:y1, x0:x1] = 0.5 * img[y0:y1, x0:x1] + 0.5 * color
        else:  # filled disc
            cy, cx = rng.integers(h), rng.integers(w)
            r = int(rng.integers(8, max(9, min(h, w) // 3)))
            mask = (yy * (h - 1) - cy) ** 2 + (xx * (w - 1) - cx) ** 2 <= r * r
            img[mask] = 0.5 * img[mask] + 0.5 * color
    return np.clip(np.rint(img * 255), 0, 255).astype(np.uint8)


@dataclass
class BackgroundBank:
    """Reflection backgrounds: user images from a directory, or the
    16-image procedural fallback when no directory is given."""

    names: list[str]
    images: list[np.ndarray]

    @classmethod
    def fallback(cls, count: int = 16) -> "BackgroundBank":
        images = [_procedural_background(i) for i in range(count)]
        names = [f"procedural_{i:02d}" for i in range(count)]
        return cls(names, images)

    @classmethod
    def load(cls, directory=None) -> "BackgroundBank":
        if directory is None:
            return cls.fallback()
        directory = Path(directory)
        paths = sorted(
            p for p in directory.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")
        )
        if not paths:
            return cls.fallback()
        from PIL import Image

        images, names = [], []
        for p in paths:
            with Image.open(p) as im:
                images.append(np.asarray(im.convert("RGB"), dtype=np.uint8))
            names.append(p.name)
        return cls(names, images)

    def __len__(self):
        return len(self.images)


def specular_reflection(
    img: ImageBuffer, rng, bank: BackgroundBank, gamma: float, trace=None
) -> ImageBuffer:
    """Blend a random crop of a random background over the image."""
    lo, hi = REFLECTION_GAMMA_RANGE
    if not lo <= gamma <= hi:
        raise RangeError(f"reflection gamma must be in [{lo}, {hi}], got {gamma}")
    if not len(bank):
        raise ConfigError("background bank is empty")
    idx = int(rng.integers(len(bank)))
    bg = bank.images[idx]
    if bg.shape[0] < img.height or bg.shape[1] < img.width:
        # nearest-upscale so the crop window fits
        scale = max(img.height / bg.shape[0], img.width / bg.shape[1])
        new_h = max(img.height, math.ceil(bg.shape[0] * scale))
        new_w = max(img.width, math.ceil(bg.shape[1] * scale))
        rows = (np.arange(new_h) * bg.shape[0]) // new_h
        cols = (np.arange(new_w) * bg.shape[1]) // new_w
        bg = bg[rows[:, None], cols[None, :]]
    y0 = int(rng.integers(bg.shape[0] - img.height + 1))
    x0 = int(rng.integers(bg.shape[1] - img.width + 1))
    crop = bg[y0 : y0 + img.height, x0 : x0 + img.width].astype(np.float64) / 255.0
    if trace is not None:
        trace.append({"background": bank.names[idx], "crop": [y0, x0]})
    return convex_blend(img, ImageBuffer(crop, ColorMode.RGB), gamma)
