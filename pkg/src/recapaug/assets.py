"""Asset-bank directory layout: generation and loading.

A bank directory holds everything the augmentation ops draw from:

    profiles/*.icc + profiles/bank.json   11 RGB color profiles
    presets.json                          7 press presets
    moire/{layout}_{warp}.png + index     190 moiré textures
    bluenoise/{mode}_{instance}.png + idx 48 blue-noise textures (as their
                                          generated source channels)

Moiré textures are loaded lazily with a small cache; everything else is
loaded up front.
"""

from __future__ import annotations

import json
import os
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError
from .icc import load_profile_bank, write_profile_bank
from .image import ColorMode
from .policy import AssetBanks
from .press import build_default_presets, load_preset_bank, write_preset_bank
from .printsim import (
    BLUENOISE_INSTANCES,
    BLUENOISE_MODES,
    BLUENOISE_SIZE,
    DotClusterTable,
    generate_blue_noise_channels,
    texture_from_source,
    _SOURCE_CHANNELS,
)
from .replay import (
    WARPS_PER_LAYOUT,
    BackgroundBank,
    MoireTexture,
    build_default_layouts,
    synth_moire_texture,
)

BANK_DIR_ENV = "RECAPAUG_BANK_DIR"

_PNG_MODES = {1: "L", 2: "LA", 3: "RGB", 4: "RGBA"}


def _save_png(path: Path, arr: np.ndarray) -> None:
    squeezed = arr[:, :, 0] if arr.shape[2] == 1 else arr
    Image.fromarray(squeezed, mode=_PNG_MODES[arr.shape[2]]).save(path)


def _load_png(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im, dtype=np.uint8)
    return arr[:, :, None] if arr.ndim == 2 else arr


def _moire_job(args):
    layout, warp, seed = args
    tex = synth_moire_texture(layout, warp, seed)
    return layout.name, warp, tex.raster


def _bluenoise_job(args):
    mode_value, instance, seed = args
    mode = ColorMode(mode_value)
    src = generate_blue_noise_channels(
        BLUENOISE_SIZE, BLUENOISE_SIZE, _SOURCE_CHANNELS[mode], (seed, mode_value, instance)
    )
    return mode_value, instance, src


def generate_banks(out_dir, seed: int, workers: int | None = None, log=None) -> dict:
    """Write a complete bank directory; returns artifact counts."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = log or (lambda msg: None)
    workers = workers if workers is not None else (os.cpu_count() or 1)

    profile_paths = write_profile_bank(out_dir / "profiles")
    log(f"wrote {len(profile_paths)} profiles")
    presets = build_default_presets()
    write_preset_bank(out_dir / "presets.json", presets)
    log("wrote presets.json")

    moire_dir = out_dir / "moire"
    moire_dir.mkdir(exist_ok=True)
    layouts = build_default_layouts()
    moire_jobs = [(layout, warp, seed) for layout in layouts for warp in range(WARPS_PER_LAYOUT)]
    moire_entries = []

    def write_moire(name, warp, raster):
        fname = f"{name}_{warp}.png"
        _save_png(moire_dir / fname, raster)
        moire_entries.append({"layout": name, "warp": warp, "file": fname})

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for name, warp, raster in pool.map(_moire_job, moire_jobs, chunksize=4):
                write_moire(name, warp, raster)
    else:
        for job in moire_jobs:
            write_moire(*_moire_job(job))
    (moire_dir / "index.json").write_text(
        json.dumps({"version": 1, "seed": seed, "textures": moire_entries})
    )
    log(f"wrote {len(moire_entries)} moire textures")

    bn_dir = out_dir / "bluenoise"
    bn_dir.mkdir(exist_ok=True)
    bn_jobs = [
        (mode.value, instance, seed)
        for mode in BLUENOISE_MODES
        for instance in range(BLUENOISE_INSTANCES)
    ]
    bn_entries = []

    def write_bn(mode_value, instance, src):
        fname = f"{mode_value}_{instance}.png"
        _save_png(bn_dir / fname, src)
        bn_entries.append({"mode": mode_value, "instance": instance, "file": fname})

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for mode_value, instance, src in pool.map(_bluenoise_job, bn_jobs, chunksize=1):
                write_bn(mode_value, instance, src)
    else:
        for job in bn_jobs:
            write_bn(*_bluenoise_job(job))
    (bn_dir / "index.json").write_text(
        json.dumps({"version": 1, "seed": seed, "textures": bn_entries})
    )
    log(f"wrote {len(bn_entries)} blue-noise textures")

    return {
        "profiles": len(profile_paths),
        "presets": len(presets),
        "moire": len(moire_entries),
        "bluenoise": len(bn_entries),
    }


class DiskMoireBank:
    """Lazy, index-ordered view of the moiré texture directory."""

    def __init__(self, directory: Path, cache_size: int = 8):
        self.directory = Path(directory)
        index_path = self.directory / "index.json"
        if not index_path.exists():
            raise ConfigError(f"moire bank index missing: {index_path}")
        self.entries = json.loads(index_path.read_text())["textures"]
        self._cache: OrderedDict[int, MoireTexture] = OrderedDict()
        self._cache_size = cache_size

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> MoireTexture:
        if i in self._cache:
            self._cache.move_to_end(i)
            return self._cache[i]
        entry = self.entries[i]
        raster = _load_png(self.directory / entry["file"])
        tex = MoireTexture(entry["layout"], entry["warp"], raster)
        self._cache[i] = tex
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return tex


def load_bluenoise_bank(directory: Path) -> list:
    directory = Path(directory)
    index_path = directory / "index.json"
    if not index_path.exists():
        raise ConfigError(f"blue-noise bank index missing: {index_path}")
    entries = json.loads(index_path.read_text())["textures"]
    textures = []
    for entry in entries:
        src = _load_png(directory / entry["file"])
        textures.append(texture_from_source(ColorMode(entry["mode"]), entry["instance"], src))
    return textures


def load_banks(bank_dir, backgrounds_dir=None) -> AssetBanks:
    """Assemble AssetBanks from a generated bank directory."""
    bank_dir = Path(bank_dir)
    if not bank_dir.exists():
        raise ConfigError(
            f"bank directory {bank_dir} does not exist; generate it with "
            "`recapaug gen-banks --out <dir> --seed <n>`"
        )
    try:
        return AssetBanks(
            profiles=load_profile_bank(bank_dir / "profiles"),
            presets=load_preset_bank(bank_dir / "presets.json"),
            moire_textures=DiskMoireBank(bank_dir / "moire"),
            bluenoise=load_bluenoise_bank(bank_dir / "bluenoise"),
            backgrounds=BackgroundBank.load(backgrounds_dir),
            cluster_table=DotClusterTable.default(),
        )
    except (ConfigError, FileNotFoundError) as exc:
        raise ConfigError(
            f"incomplete bank directory {bank_dir} ({exc}); regenerate it with "
            "`recapaug gen-banks --out <dir> --seed <n>`"
        ) from exc


def default_bank_dir() -> Path | None:
    value = os.environ.get(BANK_DIR_ENV)
    return Path(value) if value else None


def packaged_data_dir() -> Path:
    """Checked-in fixtures: profiles, layouts, presets, dot clusters."""
    from importlib import resources

    return Path(str(resources.files("recapaug"))) / "data"
