"""Radially averaged power spectra for texture validation.

Power is |DFT|^2 / N so that the bins (plus DC) sum to the signal energy
sum(x^2). The DC term is excluded from the radial bins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RangeError, ShapeError
from .image import ImageBuffer


@dataclass
class RadialSpectrum:
    bins: list  # (radius band center, mean power) per annulus
    counts: np.ndarray  # cells per annulus
    dc_power: float
    dc_excluded: bool = True

    @property
    def mean_powers(self) -> np.ndarray:
        return np.array([p for _, p in self.bins])

    @property
    def radii(self) -> np.ndarray:
        return np.array([r for r, _ in self.bins])

    def total_power(self) -> float:
        """Binned power plus DC; equals signal energy (Parseval)."""
        return float((self.mean_powers * self.counts).sum() + self.dc_power)


def _power_and_radius(data: np.ndarray):
    n = data.shape[0]
    spectrum = np.fft.fftshift(np.fft.fft2(data))
    power = (spectrum.real**2 + spectrum.imag**2) / data.size
    center = n // 2
    yy, xx = np.indices((n, n))
    radius = np.hypot(yy - center, xx - center)
    return power, radius, center


def radial_power_spectrum(img: ImageBuffer, n_bins: int) -> RadialSpectrum:
    """Mean power per radius annulus of a square single-channel image."""
    if img.channels != 1:
        raise ShapeError(f"spectrum needs a single-channel image, got {img.channels}")
    if img.width != img.height:
        raise ShapeError(f"spectrum needs a square image, got {img.width}×{img.height}")
    if n_bins < 1:
        raise RangeError(f"need at least one bin, got {n_bins}")
    data = img.data[:, :, 0]
    power, radius, center = _power_and_radius(data)
    dc_power = float(power[center, center])
    mask = radius > 0
    r_max = radius[mask].max()
    edges = np.linspace(0.0, r_max, n_bins + 1)
    which = np.clip(np.digitize(radius[mask], edges) - 1, 0, n_bins - 1)
    sums = np.bincount(which, weights=power[mask], minlength=n_bins)
    counts = np.bincount(which, minlength=n_bins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    means = np.divide(sums, counts, out=np.zeros(n_bins), where=counts > 0)
    bins = list(zip(centers.tolist(), means.tolist()))
    return RadialSpectrum(bins=bins, counts=counts, dc_power=dc_power)


def band_power(img: ImageBuffer, lo_frac: float, hi_frac: float) -> float:
    """Mean power over cells with radius in [lo, hi) × Nyquist (DC excluded)."""
    if img.channels != 1 or img.width != img.height:
        raise ShapeError("band_power needs a square single-channel image")
    data = img.data[:, :, 0]
    power, radius, _ = _power_and_radius(data)
    nyquist = img.width / 2.0
    mask = (radius > 0) & (radius >= lo_frac * nyquist) & (radius < hi_frac * nyquist)
    if not mask.any():
        raise RangeError(f"band [{lo_frac}, {hi_frac}) contains no spectrum cells")
    return float(power[mask].mean())
