"""Radial Fourier statistics of an image channel.

The chain implemented here turns a single channel into the inputs of the
morphing detector: centered log-magnitude spectrum, azimuthally averaged
radial profile, a least-squares power-law baseline in log-log space, and
the residual profile left after removing that baseline.  Natural imagery
decays smoothly with radial frequency, so the residual concentrates
whatever structure a manipulation injected into individual bands.

Conventions (fixed for reproducibility):
  * natural logarithm throughout,
  * ring k collects the spectrum bins whose distance from the centered DC
    bin floors to k; ring 0 (DC) is never part of the profile,
  * the number of rings for an N-sided channel is floor((N/2) * sqrt(2)),
    the largest integer radius that can occur inside the spectrum corner,
  * empty rings and rings with non-positive mean energy are recorded but
    excluded from the baseline fit; their residual is reported as 0 so the
    residual vector length depends only on the image size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFitError, InvalidInputError

MIN_SIDE = 8


def validate_channel(channel: np.ndarray) -> np.ndarray:
    """Check shape, finiteness and [0, 1] range of a single channel."""
    arr = np.asarray(channel, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"channel must be 2-D, got shape {arr.shape}")
    h, w = arr.shape
    if h < MIN_SIDE or w < MIN_SIDE:
        raise InvalidInputError(f"channel must be at least {MIN_SIDE}x{MIN_SIDE}, got {h}x{w}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("channel contains non-finite values")
    if arr.min() < -1e-9 or arr.max() > 1.0 + 1e-9:
        raise InvalidInputError("channel values must lie in [0, 1]")
    return arr


def log_magnitude_spectrum(channel: np.ndarray) -> np.ndarray:
    """Centered log-magnitude spectrum log(1 + |DFT(channel)|).

    The DC bin ends up at (H//2, W//2) and carries log(1 + sum(channel)).
    Output is nonnegative and has the same shape as the input.
    """
    arr = validate_channel(channel)
    spectrum = np.fft.fftshift(np.fft.fft2(arr))
    return np.log1p(np.abs(spectrum))


def band_count(side: int) -> int:
    """Number of radial rings for a side length N: floor((N/2) * sqrt(2))."""
    if side < MIN_SIDE:
        raise InvalidInputError(f"side must be >= {MIN_SIDE}, got {side}")
    return int(math.floor((side / 2.0) * math.sqrt(2.0)))


def ring_indices(height: int, width: int) -> np.ndarray:
    """Integer ring index floor(distance to the centered DC bin) per bin."""
    cy, cx = height // 2, width // 2
    y = np.arange(height, dtype=np.float64) - cy
    x = np.arange(width, dtype=np.float64) - cx
    dist = np.hypot(y[:, None], x[None, :])
    return np.floor(dist).astype(np.int64)


@dataclass(frozen=True)
class RadialProfile:
    """Azimuthally averaged band energies over integer rings 1..K."""

    band_energies: np.ndarray   # mean spectrum value per ring, 0 for empty rings
    frequencies: np.ndarray     # ring radii 1..K
    band_counts: np.ndarray     # bins per ring, 0 marks an empty ring

    def __post_init__(self):
        k = len(self.band_energies)
        if not (len(self.frequencies) == len(self.band_counts) == k):
            raise InvalidInputError("profile vectors must share one length")
        if k < 4:
            raise InvalidInputError(f"profile needs at least 4 bands, got {k}")

    @property
    def usable(self) -> np.ndarray:
        """Mask of bands that can enter a log-log fit."""
        return (self.band_counts > 0) & (self.band_energies > 0.0)


def radial_profile(spectrum: np.ndarray) -> RadialProfile:
    """Average a centered spectrum over concentric integer rings.

    K is derived from min(H, W); every bin with ring index in 1..K
    contributes, including corner bins beyond the half-side radius.
    """
    arr = np.asarray(spectrum, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"spectrum must be 2-D, got shape {arr.shape}")
    h, w = arr.shape
    k_max = band_count(min(h, w))
    rings = ring_indices(h, w).ravel()
    keep = (rings >= 1) & (rings <= k_max)
    idx = rings[keep] - 1
    counts = np.bincount(idx, minlength=k_max).astype(np.int64)
    sums = np.bincount(idx, weights=arr.ravel()[keep], minlength=k_max)
    energies = np.zeros(k_max, dtype=np.float64)
    nonempty = counts > 0
    energies[nonempty] = sums[nonempty] / counts[nonempty]
    freqs = np.arange(1, k_max + 1, dtype=np.float64)
    return RadialProfile(band_energies=energies, frequencies=freqs, band_counts=counts)


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares line log(energy) = intercept + slope * log(frequency)."""

    intercept: float
    slope: float


def fit_power_law(profile: RadialProfile) -> PowerLawFit:
    """Ordinary least squares on (log f, log energy) over usable bands."""
    mask = profile.usable
    n = int(mask.sum())
    if n < 2:
        raise DegenerateFitError(f"need >= 2 usable bands for the baseline fit, got {n}")
    log_f = np.log(profile.frequencies[mask])
    log_b = np.log(profile.band_energies[mask])
    design = np.column_stack([np.ones(n), log_f])
    coef, *_ = np.linalg.lstsq(design, log_b, rcond=None)
    return PowerLawFit(intercept=float(coef[0]), slope=float(coef[1]))


@dataclass(frozen=True)
class ResidualProfile:
    """Log-energy residuals around the fitted power-law baseline."""

    residuals: np.ndarray
    frequencies: np.ndarray


def residual(profile: RadialProfile, fit: PowerLawFit) -> ResidualProfile:
    """Residual log(energy) - (intercept + slope * log f); 0 on excluded bands."""
    res = np.zeros_like(profile.band_energies)
    mask = profile.usable
    log_f = np.log(profile.frequencies[mask])
    res[mask] = np.log(profile.band_energies[mask]) - (fit.intercept + fit.slope * log_f)
    return ResidualProfile(residuals=res, frequencies=profile.frequencies.copy())


def channel_residual(channel: np.ndarray) -> np.ndarray:
    """Spectrum -> profile -> baseline fit -> residual vector for one channel."""
    profile = radial_profile(log_magnitude_spectrum(channel))
    return residual(profile, fit_power_law(profile)).residuals
