"""Synthetic images with controlled radial spectra for desk-scale testing.

`power_law_image` builds a spectrum whose ring-wise log-magnitude value is
exactly ``intercept * k**(-alpha)`` at integer ring radius k, attaches
random phases, and inverse-transforms.  With that convention the measured
radial profile of the generated image (ring mean of log(1 + |F|)) is a
power law by construction, so the baseline fit recovers slope -alpha.

The intercept is auto-calibrated per (size, alpha) so that the spatial
image is guaranteed to span less than a unit range; mapping it into
[0, 1] then only shifts the mean (a pure DC change) and leaves the
designed spectrum untouched.  `perturb_mid_high` scales the spectrum
magnitudes inside a radial annulus, the synthetic stand-in for the
mid/high-frequency irregularities that image blending introduces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .spectral import band_count, ring_indices

MIN_SYNTH_SIZE = 32
MAX_HEAD_LOG_ENERGY = 10.0
RANGE_BUDGET = 0.45  # max |pixel| before the [0, 1] shift; keeps range < 1


@dataclass(frozen=True)
class SynthSpec:
    size: int
    alpha: float
    seed: int
    perturb_band: tuple[float, float] | None = None
    perturb_amplitude: float = 0.0

    def __post_init__(self):
        if self.size < MIN_SYNTH_SIZE:
            raise InvalidInputError(f"size must be >= {MIN_SYNTH_SIZE}, got {self.size}")
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise InvalidInputError("alpha must be finite and >= 0")
        if self.perturb_band is not None:
            lo, hi = self.perturb_band
            if not 0.0 < lo < hi <= 1.0:
                raise InvalidInputError(f"perturb_band must satisfy 0 < lo < hi <= 1, got {self.perturb_band}")
        if self.perturb_amplitude <= -1.0:
            raise InvalidInputError("perturb_amplitude must be > -1")


def _ring_level_magnitudes(size: int, alpha: float) -> tuple[np.ndarray, float]:
    """Per-ring spectrum magnitudes and the calibrated head log-energy.

    Ring k (1-based radius) gets magnitude expm1(head * k**(-alpha)).  The
    head value is the largest one (up to MAX_HEAD_LOG_ENERGY) for which
    sum(|F|)/N^2 <= RANGE_BUDGET, which bounds the spatial peak magnitude
    and therefore guarantees a sub-unit image range for any phases.
    """
    k_max = band_count(size)
    rings = ring_indices(size, size)
    counts = np.bincount(rings.ravel(), minlength=k_max + 1)[1:k_max + 1]
    radii = np.arange(1, k_max + 1, dtype=np.float64)
    shape = radii ** (-alpha)
    budget = RANGE_BUDGET * size * size

    def total(head: float) -> float:
        return float(counts @ np.expm1(head * shape))

    lo, hi = 0.0, MAX_HEAD_LOG_ENERGY
    if total(hi) <= budget:
        head = hi
    else:
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if total(mid) > budget:
                hi = mid
            else:
                lo = mid
        head = lo
    return np.expm1(head * shape), head


def _shift_into_unit(image: np.ndarray) -> np.ndarray:
    """Map into [0, 1]: center a sub-unit range by a DC shift, else rescale."""
    lo, hi = float(image.min()), float(image.max())
    span = hi - lo
    if span <= 1.0:
        return image - lo + 0.5 * (1.0 - span)
    return (image - lo) / span


def power_law_image(spec: SynthSpec) -> np.ndarray:
    """Three-channel synthetic image with the configured spectral decay.

    Channels share the magnitude design and differ only in their random
    phases.  Deterministic per seed.  If the spec carries a perturbation
    band it is applied before returning.
    """
    n = spec.size
    magnitudes, _ = _ring_level_magnitudes(n, spec.alpha)
    rings = ring_indices(n, n)
    mag_grid = np.zeros((n, n), dtype=np.float64)
    nonzero = rings >= 1
    mag_grid[nonzero] = magnitudes[rings[nonzero] - 1]
    mag_grid = np.fft.ifftshift(mag_grid)
    rng = np.random.default_rng(spec.seed)
    channels = []
    for _ in range(3):
        noise_f = np.fft.fft2(rng.standard_normal((n, n)))
        norms = np.abs(noise_f)
        norms[norms == 0] = 1.0
        spectrum = mag_grid * (noise_f / norms)
        channels.append(_shift_into_unit(np.fft.ifft2(spectrum).real))
    image = np.stack(channels, axis=2)
    if spec.perturb_band is not None:
        image = perturb_mid_high(image, spec.perturb_band, spec.perturb_amplitude)
    return image


def _renormalize(image: np.ndarray) -> np.ndarray:
    """Bring values back into [0, 1] with the gentlest correction."""
    lo, hi = float(image.min()), float(image.max())
    if hi - lo > 1.0:
        return (image - lo) / (hi - lo)
    if lo < 0.0:
        return image - lo
    if hi > 1.0:
        return image - (hi - 1.0)
    return image


def perturb_mid_high(image: np.ndarray, band_range: tuple[float, float],
                     amplitude: float) -> np.ndarray:
    """Scale spectrum magnitudes by (1 + amplitude) inside a radial annulus.

    `band_range` is expressed as fractions of the Nyquist radius N/2;
    whole rings are scaled so ring-constant spectra stay ring-constant.
    """
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidInputError(f"image must be (H, W, 3), got {arr.shape}")
    lo, hi = band_range
    if not 0.0 < lo < hi <= 1.0:
        raise InvalidInputError(f"band_range must satisfy 0 < lo < hi <= 1, got {band_range}")
    if amplitude <= -1.0:
        raise InvalidInputError("amplitude must be > -1")
    h, w = arr.shape[:2]
    nyquist = min(h, w) / 2.0
    rings = ring_indices(h, w)
    mask = np.fft.ifftshift((rings >= lo * nyquist) & (rings <= hi * nyquist))
    gain = np.where(mask, 1.0 + amplitude, 1.0)
    out = np.empty_like(arr)
    for c in range(3):
        out[:, :, c] = np.fft.ifft2(np.fft.fft2(arr[:, :, c]) * gain).real
    return _renormalize(out)


def synthesize_pairs(count: int, size: int, alpha_range: tuple[float, float],
                     band_range: tuple[float, float], amplitude: float,
                     seed: int) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Matched clean/perturbed image pairs with alphas drawn per pair.

    Returns (clean_images, perturbed_images, alphas); fully deterministic
    for a given seed.
    """
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    a_lo, a_hi = alpha_range
    if not (np.isfinite(a_lo) and np.isfinite(a_hi) and 0 <= a_lo <= a_hi):
        raise InvalidInputError(f"bad alpha_range {alpha_range}")
    rng = np.random.default_rng(seed)
    alphas = rng.uniform(a_lo, a_hi, size=count)
    child_seeds = rng.integers(0, 2**31 - 1, size=count)
    clean, perturbed = [], []
    for alpha, child in zip(alphas, child_seeds):
        img = power_law_image(SynthSpec(size=size, alpha=float(alpha), seed=int(child)))
        clean.append(img)
        perturbed.append(perturb_mid_high(img, band_range, amplitude))
    return clean, perturbed, alphas
