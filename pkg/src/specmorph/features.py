"""Feature assembly: channel concatenation, standardization, PCA reduction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidInputError

STD_FLOOR = 1e-8
CHANNEL_ORDER = ("red", "green", "blue")


def concat_channels(red: np.ndarray, green: np.ndarray, blue: np.ndarray) -> np.ndarray:
    """Concatenate per-channel residual vectors in fixed R,G,B order."""
    parts = [np.asarray(v, dtype=np.float64).ravel() for v in (red, green, blue)]
    if not (len(parts[0]) == len(parts[1]) == len(parts[2])):
        raise DimensionMismatchError(
            f"channel residual lengths differ: {[len(p) for p in parts]}"
        )
    return np.concatenate(parts)


@dataclass(frozen=True)
class Standardizer:
    """Per-dimension mean and population std, std floored at STD_FLOOR."""

    means: np.ndarray
    std_devs: np.ndarray

    def apply(self, features: np.ndarray) -> np.ndarray:
        arr = np.asarray(features, dtype=np.float64)
        if arr.shape[-1] != len(self.means):
            raise DimensionMismatchError(
                f"feature length {arr.shape[-1]} != standardizer length {len(self.means)}"
            )
        return (arr - self.means) / self.std_devs


def fit_standardizer(samples: np.ndarray) -> Standardizer:
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise InvalidInputError("standardizer needs a 2-D sample matrix with >= 2 rows")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("samples contain non-finite values")
    means = arr.mean(axis=0)
    stds = np.maximum(arr.std(axis=0), STD_FLOOR)
    return Standardizer(means=means, std_devs=stds)


@dataclass(frozen=True)
class PcaModel:
    """Top principal directions as rows, descending eigenvalue order.

    Sign/tie convention: eigenvalues sorted descending with a stable sort,
    then each component flipped so its first non-negligible coordinate is
    positive.  This makes fitting bit-reproducible for identical inputs.
    """

    components: np.ndarray  # (D, F), orthonormal rows

    @property
    def output_dim(self) -> int:
        return self.components.shape[0]

    def apply(self, features: np.ndarray) -> np.ndarray:
        arr = np.asarray(features, dtype=np.float64)
        if arr.shape[-1] != self.components.shape[1]:
            raise DimensionMismatchError(
                f"feature length {arr.shape[-1]} != PCA input dim {self.components.shape[1]}"
            )
        return arr @ self.components.T


def fit_pca(samples: np.ndarray, target_dim: int) -> PcaModel:
    """Top-`target_dim` eigenvectors of the sample covariance.

    The covariance is taken about the sample mean.  In the detector
    pipeline the inputs are standardized, so the mean is already ~0 and
    `PcaModel.apply` deliberately skips any extra centering.
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise InvalidInputError("PCA needs a 2-D sample matrix with >= 2 rows")
    n, f = arr.shape
    if not 1 <= target_dim <= min(f, n - 1):
        raise InvalidInputError(
            f"target_dim must be in [1, min(F={f}, n-1={n - 1})], got {target_dim}"
        )
    centered = arr - arr.mean(axis=0)
    cov = (centered.T @ centered) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(-eigvals, kind="stable")
    components = eigvecs[:, order[:target_dim]].T.copy()
    for row in components:
        nz = np.nonzero(np.abs(row) > 1e-12)[0]
        if len(nz) and row[nz[0]] < 0:
            row *= -1.0
    return PcaModel(components=components)


def transform(features: np.ndarray, standardizer: Standardizer, pca: PcaModel) -> np.ndarray:
    """Reduced feature: components @ ((x - means) / std_devs). Accepts 1-D or 2-D."""
    return pca.apply(standardizer.apply(features))
