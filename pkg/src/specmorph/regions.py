"""Semantic facial region extraction: eyes, nose, mouth.

Regions come either from a 106-point landmark set (indices configurable)
or from fixed fractional preset boxes for pre-aligned inputs.  Boxes are
always squared to their larger side so the patch spectra keep square ring
geometry, and every extraction yields all four regions or raises.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRegionError, DimensionMismatchError, InvalidInputError

LANDMARK_COUNT = 106
REGION_IDS = ("left_eye", "right_eye", "nose", "mouth")

# Index subsets for the common 106-point layout (contour 0-32, brows 33-51,
# nose 52-65, eyes 66-83, mouth 84-105).  Overridable through the config.
DEFAULT_LANDMARK_INDICES: dict[str, list[int]] = {
    "left_eye": list(range(66, 75)),
    "right_eye": list(range(75, 84)),
    "nose": list(range(52, 66)),
    "mouth": list(range(84, 104)),
}

# Fractional (x0, y0, x1, y1) boxes for aligned square faces; already square.
DEFAULT_REGION_FRACTIONS: dict[str, tuple[float, float, float, float]] = {
    "left_eye": (0.18, 0.28, 0.48, 0.58),
    "right_eye": (0.52, 0.28, 0.82, 0.58),
    "nose": (0.35, 0.42, 0.65, 0.72),
    "mouth": (0.30, 0.62, 0.66, 0.98),
}

DEFAULT_MARGIN_FRACTION = 0.25
DEFAULT_PATCH_SIZE = 128


@dataclass(frozen=True)
class RegionSpec:
    region_id: str
    landmark_indices: list[int]
    margin_fraction: float = DEFAULT_MARGIN_FRACTION

    def __post_init__(self):
        if self.region_id not in REGION_IDS:
            raise InvalidInputError(f"unknown region_id {self.region_id!r}")
        if not self.landmark_indices:
            raise InvalidInputError("landmark_indices must be non-empty")
        if max(self.landmark_indices) >= LANDMARK_COUNT or min(self.landmark_indices) < 0:
            raise InvalidInputError(f"landmark indices must lie in [0, {LANDMARK_COUNT})")
        if self.margin_fraction < 0:
            raise InvalidInputError("margin_fraction must be >= 0")


def default_region_specs(margin_fraction: float = DEFAULT_MARGIN_FRACTION,
                         indices: dict[str, list[int]] | None = None) -> dict[str, RegionSpec]:
    table = indices or DEFAULT_LANDMARK_INDICES
    return {
        rid: RegionSpec(rid, list(table[rid]), margin_fraction)
        for rid in REGION_IDS
    }


def validate_landmarks(points: np.ndarray, height: int, width: int) -> np.ndarray:
    """Coerce to a (106, 2) float array and clamp into image bounds."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.shape != (LANDMARK_COUNT, 2):
        raise InvalidInputError(f"landmarks must have shape (106, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("landmarks contain non-finite values")
    clamped = arr.copy()
    clamped[:, 0] = np.clip(clamped[:, 0], 0.0, width - 1.0)
    clamped[:, 1] = np.clip(clamped[:, 1], 0.0, height - 1.0)
    return clamped


def load_landmark_file(path: str) -> np.ndarray:
    """Read 106 (x, y) pairs, whitespace- or comma-separated."""
    with open(path, "r", encoding="utf-8") as fh:
        tokens = fh.read().replace(",", " ").split()
    if len(tokens) != 2 * LANDMARK_COUNT:
        raise InvalidInputError(
            f"landmark file {path!r} holds {len(tokens)} numbers, expected {2 * LANDMARK_COUNT}"
        )
    vals = np.asarray([float(t) for t in tokens], dtype=np.float64)
    return vals.reshape(LANDMARK_COUNT, 2)


def _square_box(x0: float, y0: float, x1: float, y1: float,
                height: int, width: int) -> tuple[float, float, float, float]:
    """Expand the shorter dimension about its center, then shift inside bounds."""
    w, h = x1 - x0, y1 - y0
    side = max(w, h)
    cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
    x0, x1 = cx - side / 2.0, cx + side / 2.0
    y0, y1 = cy - side / 2.0, cy + side / 2.0
    if side <= width:
        if x0 < 0:
            x1 -= x0
            x0 = 0.0
        if x1 > width:
            x0 -= x1 - width
            x1 = float(width)
    else:
        x0, x1 = 0.0, float(width)
    if side <= height:
        if y0 < 0:
            y1 -= y0
            y0 = 0.0
        if y1 > height:
            y0 -= y1 - height
            y1 = float(height)
    else:
        y0, y1 = 0.0, float(height)
    return x0, y0, x1, y1


def region_bbox(landmarks: np.ndarray, spec: RegionSpec,
                height: int, width: int) -> tuple[float, float, float, float]:
    """Tight box over the indexed points, expanded by the margin, clamped, squared."""
    pts = validate_landmarks(landmarks, height, width)[spec.landmark_indices]
    x0, y0 = pts[:, 0].min(), pts[:, 1].min()
    x1, y1 = pts[:, 0].max(), pts[:, 1].max()
    mx = spec.margin_fraction * (x1 - x0)
    my = spec.margin_fraction * (y1 - y0)
    x0, x1 = max(x0 - mx, 0.0), min(x1 + mx, float(width))
    y0, y1 = max(y0 - my, 0.0), min(y1 + my, float(height))
    if x1 - x0 <= 0 or y1 - y0 <= 0:
        raise DegenerateRegionError(
            f"region {spec.region_id!r} collapsed to zero area: ({x0}, {y0}, {x1}, {y1})"
        )
    return _square_box(x0, y0, x1, y1, height, width)


def preset_regions(image_size: int,
                   fractions: dict[str, tuple[float, float, float, float]] | None = None,
                   ) -> dict[str, tuple[float, float, float, float]]:
    """Fixed fractional boxes for aligned square inputs, scaled to pixels."""
    table = fractions or DEFAULT_REGION_FRACTIONS
    boxes = {}
    for rid in REGION_IDS:
        fx0, fy0, fx1, fy1 = table[rid]
        boxes[rid] = _square_box(fx0 * image_size, fy0 * image_size,
                                 fx1 * image_size, fy1 * image_size,
                                 image_size, image_size)
    return boxes


def bilinear_resize(image: np.ndarray, out_h: int, out_w: int,
                    bbox: tuple[float, float, float, float] | None = None) -> np.ndarray:
    """Bilinear resample of `bbox` (default: whole image) to (out_h, out_w).

    Sample positions follow the pixel-center convention
    src = origin + (i + 0.5) * scale - 0.5, clamped to valid coordinates,
    so a full-image bbox resampled at the native size is an exact copy.
    Works on (H, W) or (H, W, C) arrays; output stays inside [min, max]
    of the input (convex weights).
    """
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise InvalidInputError(f"image must be 2-D or 3-D, got shape {arr.shape}")
    h, w = arr.shape[:2]
    if bbox is None:
        bbox = (0.0, 0.0, float(w), float(h))
    x0, y0, x1, y1 = bbox
    if x1 - x0 <= 0 or y1 - y0 <= 0:
        raise DegenerateRegionError(f"degenerate bbox {bbox}")
    sx = x0 + (np.arange(out_w) + 0.5) * (x1 - x0) / out_w - 0.5
    sy = y0 + (np.arange(out_h) + 0.5) * (y1 - y0) / out_h - 0.5
    sx = np.clip(sx, 0.0, w - 1.0)
    sy = np.clip(sy, 0.0, h - 1.0)
    x_lo = np.floor(sx).astype(np.int64)
    y_lo = np.floor(sy).astype(np.int64)
    x_hi = np.minimum(x_lo + 1, w - 1)
    y_hi = np.minimum(y_lo + 1, h - 1)
    wx = (sx - x_lo)[None, :]
    wy = (sy - y_lo)[:, None]
    if arr.ndim == 3:
        wx = wx[..., None]
        wy = wy[..., None]
    top = arr[np.ix_(y_lo, x_lo)] * (1 - wx) + arr[np.ix_(y_lo, x_hi)] * wx
    bot = arr[np.ix_(y_hi, x_lo)] * (1 - wx) + arr[np.ix_(y_hi, x_hi)] * wx
    return top * (1 - wy) + bot * wy


@dataclass(frozen=True)
class RegionPatch:
    region_id: str
    image: np.ndarray  # (patch, patch, 3) in [0, 1]


def crop_and_resize(image: np.ndarray, bbox: tuple[float, float, float, float],
                    patch_size: int = DEFAULT_PATCH_SIZE) -> np.ndarray:
    """Crop `bbox` and bilinearly resample it to patch_size x patch_size."""
    return bilinear_resize(image, patch_size, patch_size, bbox=bbox)


def extract_patches(image: np.ndarray,
                    boxes: dict[str, tuple[float, float, float, float]],
                    patch_size: int = DEFAULT_PATCH_SIZE) -> dict[str, RegionPatch]:
    """All four region patches, keyed and ordered by REGION_IDS."""
    missing = [rid for rid in REGION_IDS if rid not in boxes]
    if missing:
        raise DimensionMismatchError(f"missing region boxes: {missing}")
    return {
        rid: RegionPatch(rid, crop_and_resize(image, boxes[rid], patch_size))
        for rid in REGION_IDS
    }
