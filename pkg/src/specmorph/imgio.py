"""Image file I/O: float RGB arrays in [0, 1] on the library side."""

from __future__ import annotations

import os

import cv2
import numpy as np

from .errors import InvalidInputError


def load_image(path: str) -> np.ndarray:
    """Read an image file into an (H, W, 3) float64 RGB array in [0, 1].

    8- and 16-bit files are supported; grayscale inputs are replicated
    across the three channels.
    """
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise InvalidInputError(f"cannot read image {path!r}")
    if raw.dtype == np.uint8:
        arr = raw.astype(np.float64) / 255.0
    elif raw.dtype == np.uint16:
        arr = raw.astype(np.float64) / 65535.0
    else:
        raise InvalidInputError(f"unsupported image dtype {raw.dtype} in {path!r}")
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    elif arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[:, :, :3]
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidInputError(f"unsupported image layout {raw.shape} in {path!r}")
    return arr[:, :, ::-1].copy()  # BGR -> RGB


def save_image_png(path: str, image: np.ndarray) -> None:
    """Write an (H, W, 3) float RGB array in [0, 1] as a 16-bit PNG."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidInputError(f"image must be (H, W, 3), got {arr.shape}")
    if arr.min() < -1e-9 or arr.max() > 1.0 + 1e-9:
        raise InvalidInputError("image values must lie in [0, 1]")
    quant = np.round(np.clip(arr, 0.0, 1.0) * 65535.0).astype(np.uint16)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    if not cv2.imwrite(path, quant[:, :, ::-1]):  # RGB -> BGR
        raise InvalidInputError(f"failed to write image {path!r}")
