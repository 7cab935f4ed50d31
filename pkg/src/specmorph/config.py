"""Detector configuration: every tunable constant, with documented defaults.

All keys are optional in a config file; the defaults below apply
otherwise.  The full resolved configuration is snapshotted into every
trained bundle so scoring never falls back to hidden defaults.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .classify import CALIBRATION_FRACTION, DEFAULT_L2, DEFAULT_PENALTY, SVM_TOL
from .errors import InvalidInputError
from .mrf import DEFAULT_BETA, DEFAULT_FUSION_LAMBDA, R_MAX
from .regions import (
    DEFAULT_LANDMARK_INDICES,
    DEFAULT_MARGIN_FRACTION,
    DEFAULT_PATCH_SIZE,
    DEFAULT_REGION_FRACTIONS,
    REGION_IDS,
)

REGION_MODES = ("auto", "landmarks", "preset")


@dataclass
class DetectorConfig:
    image_size: int = 500              # training/scoring resolution (letterboxed)
    patch_size: int = DEFAULT_PATCH_SIZE
    margin_fraction: float = DEFAULT_MARGIN_FRACTION
    pca_dim: int = 64                  # cap; actual dim = min(pca_dim, F, n-1)
    logistic_l2: float = DEFAULT_L2
    logistic_tol: float = 1e-6
    svm_penalty: float = DEFAULT_PENALTY
    svm_gamma: float | None = None     # None -> 1 / (d * mean feature variance)
    svm_tol: float = SVM_TOL
    calibration_fraction: float = CALIBRATION_FRACTION
    beta: float = DEFAULT_BETA
    fusion_lambda: float = DEFAULT_FUSION_LAMBDA
    seed: int = 0
    balance: bool = True               # downsample the majority class
    region_mode: str = "auto"          # auto | landmarks | preset
    region_fractions: dict = field(
        default_factory=lambda: {k: list(v) for k, v in DEFAULT_REGION_FRACTIONS.items()})
    landmark_indices: dict = field(
        default_factory=lambda: {k: list(v) for k, v in DEFAULT_LANDMARK_INDICES.items()})
    workers: int = 1
    r_max: int = R_MAX

    def __post_init__(self):
        if self.image_size < 32:
            raise InvalidInputError("image_size must be >= 32")
        if self.patch_size < 8:
            raise InvalidInputError("patch_size must be >= 8")
        if not 0.0 <= self.fusion_lambda <= 1.0:
            raise InvalidInputError("fusion_lambda must lie in [0, 1]")
        if self.beta < 0:
            raise InvalidInputError("beta must be >= 0")
        if self.region_mode not in REGION_MODES:
            raise InvalidInputError(f"region_mode must be one of {REGION_MODES}")
        if self.workers < 1:
            raise InvalidInputError("workers must be >= 1")
        for rid in REGION_IDS:
            if rid not in self.region_fractions or rid not in self.landmark_indices:
                raise InvalidInputError(f"missing region entry for {rid!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DetectorConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json_file(cls, path: str) -> "DetectorConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
