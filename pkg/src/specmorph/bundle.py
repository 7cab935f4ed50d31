"""Persistence of a trained detector as one versioned JSON document.

The on-disk format is deterministic (sorted keys, compact separators,
shortest-roundtrip float repr, trailing newline), so training twice with
identical inputs yields byte-identical files, and numbers survive a
save/load round trip bit-exactly.

Layout (version "1"):
  version        format tag
  config         full resolved configuration snapshot
  image_size     training resolution
  seeds          named RNG seeds used during training
  global_stream  {standardizer{means,std_devs}, pca{components}, svm{...}}
  region_streams {region_id: {landmark_indices, margin_fraction,
                  standardizer, pca, logistic{weights,bias,l2_strength}}}
  beta           MRF agreement strength
  fusion_lambda  global/local fusion weight
  metadata       free-form records (e.g. tuning history)
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .classify import KernelSvmModel, LogisticModel
from .errors import BundleFormatError
from .features import PcaModel, Standardizer
from .regions import REGION_IDS

BUNDLE_VERSION = "1"


@dataclass(frozen=True)
class GlobalStream:
    standardizer: Standardizer
    pca: PcaModel
    svm: KernelSvmModel


@dataclass(frozen=True)
class RegionStream:
    landmark_indices: list[int]
    margin_fraction: float
    standardizer: Standardizer
    pca: PcaModel
    logistic: LogisticModel


@dataclass(frozen=True)
class DetectorBundle:
    config: dict
    image_size: int
    global_stream: GlobalStream
    region_streams: dict[str, RegionStream]
    beta: float
    fusion_lambda: float
    seeds: dict
    metadata: dict = field(default_factory=dict)
    version: str = BUNDLE_VERSION


def _standardizer_dict(s: Standardizer) -> dict:
    return {"means": s.means.tolist(), "std_devs": s.std_devs.tolist()}


def _svm_dict(m: KernelSvmModel) -> dict:
    return {
        "support_features": m.support_features.tolist(),
        "dual_coefficients": m.dual_coefficients.tolist(),
        "bias": m.bias,
        "kernel_width": m.kernel_width,
        "penalty": m.penalty,
        "calibration_slope": m.calibration_slope,
        "calibration_offset": m.calibration_offset,
        "calibration_seed": m.calibration_seed,
    }


def bundle_to_dict(bundle: DetectorBundle) -> dict:
    return {
        "version": bundle.version,
        "config": bundle.config,
        "image_size": bundle.image_size,
        "seeds": bundle.seeds,
        "beta": bundle.beta,
        "fusion_lambda": bundle.fusion_lambda,
        "metadata": bundle.metadata,
        "global_stream": {
            "standardizer": _standardizer_dict(bundle.global_stream.standardizer),
            "pca": {"components": bundle.global_stream.pca.components.tolist()},
            "svm": _svm_dict(bundle.global_stream.svm),
        },
        "region_streams": {
            rid: {
                "landmark_indices": stream.landmark_indices,
                "margin_fraction": stream.margin_fraction,
                "standardizer": _standardizer_dict(stream.standardizer),
                "pca": {"components": stream.pca.components.tolist()},
                "logistic": {
                    "weights": stream.logistic.weights.tolist(),
                    "bias": stream.logistic.bias,
                    "l2_strength": stream.logistic.l2_strength,
                },
            }
            for rid, stream in bundle.region_streams.items()
        },
    }


def bundle_dumps(bundle: DetectorBundle) -> str:
    return json.dumps(bundle_to_dict(bundle), sort_keys=True,
                      separators=(",", ":"), allow_nan=False) + "\n"


def save_bundle(bundle: DetectorBundle, path: str) -> None:
    out_dir = os.path.dirname(os.path.abspath(path))
    os.makedirs(out_dir, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(bundle_dumps(bundle))


def _parse_standardizer(data: dict) -> Standardizer:
    return Standardizer(
        means=np.asarray(data["means"], dtype=np.float64),
        std_devs=np.asarray(data["std_devs"], dtype=np.float64),
    )


def bundle_from_dict(doc: dict) -> DetectorBundle:
    try:
        if doc["version"] != BUNDLE_VERSION:
            raise BundleFormatError(f"unsupported bundle version {doc['version']!r}")
        gs = doc["global_stream"]
        global_stream = GlobalStream(
            standardizer=_parse_standardizer(gs["standardizer"]),
            pca=PcaModel(components=np.asarray(gs["pca"]["components"], dtype=np.float64)),
            svm=KernelSvmModel(
                support_features=np.asarray(gs["svm"]["support_features"], dtype=np.float64),
                dual_coefficients=np.asarray(gs["svm"]["dual_coefficients"], dtype=np.float64),
                bias=float(gs["svm"]["bias"]),
                kernel_width=float(gs["svm"]["kernel_width"]),
                penalty=float(gs["svm"]["penalty"]),
                calibration_slope=float(gs["svm"]["calibration_slope"]),
                calibration_offset=float(gs["svm"]["calibration_offset"]),
                calibration_seed=int(gs["svm"]["calibration_seed"]),
            ),
        )
        region_streams = {}
        for rid in REGION_IDS:
            rs = doc["region_streams"][rid]
            region_streams[rid] = RegionStream(
                landmark_indices=[int(i) for i in rs["landmark_indices"]],
                margin_fraction=float(rs["margin_fraction"]),
                standardizer=_parse_standardizer(rs["standardizer"]),
                pca=PcaModel(components=np.asarray(rs["pca"]["components"], dtype=np.float64)),
                logistic=LogisticModel(
                    weights=np.asarray(rs["logistic"]["weights"], dtype=np.float64),
                    bias=float(rs["logistic"]["bias"]),
                    l2_strength=float(rs["logistic"]["l2_strength"]),
                ),
            )
        bundle = DetectorBundle(
            config=doc["config"],
            image_size=int(doc["image_size"]),
            global_stream=global_stream,
            region_streams=region_streams,
            beta=float(doc["beta"]),
            fusion_lambda=float(doc["fusion_lambda"]),
            seeds=doc["seeds"],
            metadata=doc.get("metadata", {}),
            version=doc["version"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, BundleFormatError):
            raise
        raise BundleFormatError(f"malformed bundle document: {exc}") from exc
    _check_consistency(bundle)
    return bundle


def _check_consistency(bundle: DetectorBundle) -> None:
    gs = bundle.global_stream
    if gs.pca.components.shape[1] != len(gs.standardizer.means):
        raise BundleFormatError("global PCA input dim != standardizer length")
    if gs.svm.support_features.shape[1] != gs.pca.output_dim:
        raise BundleFormatError("global SVM dim != PCA output dim")
    for rid, stream in bundle.region_streams.items():
        if stream.pca.components.shape[1] != len(stream.standardizer.means):
            raise BundleFormatError(f"{rid}: PCA input dim != standardizer length")
        if len(stream.logistic.weights) != stream.pca.output_dim:
            raise BundleFormatError(f"{rid}: logistic dim != PCA output dim")


def load_bundle(path: str) -> DetectorBundle:
    with open(path, "r", encoding="utf-8") as fh:
        return bundle_from_dict(json.load(fh))
