"""Frequency-domain single-image morphing attack detector.

Global and region-wise radial spectrum residuals feed calibrated
classifiers; region evidence is fused by an exact-inference Markov random
field and combined with the global stream by a weighted fusion.  Includes
ISO-style presentation-attack metrics and a synthetic spectral test kit.
"""

from .bundle import DetectorBundle, load_bundle, save_bundle
from .classify import (
    KernelSvmModel,
    LogisticModel,
    predict_logistic,
    predict_svm,
    train_logistic,
    train_svm_rbf,
)
from .config import DetectorConfig
from .errors import DetectorError
from .features import PcaModel, Standardizer, concat_channels, fit_pca, fit_standardizer, transform
from .manifest import ManifestRecord, load_manifest
from .metrics import (
    MetricsReport,
    bpcer_at_apcer,
    build_report,
    compute_eer,
    compute_rates,
    det_curve,
)
from .mrf import (
    MrfModel,
    PosteriorTable,
    exact_posterior,
    fuse,
    inference_benchmark,
    local_score,
    unary_from_probabilities,
)
from .pipeline import (
    EvaluationResult,
    Sample,
    ScoreResult,
    evaluate_samples,
    sample_from_record,
    score_image,
    train_detector,
    tune_detector,
)
from .regions import RegionPatch, RegionSpec, crop_and_resize, preset_regions, region_bbox
from .spectral import (
    PowerLawFit,
    RadialProfile,
    ResidualProfile,
    band_count,
    fit_power_law,
    log_magnitude_spectrum,
    radial_profile,
    residual,
)
from .synth import SynthSpec, perturb_mid_high, power_law_image, synthesize_pairs

__version__ = "0.1.0"

__all__ = [
    "DetectorBundle", "load_bundle", "save_bundle",
    "KernelSvmModel", "LogisticModel", "predict_logistic", "predict_svm",
    "train_logistic", "train_svm_rbf",
    "DetectorConfig", "DetectorError",
    "PcaModel", "Standardizer", "concat_channels", "fit_pca",
    "fit_standardizer", "transform",
    "ManifestRecord", "load_manifest",
    "MetricsReport", "bpcer_at_apcer", "build_report", "compute_eer",
    "compute_rates", "det_curve",
    "MrfModel", "PosteriorTable", "exact_posterior", "fuse",
    "inference_benchmark", "local_score", "unary_from_probabilities",
    "EvaluationResult", "Sample", "ScoreResult", "evaluate_samples",
    "sample_from_record", "score_image", "train_detector", "tune_detector",
    "RegionPatch", "RegionSpec", "crop_and_resize", "preset_regions", "region_bbox",
    "PowerLawFit", "RadialProfile", "ResidualProfile", "band_count",
    "fit_power_law", "log_magnitude_spectrum", "radial_profile", "residual",
    "SynthSpec", "perturb_mid_high", "power_law_image", "synthesize_pairs",
]
