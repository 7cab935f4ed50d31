"""End-to-end orchestration: samples in, trained bundle out, scores, reports.

Training and scoring always run the same two streams:
  global: letterboxed image -> channel residuals -> standardize -> PCA ->
          calibrated RBF-SVM posterior,
  local:  four region patches -> channel residuals -> per-region
          standardize/PCA/logistic -> MRF consensus -> expected bona fide
          fraction.
The two stream scores are combined by a fixed-weight fusion.

Feature extraction across images can fan out over a thread pool; results
are always collected in manifest order, so worker count never changes any
output.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import imgio
from .bundle import DetectorBundle, GlobalStream, RegionStream
from .classify import (
    predict_logistic,
    predict_svm,
    train_logistic,
    train_svm_rbf,
)
from .config import DetectorConfig
from .errors import InvalidInputError, SingleClassError
from .features import concat_channels, fit_pca, fit_standardizer, transform
from .manifest import ManifestRecord
from .metrics import (
    MetricsReport,
    average_rates,
    build_report,
    compute_eer,
    format_report_table,
    report_to_json,
)
from .mrf import MrfModel, exact_posterior, fuse, local_score, unary_from_probabilities
from .regions import (
    REGION_IDS,
    RegionSpec,
    bilinear_resize,
    crop_and_resize,
    load_landmark_file,
    preset_regions,
    region_bbox,
)
from .spectral import channel_residual

logger = logging.getLogger("specmorph")


@dataclass
class Sample:
    """One dataset record; the image may be in memory, on disk, or lazy."""

    label: int                      # 1 bona fide, 0 morph
    attack_type: str = ""
    landmarks: np.ndarray | None = None
    image: np.ndarray | None = None
    image_path: str | None = None
    image_factory: object = None    # () -> ndarray, for regenerable data

    def load(self) -> np.ndarray:
        if self.image is not None:
            return self.image
        if self.image_factory is not None:
            return self.image_factory()
        if self.image_path is not None:
            return imgio.load_image(self.image_path)
        raise InvalidInputError("sample has no image source")


def sample_from_record(record: ManifestRecord) -> Sample:
    landmarks = None
    if record.landmark_path is not None:
        landmarks = load_landmark_file(record.landmark_path)
    return Sample(label=record.label, attack_type=record.attack_type,
                  landmarks=landmarks, image_path=record.image_path)


def prepare_image(image: np.ndarray, size: int) -> tuple[np.ndarray, float, float, float]:
    """Letterbox to size x size: aspect-preserving bilinear resize, edge padding.

    Returns (prepared, scale, x_offset, y_offset); landmark coordinates map
    as p' = p * scale + offset.  Images already at the target size pass
    through untouched.
    """
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidInputError(f"image must be (H, W, 3), got {arr.shape}")
    h, w = arr.shape[:2]
    if (h, w) == (size, size):
        return arr, 1.0, 0.0, 0.0
    scale = size / max(h, w)
    new_h = max(1, round(h * scale))
    new_w = max(1, round(w * scale))
    resized = bilinear_resize(arr, new_h, new_w)
    top = (size - new_h) // 2
    left = (size - new_w) // 2
    prepared = np.pad(
        resized,
        ((top, size - new_h - top), (left, size - new_w - left), (0, 0)),
        mode="edge",
    )
    return prepared, scale, float(left), float(top)


def global_raw_feature(prepared: np.ndarray) -> np.ndarray:
    """Concatenated R,G,B residual profiles of the full image."""
    return concat_channels(*(channel_residual(prepared[:, :, c]) for c in range(3)))


def _region_specs(config: DetectorConfig) -> dict[str, RegionSpec]:
    return {
        rid: RegionSpec(rid, [int(i) for i in config.landmark_indices[rid]],
                        config.margin_fraction)
        for rid in REGION_IDS
    }


def resolve_region_boxes(config: DetectorConfig, image_size: int,
                         landmarks: np.ndarray | None) -> dict[str, tuple]:
    """Region boxes from landmarks or presets, per the configured mode."""
    if config.region_mode == "preset" or (config.region_mode == "auto" and landmarks is None):
        fractions = {rid: tuple(config.region_fractions[rid]) for rid in REGION_IDS}
        return preset_regions(image_size, fractions)
    if landmarks is None:
        raise InvalidInputError("region_mode 'landmarks' requires landmarks for every image")
    specs = _region_specs(config)
    return {
        rid: region_bbox(landmarks, specs[rid], image_size, image_size)
        for rid in REGION_IDS
    }


def region_raw_features(prepared: np.ndarray, boxes: dict[str, tuple],
                        patch_size: int) -> dict[str, np.ndarray]:
    out = {}
    for rid in REGION_IDS:
        patch = crop_and_resize(prepared, boxes[rid], patch_size)
        out[rid] = concat_channels(*(channel_residual(patch[:, :, c]) for c in range(3)))
    return out


def _extract_features(sample: Sample, config: DetectorConfig):
    prepared, scale, ox, oy = prepare_image(sample.load(), config.image_size)
    landmarks = sample.landmarks
    if landmarks is not None:
        landmarks = np.asarray(landmarks, dtype=np.float64) * scale + np.array([ox, oy])
    boxes = resolve_region_boxes(config, config.image_size, landmarks)
    return global_raw_feature(prepared), region_raw_features(prepared, boxes,
                                                             config.patch_size)


def _ordered_map(fn, items, workers: int) -> list:
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _balance(samples: list[Sample], seed: int) -> list[Sample]:
    """Seeded downsampling of the majority class, manifest order preserved."""
    bona = [i for i, s in enumerate(samples) if s.label == 1]
    morph = [i for i, s in enumerate(samples) if s.label == 0]
    if len(bona) == len(morph):
        return list(samples)
    rng = np.random.default_rng(seed)
    if len(bona) > len(morph):
        keep = rng.choice(len(bona), size=len(morph), replace=False)
        bona = [bona[i] for i in sorted(keep)]
    else:
        keep = rng.choice(len(morph), size=len(bona), replace=False)
        morph = [morph[i] for i in sorted(keep)]
    kept = sorted(bona + morph)
    return [samples[i] for i in kept]


def train_detector(samples: list[Sample], config: DetectorConfig | None = None
                   ) -> DetectorBundle:
    """Fit the full detector on labelled samples and return the bundle."""
    config = config or DetectorConfig()
    labels_all = {s.label for s in samples}
    if labels_all != {0, 1}:
        raise SingleClassError("training set must contain both bona fide and morph samples")
    if config.region_mode == "landmarks":
        missing = [i for i, s in enumerate(samples) if s.landmarks is None]
        if missing:
            raise InvalidInputError(
                f"region_mode 'landmarks' but samples {missing[:5]} lack landmarks")
    if config.balance:
        samples = _balance(samples, config.seed)
    labels = np.array([s.label for s in samples], dtype=np.int64)

    extracted = _ordered_map(lambda s: _extract_features(s, config), samples,
                             config.workers)
    global_raw = np.stack([e[0] for e in extracted])
    region_raw = {
        rid: np.stack([e[1][rid] for e in extracted]) for rid in REGION_IDS
    }

    n = len(samples)
    dim = min(config.pca_dim, global_raw.shape[1], n - 1)
    standardizer = fit_standardizer(global_raw)
    pca = fit_pca(standardizer.apply(global_raw), dim)
    svm = train_svm_rbf(
        transform(global_raw, standardizer, pca), labels,
        penalty=config.svm_penalty, gamma=config.svm_gamma, tol=config.svm_tol,
        seed=config.seed, calibration_fraction=config.calibration_fraction,
    )
    global_stream = GlobalStream(standardizer=standardizer, pca=pca, svm=svm)

    region_streams = {}
    for rid in REGION_IDS:
        raw = region_raw[rid]
        r_dim = min(config.pca_dim, raw.shape[1], n - 1)
        r_std = fit_standardizer(raw)
        r_pca = fit_pca(r_std.apply(raw), r_dim)
        logistic = train_logistic(
            transform(raw, r_std, r_pca), labels,
            l2_strength=config.logistic_l2, tol=config.logistic_tol,
        )
        region_streams[rid] = RegionStream(
            landmark_indices=[int(i) for i in config.landmark_indices[rid]],
            margin_fraction=config.margin_fraction,
            standardizer=r_std, pca=r_pca, logistic=logistic,
        )

    return DetectorBundle(
        config=config.to_dict(),
        image_size=config.image_size,
        global_stream=global_stream,
        region_streams=region_streams,
        beta=config.beta,
        fusion_lambda=config.fusion_lambda,
        seeds={"master": config.seed, "balance": config.seed, "svm_split": config.seed},
    )


@dataclass(frozen=True)
class ScoreResult:
    global_score: float
    local_score: float
    fused_score: float
    region_probabilities: dict[str, float]
    region_marginals: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "s_global": self.global_score,
            "s_local": self.local_score,
            "s_fused": self.fused_score,
            "region_probabilities": self.region_probabilities,
            "region_marginals": self.region_marginals,
        }


def _region_probabilities(bundle: DetectorBundle, prepared: np.ndarray,
                          landmarks: np.ndarray | None,
                          config: DetectorConfig) -> dict[str, float]:
    boxes = resolve_region_boxes(config, bundle.image_size, landmarks)
    probs = {}
    for rid in REGION_IDS:
        stream = bundle.region_streams[rid]
        patch = crop_and_resize(prepared, boxes[rid], config.patch_size)
        raw = concat_channels(*(channel_residual(patch[:, :, c]) for c in range(3)))
        probs[rid] = predict_logistic(
            stream.logistic, transform(raw, stream.standardizer, stream.pca))
    return probs


def score_image(bundle: DetectorBundle, image: np.ndarray,
                landmarks: np.ndarray | None = None,
                fusion_lambda: float | None = None,
                beta: float | None = None) -> ScoreResult:
    """Full forward pass over one image; deterministic."""
    config = DetectorConfig.from_dict(bundle.config)
    prepared, scale, ox, oy = prepare_image(image, bundle.image_size)
    if landmarks is not None:
        landmarks = np.asarray(landmarks, dtype=np.float64) * scale + np.array([ox, oy])
    gs = bundle.global_stream
    raw = global_raw_feature(prepared)
    s_global = predict_svm(gs.svm, transform(raw, gs.standardizer, gs.pca))

    probs = _region_probabilities(bundle, prepared, landmarks, config)
    ordered = np.array([probs[rid] for rid in REGION_IDS])
    model = MrfModel(region_count=len(REGION_IDS),
                     beta=bundle.beta if beta is None else beta)
    posterior = exact_posterior(unary_from_probabilities(ordered), model)
    s_local = local_score(posterior)
    marginals = posterior.marginals()

    lam = bundle.fusion_lambda if fusion_lambda is None else fusion_lambda
    return ScoreResult(
        global_score=s_global,
        local_score=s_local,
        fused_score=fuse(s_global, s_local, lam),
        region_probabilities={rid: float(probs[rid]) for rid in REGION_IDS},
        region_marginals={rid: float(m) for rid, m in zip(REGION_IDS, marginals)},
    )


@dataclass(frozen=True)
class EvaluationResult:
    overall: MetricsReport
    per_attack: dict[str, MetricsReport]
    average: dict
    scores: np.ndarray
    labels: np.ndarray

    def to_json(self) -> str:
        return report_to_json(self.per_attack, self.overall)

    def to_table(self) -> str:
        return format_report_table(self.per_attack)


def evaluate_samples(bundle: DetectorBundle, samples: list[Sample],
                     fusion_lambda: float | None = None,
                     workers: int | None = None) -> EvaluationResult:
    """Score every sample and report metrics per attack type and overall.

    Each attack pool is evaluated against the shared bona fide pool.
    Attack names present only on bona fide rows are skipped with a warning.
    """
    config = DetectorConfig.from_dict(bundle.config)
    results = _ordered_map(
        lambda s: score_image(bundle, s.load(), s.landmarks, fusion_lambda),
        samples, workers if workers is not None else config.workers)
    scores = np.array([r.fused_score for r in results])
    labels = np.array([s.label for s in samples], dtype=np.int64)
    if not (np.any(labels == 0) and np.any(labels == 1)):
        raise SingleClassError("evaluation needs both classes")

    bona_mask = labels == 1
    per_attack: dict[str, MetricsReport] = {}
    names = {s.attack_type for s in samples if s.attack_type}
    if any(s.label == 0 and not s.attack_type for s in samples):
        names.add("")
    for name in sorted(names):
        morph_mask = np.array(
            [s.label == 0 and s.attack_type == name for s in samples])
        if not morph_mask.any():
            logger.warning("attack group %r has no morph samples; skipped", name)
            continue
        pool = bona_mask | morph_mask
        per_attack[name or "unlabeled"] = build_report(scores[pool], labels[pool])
    overall = build_report(scores, labels)
    return EvaluationResult(
        overall=overall,
        per_attack=per_attack,
        average=average_rates(per_attack) if per_attack else {},
        scores=scores,
        labels=labels,
    )


def tune_detector(bundle: DetectorBundle, samples: list[Sample],
                  beta_grid, lambda_grid) -> DetectorBundle:
    """Grid-search beta and the fusion weight to minimize validation EER.

    Region and global probabilities are computed once; only the MRF
    consensus and the fusion mix are re-evaluated per grid point.  Ties
    break toward smaller beta, then smaller lambda.
    """
    beta_grid = sorted(float(b) for b in beta_grid)
    lambda_grid = sorted(float(l) for l in lambda_grid)
    if not beta_grid or not lambda_grid:
        raise InvalidInputError("grids must be non-empty")
    config = DetectorConfig.from_dict(bundle.config)
    labels = np.array([s.label for s in samples], dtype=np.int64)
    if not (np.any(labels == 0) and np.any(labels == 1)):
        raise SingleClassError("validation set needs both classes")

    base = _ordered_map(
        lambda s: score_image(bundle, s.load(), s.landmarks), samples, config.workers)
    globals_ = np.array([r.global_score for r in base])
    region_probs = np.array(
        [[r.region_probabilities[rid] for rid in REGION_IDS] for r in base])

    best = None
    for beta in beta_grid:
        model = MrfModel(region_count=len(REGION_IDS), beta=beta)
        locals_ = np.array([
            local_score(exact_posterior(unary_from_probabilities(p), model))
            for p in region_probs
        ])
        for lam in lambda_grid:
            fused = lam * globals_ + (1.0 - lam) * locals_
            eer, _ = compute_eer(fused, labels)
            if best is None or eer < best[0]:
                best = (eer, beta, lam)
    eer, beta, lam = best
    metadata = dict(bundle.metadata)
    metadata["tuning"] = {
        "beta_grid": beta_grid,
        "lambda_grid": lambda_grid,
        "chosen_beta": beta,
        "chosen_lambda": lam,
        "validation_eer": eer,
    }
    config_dict = dict(bundle.config)
    config_dict["beta"] = beta
    config_dict["fusion_lambda"] = lam
    return replace(bundle, beta=beta, fusion_lambda=lam, metadata=metadata,
                   config=config_dict)
