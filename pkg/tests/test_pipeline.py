import json

import numpy as np
import pytest

from conftest import tiny_config, tiny_samples
from specmorph.bundle import bundle_dumps, load_bundle, save_bundle
from specmorph.config import DetectorConfig
from specmorph.errors import BundleFormatError, InvalidInputError, SingleClassError
from specmorph.pipeline import (
    Sample,
    evaluate_samples,
    prepare_image,
    score_image,
    train_detector,
    tune_detector,
)
from specmorph.regions import REGION_IDS


class TestPrepareImage:
    def test_native_size_untouched(self, rng):
        img = rng.uniform(0, 1, (128, 128, 3))
        out, scale, ox, oy = prepare_image(img, 128)
        assert np.array_equal(out, img)
        assert (scale, ox, oy) == (1.0, 0.0, 0.0)

    def test_letterbox_preserves_aspect_and_pads_edges(self, rng):
        img = rng.uniform(0, 1, (64, 128, 3))
        out, scale, ox, oy = prepare_image(img, 128)
        assert out.shape == (128, 128, 3)
        assert scale == 1.0 and ox == 0.0 and oy == 32.0
        assert np.array_equal(out[32:96], img)
        assert np.array_equal(out[0], out[32])   # edge padding replicates

    def test_downscale_maps_landmarks(self, rng):
        img = rng.uniform(0, 1, (256, 256, 3))
        out, scale, ox, oy = prepare_image(img, 128)
        assert out.shape == (128, 128, 3)
        assert scale == 0.5 and ox == 0.0 and oy == 0.0


class TestTrain:
    def test_single_class_rejected(self):
        samples = [s for s in tiny_samples(4) if s.label == 1]
        with pytest.raises(SingleClassError):
            train_detector(samples, tiny_config())

    def test_landmark_mode_requires_landmarks(self):
        with pytest.raises(InvalidInputError):
            train_detector(tiny_samples(4), tiny_config(region_mode="landmarks"))

    def test_balancing_downsamples_majority_with_seeded_selection(self, rng):
        samples = tiny_samples(6)
        extra = [Sample(label=1, image=s.image * 0.5 + 0.25)
                 for s in samples[:4] if s.label == 1]
        imbalanced = samples + extra
        cfg = tiny_config(seed=7)
        bundle = train_detector(imbalanced, cfg)
        # independent replication of the documented selection rule
        bona = [i for i, s in enumerate(imbalanced) if s.label == 1]
        morph = [i for i, s in enumerate(imbalanced) if s.label == 0]
        keep = np.random.default_rng(cfg.seed).choice(
            len(bona), size=len(morph), replace=False)
        chosen = sorted([bona[i] for i in sorted(keep)] + morph)
        manual = [imbalanced[i] for i in chosen]
        reference = train_detector(manual, tiny_config(seed=7, balance=False))
        a = json.loads(bundle_dumps(bundle))
        b = json.loads(bundle_dumps(reference))
        a["config"].pop("balance")
        b["config"].pop("balance")
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_retrain_is_byte_identical(self):
        cfg = tiny_config(seed=3)
        d1 = bundle_dumps(train_detector(tiny_samples(8), cfg))
        d2 = bundle_dumps(train_detector(tiny_samples(8), cfg))
        assert d1 == d2

    def test_worker_count_does_not_change_numerics(self):
        d1 = bundle_dumps(train_detector(tiny_samples(8), tiny_config(workers=1)))
        d2 = bundle_dumps(train_detector(tiny_samples(8), tiny_config(workers=3)))
        a, b = json.loads(d1), json.loads(d2)
        a["config"].pop("workers")
        b["config"].pop("workers")
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_config_snapshot_complete(self, trained_tiny_bundle):
        snapshot = trained_tiny_bundle.config
        assert set(snapshot) == set(DetectorConfig().to_dict())
        DetectorConfig.from_dict(snapshot)  # parseable and valid


class TestScore:
    def test_outputs_in_range_and_deterministic(self, trained_tiny_bundle):
        img = tiny_samples(2)[0].image
        a = score_image(trained_tiny_bundle, img)
        b = score_image(trained_tiny_bundle, img)
        assert a == b
        for v in (a.global_score, a.local_score, a.fused_score):
            assert 0.0 <= v <= 1.0
        assert tuple(a.region_probabilities) == REGION_IDS

    def test_lambda_override_degenerations(self, trained_tiny_bundle):
        img = tiny_samples(2)[1].image
        r1 = score_image(trained_tiny_bundle, img, fusion_lambda=1.0)
        assert r1.fused_score == r1.global_score
        r0 = score_image(trained_tiny_bundle, img, fusion_lambda=0.0)
        assert r0.fused_score == r0.local_score

    def test_training_bona_fide_scores_high(self, trained_tiny_bundle):
        samples = tiny_samples(14)
        bona = [s for s in samples if s.label == 1][0]
        assert score_image(trained_tiny_bundle, bona.image).fused_score > 0.5

    def test_bundle_roundtrip_scores_bit_identical(self, trained_tiny_bundle, tmp_path):
        path = str(tmp_path / "bundle.json")
        save_bundle(trained_tiny_bundle, path)
        loaded = load_bundle(path)
        img = tiny_samples(2)[0].image
        assert score_image(loaded, img) == score_image(trained_tiny_bundle, img)

    def test_bundle_version_check(self, trained_tiny_bundle, tmp_path):
        path = str(tmp_path / "bundle.json")
        save_bundle(trained_tiny_bundle, path)
        doc = json.loads(open(path).read())
        doc["version"] = "99"
        open(path, "w").write(json.dumps(doc))
        with pytest.raises(BundleFormatError):
            load_bundle(path)


class TestEvaluate:
    def test_groups_against_shared_bona_fide_pool(self, trained_tiny_bundle):
        samples = tiny_samples(6)
        for i, s in enumerate(samples):
            if s.label == 0 and i > 6:
                samples[i] = Sample(label=0, image=s.image, attack_type="other")
        result = evaluate_samples(trained_tiny_bundle, samples)
        assert set(result.per_attack) == {"band_boost", "other"}
        bona_count = sum(1 for s in samples if s.label == 1)
        for rep in result.per_attack.values():
            assert rep.bona_fide_count == bona_count
        assert result.overall.morph_count == sum(1 for s in samples if s.label == 0)

    def test_bona_only_attack_name_is_skipped_with_warning(self, trained_tiny_bundle, caplog):
        samples = tiny_samples(6)
        samples[0] = Sample(label=1, image=samples[0].image, attack_type="ghost")
        with caplog.at_level("WARNING", logger="specmorph"):
            result = evaluate_samples(trained_tiny_bundle, samples)
        assert "ghost" not in result.per_attack
        assert any("ghost" in rec.message for rec in caplog.records)
        assert "band_boost" in result.per_attack

    def test_single_class_rejected(self, trained_tiny_bundle):
        samples = [s for s in tiny_samples(4) if s.label == 0]
        with pytest.raises(SingleClassError):
            evaluate_samples(trained_tiny_bundle, samples)

    def test_json_and_table_render(self, trained_tiny_bundle):
        result = evaluate_samples(trained_tiny_bundle, tiny_samples(6))
        doc = json.loads(result.to_json())
        assert "per_attack" in doc and "average" in doc and "overall" in doc
        table = result.to_table()
        assert "EER" in table and "BPCER@20%" in table and "Avg." in table


class TestTune:
    def test_singleton_grid_keeps_parameters(self, trained_tiny_bundle):
        tuned = tune_detector(trained_tiny_bundle, tiny_samples(6), [0.9], [0.6])
        assert tuned.beta == trained_tiny_bundle.beta
        assert tuned.fusion_lambda == trained_tiny_bundle.fusion_lambda
        assert tuned.metadata["tuning"]["chosen_beta"] == 0.9
        assert tuned.config["beta"] == 0.9

    def test_noisy_local_stream_pushes_lambda_to_max(self, trained_tiny_bundle, rng):
        # region classifiers replaced by random directions so the local
        # stream is pure noise; the global calibration is flattened so any
        # admixture of that noise costs EER and only the max weight is left
        from dataclasses import replace

        from specmorph.bundle import GlobalStream, RegionStream
        from specmorph.classify import KernelSvmModel, LogisticModel

        noisy_streams = {}
        for rid, stream in trained_tiny_bundle.region_streams.items():
            dim = stream.pca.output_dim
            noisy = LogisticModel(weights=rng.normal(0, 50.0, dim),
                                  bias=float(rng.normal(0, 5.0)),
                                  l2_strength=stream.logistic.l2_strength)
            noisy_streams[rid] = RegionStream(
                landmark_indices=stream.landmark_indices,
                margin_fraction=stream.margin_fraction,
                standardizer=stream.standardizer,
                pca=stream.pca,
                logistic=noisy,
            )
        gs = trained_tiny_bundle.global_stream
        flat_svm = KernelSvmModel(
            support_features=gs.svm.support_features,
            dual_coefficients=gs.svm.dual_coefficients,
            bias=gs.svm.bias,
            kernel_width=gs.svm.kernel_width,
            penalty=gs.svm.penalty,
            calibration_slope=0.05 * gs.svm.calibration_slope,
            calibration_offset=0.0,
            calibration_seed=gs.svm.calibration_seed,
        )
        noisy_bundle = replace(
            trained_tiny_bundle,
            region_streams=noisy_streams,
            global_stream=GlobalStream(standardizer=gs.standardizer,
                                       pca=gs.pca, svm=flat_svm),
        )
        tuned = tune_detector(noisy_bundle, tiny_samples(10), [0.0, 0.9],
                              [0.2, 0.6, 1.0])
        assert tuned.fusion_lambda == 1.0

    def test_grid_contains_default_never_degrades(self, trained_tiny_bundle):
        samples = tiny_samples(8)
        base = evaluate_samples(trained_tiny_bundle, samples).overall.eer
        tuned = tune_detector(trained_tiny_bundle, samples,
                              [0.0, 0.9, 3.0], [0.0, 0.6, 1.0])
        tuned_eer = evaluate_samples(tuned, samples).overall.eer
        assert tuned_eer <= base + 1e-9

    def test_tie_breaks_toward_smaller_parameters(self, trained_tiny_bundle):
        from specmorph.metrics import compute_eer

        samples = tiny_samples(8)
        beta_grid, lambda_grid = [0.3, 0.9], [0.4, 0.6]
        tuned = tune_detector(trained_tiny_bundle, samples, beta_grid, lambda_grid)
        meta = tuned.metadata["tuning"]
        # independent sweep: the winner must be the first grid point (in
        # ascending beta-then-lambda order) that attains the minimal EER
        labels = np.array([s.label for s in samples])
        grid_eer = {}
        for beta in beta_grid:
            for lam in lambda_grid:
                fused = np.array([
                    score_image(trained_tiny_bundle, s.image,
                                fusion_lambda=lam, beta=beta).fused_score
                    for s in samples
                ])
                grid_eer[(beta, lam)] = compute_eer(fused, labels)[0]
        best = min(grid_eer.values())
        expected = next(k for k in sorted(grid_eer) if grid_eer[k] == best)
        assert (meta["chosen_beta"], meta["chosen_lambda"]) == expected
        assert meta["validation_eer"] == best


class TestSampleLoading:
    def test_sample_needs_some_source(self):
        with pytest.raises(InvalidInputError):
            Sample(label=1).load()

    def test_factory_sample(self):
        sample = Sample(label=1, image_factory=lambda: np.zeros((8, 8, 3)))
        assert sample.load().shape == (8, 8, 3)


class TestRegionModes:
    def test_landmark_and_preset_modes_share_output_shape(self, trained_tiny_bundle, rng):
        from dataclasses import replace

        cfg = dict(trained_tiny_bundle.config)
        cfg["region_mode"] = "auto"  # landmarks when present, presets otherwise
        bundle = replace(trained_tiny_bundle, config=cfg)
        img = tiny_samples(2)[0].image
        # landmarks spread over the face area keep every region box valid
        landmarks = np.column_stack([rng.uniform(10, 118, 106),
                                     rng.uniform(10, 118, 106)])
        with_lm = score_image(bundle, img, landmarks=landmarks)
        without = score_image(bundle, img)
        assert tuple(with_lm.region_probabilities) == REGION_IDS
        assert tuple(without.region_probabilities) == REGION_IDS
        assert with_lm.region_probabilities != without.region_probabilities

    def test_landmark_mode_scoring_requires_landmarks(self, trained_tiny_bundle):
        from dataclasses import replace

        cfg = dict(trained_tiny_bundle.config)
        cfg["region_mode"] = "landmarks"
        strict = replace(trained_tiny_bundle, config=cfg)
        with pytest.raises(InvalidInputError):
            score_image(strict, tiny_samples(2)[0].image)

    def test_landmark_mode_trains_and_scores_end_to_end(self, rng):
        from specmorph.regions import DEFAULT_LANDMARK_INDICES

        def face_landmarks():
            # anchor each region's index subset near a plausible location
            centers = {"left_eye": (42, 48), "right_eye": (86, 48),
                       "nose": (64, 70), "mouth": (64, 96)}
            lm = np.column_stack([rng.uniform(20, 108, 106),
                                  rng.uniform(20, 108, 106)])
            for rid, (cx, cy) in centers.items():
                idx = DEFAULT_LANDMARK_INDICES[rid]
                lm[idx, 0] = cx + rng.uniform(-8, 8, len(idx))
                lm[idx, 1] = cy + rng.uniform(-5, 5, len(idx))
            return lm

        samples = tiny_samples(8)
        with_lm = [Sample(label=s.label, image=s.image, attack_type=s.attack_type,
                          landmarks=face_landmarks()) for s in samples]
        bundle = train_detector(with_lm, tiny_config(region_mode="landmarks"))
        result = score_image(bundle, with_lm[0].image, landmarks=with_lm[0].landmarks)
        assert tuple(result.region_probabilities) == REGION_IDS
        assert 0.0 <= result.fused_score <= 1.0
