"""Command-line interface.

Subcommands:
  train      fit a detector from a manifest and write the bundle
  score      score one image with a trained bundle
  evaluate   score a manifest and emit JSON/table reports per attack
  tune       grid-search beta/lambda on a validation manifest
  synth      generate a synthetic dataset (PNG files + manifest)
  bench-mrf  time exact MRF inference across region counts
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import imgio
from .bundle import load_bundle, save_bundle
from .config import DetectorConfig
from .manifest import load_manifest, write_manifest
from .mrf import benchmark_csv, inference_benchmark
from .pipeline import (
    evaluate_samples,
    sample_from_record,
    score_image,
    train_detector,
    tune_detector,
)
from .regions import load_landmark_file
from .synth import synthesize_pairs


def _load_config(path: str | None) -> DetectorConfig:
    return DetectorConfig.from_json_file(path) if path else DetectorConfig()


def _load_samples(manifest_path: str):
    return [sample_from_record(r) for r in load_manifest(manifest_path)]


def _cmd_train(args) -> int:
    config = _load_config(args.config)
    bundle = train_detector(_load_samples(args.manifest), config)
    save_bundle(bundle, args.out)
    print(f"wrote bundle {args.out}")
    return 0


def _cmd_score(args) -> int:
    bundle = load_bundle(args.bundle)
    image = imgio.load_image(args.image)
    landmarks = load_landmark_file(args.landmarks) if args.landmarks else None
    result = score_image(bundle, image, landmarks=landmarks,
                         fusion_lambda=args.fusion_lambda)
    print(json.dumps(result.to_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_evaluate(args) -> int:
    bundle = load_bundle(args.bundle)
    result = evaluate_samples(bundle, _load_samples(args.manifest))
    table = result.to_table()
    if args.report_json:
        _write_text(args.report_json, result.to_json())
    if args.report_table:
        _write_text(args.report_table, table)
    print(table, end="")
    return 0


def _cmd_tune(args) -> int:
    bundle = load_bundle(args.bundle)
    tuned = tune_detector(bundle, _load_samples(args.manifest),
                          args.beta_grid, args.lambda_grid)
    out = args.out or args.bundle
    save_bundle(tuned, out)
    chosen = tuned.metadata["tuning"]
    print(f"beta={chosen['chosen_beta']:g} lambda={chosen['chosen_lambda']:g} "
          f"eer={chosen['validation_eer']:.4f} -> {out}")
    return 0


def _cmd_synth(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    count = int(spec.get("count", 20))
    size = int(spec.get("size", 256))
    alpha_range = tuple(spec.get("alpha_range", (1.6, 2.2)))
    band = tuple(spec.get("perturb_band", (0.4, 0.9)))
    amplitude = float(spec.get("perturb_amplitude", 1.0))
    seed = int(spec.get("seed", 0))
    attack = str(spec.get("attack_type", "band_boost"))
    clean, perturbed, _ = synthesize_pairs(count, size, alpha_range, band,
                                           amplitude, seed)
    rows = []
    for i, (bona, morph) in enumerate(zip(clean, perturbed)):
        bona_name = f"bonafide_{i:04d}.png"
        morph_name = f"morph_{i:04d}.png"
        imgio.save_image_png(os.path.join(args.out_dir, bona_name), bona)
        imgio.save_image_png(os.path.join(args.out_dir, morph_name), morph)
        rows.append({"path": bona_name, "label": "bonafide", "attack_type": ""})
        rows.append({"path": morph_name, "label": "morph", "attack_type": attack})
    manifest_path = os.path.join(args.out_dir, "manifest.csv")
    write_manifest(manifest_path, rows)
    print(f"wrote {2 * count} images and {manifest_path}")
    return 0


def _cmd_bench_mrf(args) -> int:
    rows = inference_benchmark(range(1, args.max_r + 1), repetitions=args.repetitions)
    csv_text = benchmark_csv(rows)
    if args.out:
        _write_text(args.out, csv_text)
    print(csv_text, end="")
    return 0


def _write_text(path: str, text: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specmorph",
        description="Frequency-domain single-image morphing attack detector",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a detector from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", default=None, help="JSON config file (all keys optional)")
    p.add_argument("--out", required=True, help="output bundle path")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("score", help="score a single image")
    p.add_argument("--bundle", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--landmarks", default=None)
    p.add_argument("--lambda", dest="fusion_lambda", type=float, default=None,
                   help="override the fusion weight at scoring time")
    p.set_defaults(fn=_cmd_score)

    p = sub.add_parser("evaluate", help="evaluate a manifest with a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--report-json", default=None)
    p.add_argument("--report-table", default=None)
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("tune", help="grid-search beta and lambda on a validation set")
    p.add_argument("--bundle", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--beta-grid", nargs="+", type=float, required=True)
    p.add_argument("--lambda-grid", nargs="+", type=float, required=True)
    p.add_argument("--out", default=None, help="output path (default: overwrite bundle)")
    p.set_defaults(fn=_cmd_tune)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True, help="JSON generation spec")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("bench-mrf", help="time exact inference per region count")
    p.add_argument("--max-r", type=int, required=True)
    p.add_argument("--repetitions", type=int, default=None)
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(fn=_cmd_bench_mrf)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
