"""Dataset manifests: CSV rows of image path, label, attack type, landmarks."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

from .errors import ManifestError

LABELS = {"bonafide": 1, "morph": 0}
HEADER = ["path", "label", "attack_type", "landmarks"]


@dataclass(frozen=True)
class ManifestRecord:
    image_path: str
    label: int                 # 1 bona fide, 0 morph
    attack_type: str = ""
    landmark_path: str | None = None


def load_manifest(path: str) -> list[ManifestRecord]:
    """Parse a manifest CSV and verify the referenced files exist.

    Relative paths resolve against the manifest's directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    records: list[ManifestRecord] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != HEADER:
            raise ManifestError(
                f"manifest header must be {','.join(HEADER)!r}, got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            label_text = (row["label"] or "").strip().lower()
            if label_text not in LABELS:
                raise ManifestError(
                    f"{path}:{lineno}: label must be bonafide or morph, got {row['label']!r}"
                )
            img = _resolve(base, (row["path"] or "").strip())
            if not os.path.isfile(img):
                raise ManifestError(f"{path}:{lineno}: missing image file {img!r}")
            lm_text = (row.get("landmarks") or "").strip()
            lm = _resolve(base, lm_text) if lm_text else None
            if lm is not None and not os.path.isfile(lm):
                raise ManifestError(f"{path}:{lineno}: missing landmark file {lm!r}")
            records.append(ManifestRecord(
                image_path=img,
                label=LABELS[label_text],
                attack_type=(row.get("attack_type") or "").strip(),
                landmark_path=lm,
            ))
    if not records:
        raise ManifestError(f"manifest {path!r} holds no records")
    return records


def _resolve(base: str, path: str) -> str:
    return path if os.path.isabs(path) else os.path.join(base, path)


def write_manifest(path: str, rows: list[dict]) -> None:
    """Write manifest rows ({path,label,attack_type,landmarks} dicts)."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=HEADER)
        writer.writeheader()
        for row in rows:
            writer.writerow({key: row.get(key, "") for key in HEADER})
