"""Presentation-attack metrics: APCER, BPCER, EER, DET curve, reports.

Scores are bona fide likelihoods in [0, 1] (higher = more bona fide);
labels use 1 for bona fide and 0 for morph.  A sample is accepted as
bona fide iff score >= threshold, so ties resolve toward acceptance.

All primitive rates are fractions in [0, 1]; `MetricsReport` converts to
percentages for presentation, matching the usual benchmark tables
(EER %, BPCER % at APCER 1% and 20% per attack plus their unweighted
average).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SingleClassError

BPCER_TARGETS = (0.01, 0.20)


def _check_scored(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise InvalidInputError(f"scores shape {s.shape} != labels shape {y.shape}")
    if not np.all(np.isfinite(s)) or s.min() < 0.0 or s.max() > 1.0:
        raise InvalidInputError("scores must be finite and in [0, 1]")
    if not np.all(np.isin(y, (0, 1))):
        raise InvalidInputError("labels must be 0 (morph) or 1 (bona fide)")
    if not (np.any(y == 0) and np.any(y == 1)):
        raise SingleClassError("both bona fide and morph samples are required")
    return s, y.astype(np.int64)


def compute_rates(scores: np.ndarray, labels: np.ndarray, threshold: float
                  ) -> tuple[float, float]:
    """(APCER, BPCER) at one threshold.

    APCER: fraction of morphs accepted (score >= t).
    BPCER: fraction of bona fide rejected (score < t).
    """
    s, y = _check_scored(scores, labels)
    morph = y == 0
    bona = y == 1
    apcer = float(np.mean(s[morph] >= threshold))
    bpcer = float(np.mean(s[bona] < threshold))
    return apcer, bpcer


def _operating_points(scores: np.ndarray, labels: np.ndarray
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(thresholds, apcer, bpcer) swept over all distinct scores plus +inf.

    Thresholds are ascending, so APCER is nonincreasing and BPCER is
    nondecreasing along the arrays.  The -inf operating point coincides
    with the minimum-score threshold under the >= rule and is omitted.
    """
    s, y = _check_scored(scores, labels)
    thresholds = np.concatenate([np.unique(s), [np.inf]])
    morph_scores = np.sort(s[y == 0])
    bona_scores = np.sort(s[y == 1])
    n_morph, n_bona = len(morph_scores), len(bona_scores)
    accepted_morphs = n_morph - np.searchsorted(morph_scores, thresholds, side="left")
    rejected_bona = np.searchsorted(bona_scores, thresholds, side="left")
    return thresholds, accepted_morphs / n_morph, rejected_bona / n_bona


def compute_eer(scores: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Equal error rate and its operating threshold.

    If no swept threshold gives APCER == BPCER exactly, the rate is
    linearly interpolated between the two adjacent operating points that
    bracket the crossing (the reported threshold is the first one at or
    past the crossing).
    """
    thresholds, apcer, bpcer = _operating_points(scores, labels)
    diff = apcer - bpcer  # starts >= 0, ends <= 0
    exact = np.flatnonzero(diff == 0.0)
    if len(exact):
        k = int(exact[0])
        return float(apcer[k]), float(thresholds[k])
    k = int(np.flatnonzero(diff < 0)[0])  # first sign change
    a0, b0 = apcer[k - 1], bpcer[k - 1]
    a1, b1 = apcer[k], bpcer[k]
    t = (a0 - b0) / ((a0 - b0) - (a1 - b1))
    return float(a0 + t * (a1 - a0)), float(thresholds[k])


def bpcer_at_apcer(scores: np.ndarray, labels: np.ndarray, apcer_target: float) -> float:
    """BPCER at the most permissive threshold with APCER <= target.

    A threshold above every score (reject everything, APCER 0) is always
    in the sweep, so when nothing else satisfies the target this returns
    1.0 (BPCER 100%).
    """
    if not 0.0 <= apcer_target <= 1.0:
        raise InvalidInputError(f"apcer_target must lie in [0, 1], got {apcer_target}")
    _, apcer, bpcer = _operating_points(scores, labels)
    feasible = apcer <= apcer_target
    return float(bpcer[feasible].min())


def det_curve(scores: np.ndarray, labels: np.ndarray) -> list[tuple[float, float]]:
    """Deduplicated (APCER, BPCER) pairs, sorted by ascending APCER."""
    _, apcer, bpcer = _operating_points(scores, labels)
    pairs = list(dict.fromkeys(zip(apcer[::-1], bpcer[::-1])))  # descending threshold
    return [(float(a), float(b)) for a, b in pairs]


@dataclass(frozen=True)
class MetricsReport:
    """Rates for one attack pool against the shared bona fide pool (percent)."""

    eer: float
    eer_threshold: float
    bpcer_at_apcer: dict[float, float]   # APCER target (%) -> BPCER (%)
    det_points: list[tuple[float, float]]
    bona_fide_count: int
    morph_count: int

    def to_dict(self) -> dict:
        return {
            "eer": self.eer,
            "eer_threshold": self.eer_threshold,
            "bpcer_at_apcer": {f"{k:g}": v for k, v in self.bpcer_at_apcer.items()},
            "det_points": [[a, b] for a, b in self.det_points],
            "bona_fide_count": self.bona_fide_count,
            "morph_count": self.morph_count,
        }


def build_report(scores: np.ndarray, labels: np.ndarray,
                 targets: tuple[float, ...] = BPCER_TARGETS) -> MetricsReport:
    s, y = _check_scored(scores, labels)
    eer, thr = compute_eer(s, y)
    return MetricsReport(
        eer=100.0 * eer,
        eer_threshold=thr,
        bpcer_at_apcer={100.0 * t: 100.0 * bpcer_at_apcer(s, y, t) for t in targets},
        det_points=[(100.0 * a, 100.0 * b) for a, b in det_curve(s, y)],
        bona_fide_count=int(np.sum(y == 1)),
        morph_count=int(np.sum(y == 0)),
    )


def average_rates(reports: dict[str, MetricsReport]) -> dict:
    """Unweighted per-attack mean of EER and BPCER@APCER values."""
    if not reports:
        raise InvalidInputError("no per-attack reports to average")
    names = sorted(reports)
    out = {"eer": float(np.mean([reports[n].eer for n in names]))}
    targets = sorted(next(iter(reports.values())).bpcer_at_apcer)
    out["bpcer_at_apcer"] = {
        f"{t:g}": float(np.mean([reports[n].bpcer_at_apcer[t] for n in names]))
        for t in targets
    }
    return out


def report_to_json(per_attack: dict[str, MetricsReport],
                   overall: MetricsReport | None = None) -> str:
    doc = {
        "per_attack": {name: rep.to_dict() for name, rep in sorted(per_attack.items())},
        "average": average_rates(per_attack),
    }
    if overall is not None:
        doc["overall"] = overall.to_dict()
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def format_report_table(per_attack: dict[str, MetricsReport]) -> str:
    """Aligned text table: per attack EER / BPCER@1% / BPCER@20%, plus Avg.

    Mirrors the usual benchmark layout with one column group per attack
    and a trailing unweighted average group.
    """
    names = sorted(per_attack)
    avg = average_rates(per_attack)
    groups = []
    for name in names:
        rep = per_attack[name]
        groups.append((name, rep.eer, rep.bpcer_at_apcer[1.0], rep.bpcer_at_apcer[20.0]))
    groups.append(("Avg.", avg["eer"], avg["bpcer_at_apcer"]["1"],
                   avg["bpcer_at_apcer"]["20"]))

    sub = ["EER", "BPCER@1%", "BPCER@20%"]
    col_w = max(len(h) for h in sub) + 2
    group_w = 3 * col_w
    top = "".join(f"{name:^{group_w}}|" for name, *_ in groups)
    mid = ("".join(f"{h:>{col_w}}" for h in sub) + "|") * len(groups)
    vals = ""
    for _, eer, b1, b20 in groups:
        vals += "".join(f"{v:>{col_w}.2f}" for v in (eer, b1, b20)) + "|"
    rule = "-" * (len(groups) * (group_w + 1))
    return "\n".join([top, rule, mid, rule, vals]) + "\n"
