"""Exact inference over a fully connected pairwise Ising field of regions.

Each facial region carries a binary label (1 bona fide, 0 morph).  Unary
potentials are negative log posteriors from the region classifiers; every
unordered region pair contributes `beta` whenever the two labels disagree.
Because the region count stays small the posterior is computed by exact
enumeration of all 2^R configurations; a capacity guard bounds R.

Configuration index convention: configuration `c` in [0, 2^R) assigns
region r the bit (c >> r) & 1.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .classify import clamp_probability
from .errors import CapacityError, DimensionMismatchError, InvalidInputError

DEFAULT_BETA = 0.9
DEFAULT_FUSION_LAMBDA = 0.6
R_MAX = 24


@dataclass(frozen=True)
class MrfModel:
    region_count: int
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if self.region_count < 1:
            raise InvalidInputError("region_count must be >= 1")
        if not np.isfinite(self.beta) or self.beta < 0:
            raise InvalidInputError("beta must be finite and >= 0")

    @property
    def edges(self) -> list[tuple[int, int]]:
        r = self.region_count
        return [(i, j) for i in range(r) for j in range(i + 1, r)]


def unary_from_probabilities(probs: np.ndarray) -> np.ndarray:
    """Potentials psi[r, z] = -log P(z_r = z), probabilities clamped first.

    Returns an (R, 2) array: column 0 for label 0 (morph), column 1 for
    label 1 (bona fide).
    """
    p = clamp_probability(np.asarray(probs, dtype=np.float64).ravel())
    if p.size < 1:
        raise InvalidInputError("need at least one region probability")
    return np.column_stack([-np.log(1.0 - p), -np.log(p)])


def energy(config: np.ndarray, unaries: np.ndarray, model: MrfModel) -> float:
    """E(z) = sum_r psi_r(z_r) + beta * (# disagreeing pairs)."""
    z = np.asarray(config)
    if z.shape != (model.region_count,):
        raise DimensionMismatchError(
            f"configuration length {z.shape} != ({model.region_count},)"
        )
    if not np.all(np.isin(z, (0, 1))):
        raise InvalidInputError("configuration labels must be 0 or 1")
    if unaries.shape != (model.region_count, 2):
        raise DimensionMismatchError(f"unaries shape {unaries.shape} != (R, 2)")
    ones = int(z.sum())
    unary_term = float(unaries[np.arange(model.region_count), z.astype(int)].sum())
    return unary_term + model.beta * ones * (model.region_count - ones)


@dataclass(frozen=True)
class PosteriorTable:
    """Normalized probabilities over all 2^R label configurations."""

    probabilities: np.ndarray
    region_count: int

    def marginals(self) -> np.ndarray:
        """P(z_r = 1) per region, by summing the matching index slices."""
        out = np.empty(self.region_count)
        for r in range(self.region_count):
            out[r] = self.probabilities.reshape(-1, 2, 1 << r)[:, 1, :].sum()
        return out


try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    _njit = None


if _njit is not None:
    @_njit(cache=True)
    def _energies_jit(delta, base, beta, r):  # pragma: no cover - compiled
        total = 1 << r
        out = np.empty(total, dtype=np.float64)
        for c in range(total):
            ones = 0
            unary = 0.0
            cc = c
            b = 0
            while cc:
                if cc & 1:
                    unary += delta[b]
                    ones += 1
                cc >>= 1
                b += 1
            out[c] = base + unary + beta * ones * (r - ones)
        return out


def _energies_numpy(delta: np.ndarray, base: float, beta: float, r: int) -> np.ndarray:
    """Level-doubling fallback: out[c] = base + subset sum + pairwise term."""
    unary = np.empty(1 << r, dtype=np.float64)
    ones = np.empty(1 << r, dtype=np.float64)
    unary[0] = 0.0
    ones[0] = 0.0
    size = 1
    for b in range(r):
        np.add(unary[:size], delta[b], out=unary[size:2 * size])
        np.add(ones[:size], 1.0, out=ones[size:2 * size])
        size *= 2
    return base + unary + beta * ones * (r - ones)


def _config_energies(psi: np.ndarray, beta: float) -> np.ndarray:
    """E per configuration index; bit r of the index is region r's label."""
    r = len(psi)
    base = float(psi[:, 0].sum())                        # all-zero configuration
    delta = np.ascontiguousarray(psi[:, 1] - psi[:, 0])  # flip-to-1 cost per region
    if _njit is not None:
        return _energies_jit(delta, base, float(beta), r)
    return _energies_numpy(delta, base, beta, r)


def exact_posterior(unaries: np.ndarray, model: MrfModel) -> PosteriorTable:
    """Enumerate all configurations and normalize exp(-E).

    Energies are shifted by their minimum before exponentiation so the
    largest weight is exactly 1 and nothing overflows.
    """
    r = model.region_count
    if r > R_MAX:
        raise CapacityError(f"region_count {r} exceeds the exact-inference cap {R_MAX}")
    psi = np.asarray(unaries, dtype=np.float64)
    if psi.shape != (r, 2):
        raise DimensionMismatchError(f"unaries shape {psi.shape} != ({r}, 2)")
    if not np.all(np.isfinite(psi)):
        raise InvalidInputError("unary potentials must be finite")
    energies = _config_energies(psi, model.beta)
    energies -= energies.min()
    weights = np.exp(-energies)
    return PosteriorTable(probabilities=weights / weights.sum(), region_count=r)


def local_score(posterior: PosteriorTable) -> float:
    """Expected fraction of bona fide region labels under the posterior."""
    r = posterior.region_count
    ones = np.empty(1 << r, dtype=np.float64)
    ones[0] = 0.0
    size = 1
    for _ in range(r):
        np.add(ones[:size], 1.0, out=ones[size:2 * size])
        size *= 2
    return float((ones / r) @ posterior.probabilities)


def fuse(global_score: float, local_score_value: float, fusion_lambda: float) -> float:
    """Weighted combination lambda*global + (1-lambda)*local."""
    for name, v in (("global_score", global_score), ("local_score", local_score_value)):
        if not 0.0 <= v <= 1.0:
            raise InvalidInputError(f"{name} must lie in [0, 1], got {v}")
    if not 0.0 <= fusion_lambda <= 1.0:
        raise InvalidInputError(f"fusion weight must lie in [0, 1], got {fusion_lambda}")
    return fusion_lambda * global_score + (1.0 - fusion_lambda) * local_score_value


@dataclass(frozen=True)
class BenchmarkRow:
    region_count: int
    mean_ns: float
    std_ns: float
    repetitions: int


def inference_benchmark(region_counts, beta: float = DEFAULT_BETA,
                        repetitions: int | None = None,
                        seed: int = 0) -> list[BenchmarkRow]:
    """Wall-clock timing of `exact_posterior` per region count.

    Repetitions default to a budget that shrinks as 2^R grows (at least 5,
    at most 200); two warm-up calls per R are excluded from the stats.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for r in region_counts:
        if r < 1 or r > R_MAX:
            raise CapacityError(f"region_count {r} outside [1, {R_MAX}]")
        reps = repetitions or int(np.clip((1 << 23) >> r, 5, 200))
        probs = rng.uniform(0.05, 0.95, size=r)
        unaries = unary_from_probabilities(probs)
        model = MrfModel(region_count=r, beta=beta)
        exact_posterior(unaries, model)  # warm-up
        exact_posterior(unaries, model)
        times = np.empty(reps)
        for k in range(reps):
            t0 = time.perf_counter_ns()
            exact_posterior(unaries, model)
            times[k] = time.perf_counter_ns() - t0
        rows.append(BenchmarkRow(
            region_count=r,
            mean_ns=float(times.mean()),
            std_ns=float(times.std()),
            repetitions=reps,
        ))
    return rows


def benchmark_csv(rows: list[BenchmarkRow]) -> str:
    lines = ["R,mean_ns,std_ns,repetitions"]
    for row in rows:
        lines.append(
            f"{row.region_count},{row.mean_ns:.1f},{row.std_ns:.1f},{row.repetitions}"
        )
    return "\n".join(lines) + "\n"
