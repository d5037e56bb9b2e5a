"""Banding math, parameter tuning, and accuracy evaluation.

Everything here is plaintext-side tooling: predicting match behaviour from
(bands, rows), inverting band hit counts into Jaccard estimates, searching
for cheaper parameter shapes, and scoring a finished run against ground
truth. Nothing in this module touches the wire.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Collection, Iterable, Mapping, Sequence

import numpy as np

from .config import LinkageConfig
from .lsh import jaccard, get_weighted_shingles, lsh_dataset
from .records import Dataset, Record


def match_probability(j: float, bands: int, rows: int) -> float:
    """Probability that at least one band agrees for a pair with Jaccard j:
    1 - (1 - j^rows)^bands, evaluated in log space for stability."""
    if not 0.0 <= j <= 1.0:
        raise ValueError("jaccard similarity must be in [0, 1]")
    p_band = j**rows
    if p_band >= 1.0:
        return 1.0
    return -math.expm1(bands * math.log1p(-p_band))


def match_probability_grid(js: np.ndarray, bands: int, rows: int) -> np.ndarray:
    p_band = np.clip(js, 0.0, 1.0) ** rows
    out = np.ones_like(p_band)
    open_mask = p_band < 1.0
    out[open_mask] = -np.expm1(bands * np.log1p(-p_band[open_mask]))
    return out


def estimate_jaccard_interval(
    hits: int, bands: int, rows: int, *, z: float = 1.96
) -> tuple[float, float]:
    """Approximate 95% interval for J from a band hit count.

    The hit count is Binomial(bands, J^rows); a normal interval on the hit
    fraction is clamped to [0, 1] and pulled through the rows-th root.
    Degenerate counts pin the interval: 0 hits -> [0, 0], all hits -> [1, 1].
    """
    if not 0 <= hits <= bands:
        raise ValueError("hit count outside [0, bands]")
    if hits == 0:
        return (0.0, 0.0)
    if hits == bands:
        return (1.0, 1.0)
    frac = hits / bands
    misses = bands - hits
    width = z * math.sqrt(misses * hits / bands**3)
    lo = max(0.0, frac - width) ** (1.0 / rows)
    hi = min(1.0, frac + width) ** (1.0 / rows)
    return (lo, hi)


@dataclass(frozen=True)
class CurveSpec:
    """A target match-probability curve, plus the threshold it protects."""

    bands: int
    rows: int
    threshold: float

    def __post_init__(self) -> None:
        if self.bands < 1 or self.rows < 1:
            raise ValueError("bands and rows must be >= 1")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")


@dataclass(frozen=True)
class TuneResult:
    bands: int
    rows: int
    max_deviation: float
    target: CurveSpec


def tune_parameters(
    target: CurveSpec,
    *,
    epsilon: float = 0.05,
    max_bands: int = 64,
    max_rows: int = 512,
    grid_step: float = 0.01,
) -> TuneResult | None:
    """Smallest (bands, rows) whose curve tracks the target within epsilon.

    Deviation is the max absolute difference over a J grid with the given
    step. Bands are minimized first (they drive cost linearly), rows break
    ties. Returns None when nothing inside the bounds is close enough.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    grid = np.arange(0.0, 1.0 + grid_step / 2, grid_step)
    target_curve = match_probability_grid(grid, target.bands, target.rows)
    for bands in range(1, max_bands + 1):
        for rows in range(1, max_rows + 1):
            dev = float(
                np.max(np.abs(match_probability_grid(grid, bands, rows) - target_curve))
            )
            if dev <= epsilon:
                return TuneResult(
                    bands=bands, rows=rows, max_deviation=dev, target=target
                )
    return None


def curve_samples(bands: int, rows: int, grid_step: float = 0.01) -> list[tuple[float, float]]:
    grid = np.arange(0.0, 1.0 + grid_step / 2, grid_step)
    vals = match_probability_grid(grid, bands, rows)
    return [(float(j), float(p)) for j, p in zip(grid, vals)]


@dataclass(frozen=True)
class AccuracyReport:
    true_positives: int
    false_positives: int
    false_negatives: int

    @property
    def precision(self) -> float:
        denom = self.true_positives + self.false_positives
        return self.true_positives / denom if denom else 1.0

    @property
    def recall(self) -> float:
        denom = self.true_positives + self.false_negatives
        return self.true_positives / denom if denom else 1.0


def evaluate_accuracy(
    reported_ids: Iterable[str],
    truth: Mapping[str, str],
    peer_entities: Collection[str],
) -> AccuracyReport:
    """Score reported local matches against entity-level ground truth.

    truth maps each local record id to its entity id; peer_entities is the
    set of entity ids present on the other side. A reported id is correct
    exactly when its entity also occurs over there. Ground truth never flows
    through the protocol; this is strictly post-hoc scoring.
    """
    peer_entities = set(peer_entities)
    reported = set(reported_ids)
    unknown = reported - truth.keys()
    if unknown:
        raise ValueError(f"reported ids missing from ground truth: {sorted(unknown)[:5]}")
    should_match = {rid for rid, ent in truth.items() if ent in peer_entities}
    tp = len(reported & should_match)
    return AccuracyReport(
        true_positives=tp,
        false_positives=len(reported) - tp,
        false_negatives=len(should_match - reported),
    )


def plaintext_match_pairs(
    sender: Dataset,
    receiver: Dataset,
    cfg: LinkageConfig,
) -> dict[tuple[str, str], int]:
    """All-pairs banding oracle on plaintext signatures.

    Returns {(sender_id, receiver_id): band hits} for every pair agreeing on
    at least one band position. Quadratic and loopback-only by design; used
    to validate protocol outputs and to study accuracy.
    """
    sigs_s = lsh_dataset(sender.records, cfg.specs, cfg.params)
    sigs_r = lsh_dataset(receiver.records, cfg.specs, cfg.params)
    bands = cfg.params.bands
    if not sigs_s or not sigs_r:
        return {}

    def pack(sig_lists) -> np.ndarray:
        blob = b"".join(b"".join(sl.sigs) for sl in sig_lists)
        return np.frombuffer(blob, dtype=">u8").reshape(len(sig_lists), bands, 4)

    arr_s = pack(sigs_s)
    arr_r = pack(sigs_r)
    out: dict[tuple[str, str], int] = {}
    chunk = max(1, 2**22 // (len(receiver) * bands + 1))
    for lo in range(0, len(sender), chunk):
        eq = (arr_s[lo : lo + chunk, None, :, :] == arr_r[None, :, :, :]).all(axis=-1)
        hit_counts = eq.sum(axis=-1)
        for i, j in zip(*np.nonzero(hit_counts)):
            out[(sender[lo + i].id, receiver[j].id)] = int(hit_counts[i, j])
    return out


def pairwise_jaccard(a: Record, b: Record, cfg: LinkageConfig) -> float:
    """Plain Jaccard over the records' combined shingle sets."""
    sa = set(get_weighted_shingles(a, cfg.specs))
    sb = set(get_weighted_shingles(b, cfg.specs))
    return float(jaccard(sa, sb))


def estimate_false_positive_rate(
    dataset: Dataset,
    cfg: LinkageConfig,
    *,
    trials: int = 200,
    rng: random.Random | None = None,
) -> float:
    """Estimated probability that a non-matching pair still hits a band.

    Samples pairs of distinct local records (a stand-in for cross-party
    non-matches, which the protocol of course cannot observe), keeps those
    below the configured Jaccard threshold, and measures how often banding
    matches them anyway. Needs no peer data.
    """
    rng = rng or random.Random(0x5EED)
    n = len(dataset)
    if n < 2:
        return 0.0
    from .records import deduplicate, preprocess_dataset

    prepared = deduplicate(preprocess_dataset(dataset, cfg.specs), cfg.specs)
    if len(prepared) < 2:
        return 0.0
    sigs = lsh_dataset(prepared.records, cfg.specs, cfg.params)
    hits = 0
    evaluated = 0
    for _ in range(trials):
        i, j = rng.sample(range(len(prepared)), 2)
        if pairwise_jaccard(prepared[i], prepared[j], cfg) >= cfg.jaccard_threshold:
            continue
        evaluated += 1
        if any(x == y for x, y in zip(sigs[i].sigs, sigs[j].sigs)):
            hits += 1
    return hits / evaluated if evaluated else 0.0
