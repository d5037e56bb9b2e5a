"""Vectorized Monte-Carlo helpers for the statistical tests.

Each trial draws a fresh independent coefficient matrix, mirroring a fresh
shared seed, and computes per-row minima for fixed shingle sets through the
production uint64 hashing kernel. Weighted variants transform the per-class
minima exactly like the scalar path does.
"""

from __future__ import annotations

import numpy as np

from pprl.lsh import MERSENNE_PRIME, shingle_digest, uhash_matrix


def draw_coeffs(rng: np.random.Generator, trials: int, positions: int):
    mult = rng.integers(1, MERSENNE_PRIME, size=(trials, positions), dtype=np.uint64)
    add = rng.integers(0, MERSENNE_PRIME, size=(trials, positions), dtype=np.uint64)
    return mult, add


def digests_of(shingle_set: set[str]) -> np.ndarray:
    return np.asarray(sorted(shingle_digest(s) for s in shingle_set), dtype=np.uint64)


def row_minima(digests: np.ndarray, mult: np.ndarray, add: np.ndarray) -> np.ndarray:
    """(trials, positions) minima of the universal hash over the digest set."""
    return uhash_matrix(digests[None, :, None], mult[:, None, :], add[:, None, :]).min(
        axis=1
    )


def weighted_row_minima(
    classes: list[tuple[np.ndarray, int]], mult: np.ndarray, add: np.ndarray
) -> np.ndarray:
    """Minima over weight classes: raw minima per class, transform, combine.

    Matches the production order of operations; transforms stay in float64.
    """
    combined = None
    for digests, weight in classes:
        mins = row_minima(digests, mult, add).astype(np.float64)
        if weight > 1:
            x = mins / 4294967296.0
            mins = np.floor((1.0 - (1.0 - x) ** (1.0 / weight)) * 4294967296.0)
        combined = mins if combined is None else np.minimum(combined, mins)
    return combined


def band_match_rate(
    set_a: set[str],
    set_b: set[str],
    bands: int,
    rows: int,
    trials: int,
    seed: int,
    chunk: int = 500,
) -> float:
    """Fraction of independent coefficient draws where >= 1 band agrees."""
    da, db = digests_of(set_a), digests_of(set_b)
    positions = bands * rows
    rng = np.random.default_rng(seed)
    matched = 0
    for lo in range(0, trials, chunk):
        t = min(chunk, trials - lo)
        mult, add = draw_coeffs(rng, t, positions)
        ma = row_minima(da, mult, add).reshape(t, bands, rows)
        mb = row_minima(db, mult, add).reshape(t, bands, rows)
        band_eq = (ma == mb).all(axis=2)
        matched += int(band_eq.any(axis=1).sum())
    return matched / trials


def row_collision_rate(
    set_a: set[str],
    set_b: set[str],
    trials: int,
    positions: int,
    seed: int,
) -> float:
    """Fraction of (trial, row) cells where the two minima coincide."""
    da, db = digests_of(set_a), digests_of(set_b)
    rng = np.random.default_rng(seed)
    mult, add = draw_coeffs(rng, trials, positions)
    ma = row_minima(da, mult, add)
    mb = row_minima(db, mult, add)
    return float((ma == mb).mean())
