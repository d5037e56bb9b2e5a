"""MinHash signatures with banding, over weighted field-group shingles.

Each record is reduced to B band signatures. A band is the SHA-256 digest of
R per-row minima, where every (band, row) position owns an independent
universal-hash coefficient pair derived from a shared seed. Two records agree
on a band exactly when all R minima agree, which happens with probability
J^R for Jaccard similarity J; across B bands the match probability is
1 - (1 - J^R)^B.

Field-group weights w > 1 are applied by transforming each hashed value
x/maxVal through y = 1 - (1-x)^(1/w), the CDF trick that makes one shingle
behave like w independent copies. Weight 1 stays on the integer-exact path.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .records import FieldGroupSpec, Record

# Largest Mersenne prime below 2^64; universal hashing works mod this.
MERSENNE_PRIME = (1 << 61) - 1
# Hashed values are reduced to 32 bits before use.
MAX_HASH = 1 << 32

_MP = np.uint64(MERSENNE_PRIME)
_MASK32 = np.uint64(0xFFFFFFFF)
_MASK29 = np.uint64((1 << 29) - 1)


@dataclass(frozen=True)
class LshParams:
    """Banding shape plus the shared coefficient seed.

    Both parties must hold identical values; the seed is 32 bytes and must be
    agreed out of band (it is as sensitive as the linkage itself).
    """

    bands: int
    rows: int
    seed: bytes

    def __post_init__(self) -> None:
        if self.bands < 1:
            raise ValueError("bands must be >= 1")
        if self.rows < 1:
            raise ValueError("rows must be >= 1")
        if len(self.seed) != 32:
            raise ValueError("seed must be exactly 32 bytes")

    @property
    def num_hashes(self) -> int:
        return self.bands * self.rows


@dataclass(frozen=True)
class BandSignatureList:
    """Per-record band signatures, one 32-byte digest per band."""

    sigs: tuple[bytes, ...]

    def __post_init__(self) -> None:
        for s in self.sigs:
            if len(s) != 32:
                raise ValueError("band signature must be 32 bytes")

    def __len__(self) -> int:
        return len(self.sigs)

    def __getitem__(self, i: int) -> bytes:
        return self.sigs[i]


def shingles(text: str, k: int) -> set[str]:
    """All contiguous k-character substrings; empty when len(text) < k."""
    if k < 1:
        raise ValueError("shingle length must be >= 1")
    return {text[i : i + k] for i in range(len(text) - k + 1)}


def jaccard(a: set[str], b: set[str]) -> Fraction:
    """Exact Jaccard similarity |a&b| / |a|b|; 0 when both sets are empty."""
    union = len(a | b)
    if union == 0:
        return Fraction(0)
    return Fraction(len(a & b), union)


def get_weighted_shingles(
    record: Record, specs: Iterable[FieldGroupSpec]
) -> dict[str, int]:
    """Shingle -> weight over all groups of a normalized record.

    A group's text is the in-order concatenation of its member fields. If the
    same shingle arises from several groups the largest weight wins, which
    matches min-combining of the transformed hashes.
    """
    out: dict[str, int] = {}
    for spec in specs:
        text = "".join(record.get(name) for name in spec.members)
        for s in shingles(text, spec.shingle_len):
            prev = out.get(s)
            if prev is None or spec.weight > prev:
                out[s] = spec.weight
    return out


def shingle_digest(shingle: str) -> int:
    """Stable 32-bit digest of a shingle: leading 4 bytes of SHA-256, big-endian."""
    return int.from_bytes(hashlib.sha256(shingle.encode("utf-8")).digest()[:4], "big")


def _transform(hashed: int, weight: int) -> int:
    # CDF trick: maps a uniform draw to the minimum of `weight` iid uniforms.
    if weight == 1:
        return hashed
    x = hashed / 4294967296.0
    if weight == 2:
        y = 1.0 - math.sqrt(1.0 - x)
    else:
        y = 1.0 - (1.0 - x) ** (1.0 / weight)
    return int(y * 4294967296.0)


def calc_h(hashed: int, mult: int, add: int, weight: int) -> int:
    """One universal-hash draw for a 32-bit shingle digest, weight-adjusted.

    Computes ((hashed*mult + add) mod MERSENNE_PRIME) mod MAX_HASH, then
    applies the weight transform. Result lies in [0, MAX_HASH].
    """
    if not 0 <= hashed < MAX_HASH:
        raise ValueError("hashed value out of 32-bit range")
    if not 1 <= mult < MERSENNE_PRIME:
        raise ValueError("mult must be in [1, MERSENNE_PRIME)")
    if not 0 <= add < MERSENNE_PRIME:
        raise ValueError("add must be in [0, MERSENNE_PRIME)")
    if weight < 1:
        raise ValueError("weight must be >= 1")
    base = ((hashed * mult + add) % MERSENNE_PRIME) & 0xFFFFFFFF
    return _transform(base, weight)


def uhash_matrix(digests: np.ndarray, mult: np.ndarray, add: np.ndarray) -> np.ndarray:
    """Vectorized ((digests*mult + add) mod MP) mod 2^32 with broadcasting.

    All inputs uint64; digests must be < 2^32 and coefficients < MP. The
    64-bit products are reduced via the Mersenne structure of MP, so no
    intermediate overflows 2^63. Bit-exact against the scalar formula.
    """
    c_hi = mult >> 32
    c_lo = mult & _MASK32
    lo = digests * c_lo
    hi = digests * c_hi
    hi_mod = (hi >> 29) + ((hi & _MASK29) << 32)
    lo_f = (lo & _MP) + (lo >> 61)
    t = hi_mod + lo_f + add
    t = (t & _MP) + (t >> 61)
    t = (t & _MP) + (t >> 61)
    t = np.where(t >= _MP, t - _MP, t)
    return t & _MASK32


@dataclass(frozen=True)
class HashCoeffs:
    """The P = bands*rows coefficient pairs, position (b, r) at index b*rows + r.

    Every position gets an independent pair; reusing one row-set across bands
    would make all bands perfectly correlated.
    """

    mult: np.ndarray
    add: np.ndarray

    def __len__(self) -> int:
        return len(self.mult)

    @classmethod
    def from_seed(cls, seed: bytes, num_hashes: int) -> "HashCoeffs":
        """Derive pairs from the shared seed via SHAKE-256, rejection-sampled
        so mult is uniform on [1, MP) and add on [0, MP)."""

        def stream():
            counter = 0
            while True:
                block = hashlib.shake_256(
                    b"pprl/coeffs/v1" + seed + counter.to_bytes(4, "big")
                ).digest(8 * 4096)
                for i in range(0, len(block), 8):
                    yield int.from_bytes(block[i : i + 8], "big") & MERSENNE_PRIME
                counter += 1

        words = stream()
        mult = np.empty(num_hashes, dtype=np.uint64)
        add = np.empty(num_hashes, dtype=np.uint64)
        for i in range(num_hashes):
            v = next(words)
            while not 1 <= v < MERSENNE_PRIME:
                v = next(words)
            mult[i] = v
        for i in range(num_hashes):
            v = next(words)
            while v >= MERSENNE_PRIME:
                v = next(words)
            add[i] = v
        mult.setflags(write=False)
        add.setflags(write=False)
        return cls(mult=mult, add=add)


@lru_cache(maxsize=32)
def _coeffs_for(seed: bytes, num_hashes: int) -> HashCoeffs:
    return HashCoeffs.from_seed(seed, num_hashes)


def coeffs_for(params: LshParams) -> HashCoeffs:
    return _coeffs_for(params.seed, params.num_hashes)


def _row_minima(
    weighted: dict[str, int],
    coeffs: HashCoeffs,
    digest_cache: dict[str, int] | None = None,
) -> list[int]:
    # Group shingles by weight, take per-row minima of the raw universal
    # hashes within each class, transform only the minima (the transform is
    # monotone, so this equals transforming everything first), then combine.
    by_weight: dict[int, list[int]] = {}
    for s, w in weighted.items():
        if digest_cache is not None:
            dig = digest_cache.get(s)
            if dig is None:
                dig = shingle_digest(s)
                digest_cache[s] = dig
        else:
            dig = shingle_digest(s)
        by_weight.setdefault(w, []).append(dig)

    minima: list[int] | None = None
    for w, digs in by_weight.items():
        arr = np.asarray(digs, dtype=np.uint64)
        raw = uhash_matrix(arr[:, None], coeffs.mult, coeffs.add).min(axis=0)
        if w == 1:
            vals = [int(v) for v in raw]
        else:
            vals = [_transform(int(v), w) for v in raw]
        if minima is None:
            minima = vals
        else:
            minima = [min(m, v) for m, v in zip(minima, vals)]
    assert minima is not None
    return minima


def lsh_record(
    record: Record,
    specs: Sequence[FieldGroupSpec],
    params: LshParams,
    *,
    digest_cache: dict[str, int] | None = None,
) -> BandSignatureList:
    """Band signatures for one preprocessed record.

    Raises ValueError for a record with no shingles in any group, since such
    a record has no well-defined signature.
    """
    weighted = get_weighted_shingles(record, specs)
    if not weighted:
        raise ValueError(f"empty record: {record.id!r} yields no shingles")
    coeffs = coeffs_for(params)
    minima = _row_minima(weighted, coeffs, digest_cache)
    rows = params.rows
    sigs = []
    for b in range(params.bands):
        chunk = minima[b * rows : (b + 1) * rows]
        sigs.append(
            hashlib.sha256(b"".join(v.to_bytes(8, "big") for v in chunk)).digest()
        )
    return BandSignatureList(sigs=tuple(sigs))


def lsh_dataset(
    records: Iterable[Record],
    specs: Sequence[FieldGroupSpec],
    params: LshParams,
) -> list[BandSignatureList]:
    """Signatures for many records, sharing the digest cache across records."""
    cache: dict[str, int] = {}
    return [lsh_record(rec, specs, params, digest_cache=cache) for rec in records]


def lsh_match(a: BandSignatureList, b: BandSignatureList) -> tuple[int, int]:
    """(indicator, hit count): how many band positions agree, and whether any do."""
    if len(a) != len(b):
        raise ValueError("signature lists have different band counts")
    hits = sum(1 for x, y in zip(a.sigs, b.sigs) if x == y)
    return (1 if hits else 0), hits


def duplicate_with_suffixes(shingle_set: set[str], weight: int) -> set[str]:
    """Explicit-duplication form of weighting: w suffixed copies per shingle.

    Used to cross-check the CDF transform; the two constructions agree in
    distribution of per-row minima.
    """
    return {f"{s}{i}" for s in shingle_set for i in range(weight)}
