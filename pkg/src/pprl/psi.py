"""Commutative-blinding private set intersection over group encodings.

Each side hashes its items to the group and raises them to its secret
scalar; the peer raises them once more. Because exponentiation commutes,
doubly-blinded values coincide exactly when the underlying items do, so
membership can be tested without revealing anything else.

Lists here hold canonical 33-byte encodings rather than element objects:
batches at full scale run to millions of entries and the flat form keeps
memory and (de)serialization costs flat. Order is meaningful and preserved
unless a permutation is applied on purpose.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

from . import group
from .group import GroupError, Scalar


class Stage(Enum):
    ONCE = 1
    TWICE = 2


@dataclass(frozen=True)
class EncryptedList:
    """Ordered blinded items. stage counts how many secret scalars applied."""

    items: tuple[bytes, ...]
    stage: Stage

    def __post_init__(self) -> None:
        for it in self.items:
            if len(it) != group.ENCODED_LENGTH:
                raise GroupError("encrypted item has wrong length")

    def __len__(self) -> int:
        return len(self.items)


def encrypt_own(items: Sequence[bytes], sk: Scalar) -> EncryptedList:
    """Hash each plaintext item into the group and blind it once.

    Order follows the input; callers who need a hidden order must permute
    before calling (record blocks are ordered by the session permutation).
    """
    out = tuple(
        group.exp_encoded(group.hash_to_group(item).encode(), sk) for item in items
    )
    return EncryptedList(items=out, stage=Stage.ONCE)


def reencrypt_peer(
    received: EncryptedList,
    sk: Scalar,
    permutation: "BlockPermutation | None" = None,
) -> EncryptedList:
    """Blind the peer's once-encrypted list a second time.

    Every element is validated (decoded) before use; anything malformed
    aborts the batch. Without a permutation the order is preserved exactly,
    which the peer relies on to map results back to its records.
    """
    if received.stage is not Stage.ONCE:
        raise ValueError("can only re-encrypt a once-encrypted list")
    out = []
    for it in received.items:
        group.deserialize(it)
        out.append(group.exp_encoded(it, sk))
    if permutation is not None:
        out = permutation.apply(out)
    return EncryptedList(items=tuple(out), stage=Stage.TWICE)


def intersect(mine: EncryptedList, theirs: EncryptedList) -> list[int]:
    """Membership bitmap: 1 where my i-th doubly-blinded item occurs anywhere
    in the peer-derived list."""
    if mine.stage is not Stage.TWICE or theirs.stage is not Stage.TWICE:
        raise ValueError("intersection requires doubly-encrypted lists")
    table = set(theirs.items)
    return [1 if it in table else 0 for it in mine.items]


@dataclass(frozen=True)
class BlockPermutation:
    """Shuffle whole blocks and independently shuffle inside each block.

    Used by the count-only variant: the peer's signature array arrives as
    contiguous per-record blocks; permuting blocks hides which record is
    which while keeping each record's hits inside one block, so the match
    count survives but nothing else does.
    """

    block_size: int
    outer: tuple[int, ...]
    inner: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if sorted(self.outer) != list(range(len(self.outer))):
            raise ValueError("outer is not a permutation")
        if len(self.inner) != len(self.outer):
            raise ValueError("need one inner permutation per block")
        for p in self.inner:
            if sorted(p) != list(range(self.block_size)):
                raise ValueError("inner is not a permutation of the block")

    @classmethod
    def sample(
        cls, num_blocks: int, block_size: int, rng: random.Random
    ) -> "BlockPermutation":
        outer = list(range(num_blocks))
        rng.shuffle(outer)
        inner = []
        for _ in range(num_blocks):
            p = list(range(block_size))
            rng.shuffle(p)
            inner.append(tuple(p))
        return cls(block_size=block_size, outer=tuple(outer), inner=tuple(inner))

    def apply(self, seq: Sequence) -> list:
        n = len(self.outer)
        if len(seq) != n * self.block_size:
            raise ValueError("sequence length does not match permutation shape")
        out = []
        for dst in range(n):
            src = self.outer[dst]
            base = src * self.block_size
            for j in self.inner[dst]:
                out.append(seq[base + j])
        return out


def shuffled(items: Iterable, rng: random.Random) -> list:
    out = list(items)
    rng.shuffle(out)
    return out


# --- exact-cardinality sub-protocol over raw item sets ---------------------
#
# Used per matched pair to refine the banding estimate into an exact Jaccard:
# the initiator learns |S & R| and |R| (and nothing about which items), the
# responder learns |S|.


def cardinality_start(items: Sequence[bytes], sk: Scalar) -> EncryptedList:
    """Initiator: blind own items, sorted by ciphertext for a canonical order."""
    enc = encrypt_own(items, sk)
    return EncryptedList(items=tuple(sorted(enc.items)), stage=Stage.ONCE)


def cardinality_respond(
    received: EncryptedList,
    own_items: Sequence[bytes],
    sk: Scalar,
    rng: random.Random,
) -> tuple[EncryptedList, EncryptedList]:
    """Responder: re-blind and shuffle the initiator's list; blind own items."""
    reenc = reencrypt_peer(received, sk)
    mixed = EncryptedList(
        items=tuple(shuffled(reenc.items, rng)), stage=Stage.TWICE
    )
    own = cardinality_start(own_items, sk)
    return mixed, own


def cardinality_finish(
    mixed_own: EncryptedList,
    peer_once: EncryptedList,
    sk: Scalar,
    own_count: int,
) -> tuple[int, int, Fraction]:
    """Initiator: count coincidences and derive the exact Jaccard.

    Returns (intersection size, peer set size, Jaccard): with c shared items
    out of |S| and |R|, J = c / (|S| + |R| - c).
    """
    peer_twice = reencrypt_peer(peer_once, sk)
    overlap = intersect(peer_twice, mixed_own)
    c = sum(overlap)
    peer_count = len(peer_once)
    union = own_count + peer_count - c
    j = Fraction(0) if union == 0 else Fraction(c, union)
    return c, peer_count, j
