"""Two-party linkage session: banded signatures exchanged under commutative
blinding, with match extraction on the sender side.

Roles are asymmetric. The sender learns which of its records have a likely
counterpart (and per-record band hit counts); the receiver learns only the
sender's dataset size, except in the mutual and revealing variants which
deliberately widen its view. The count variant narrows the sender's view to
a bare match count by letting the receiver permute the returned array at
block granularity.

All orderings are load-bearing: each side's signature array is laid out in
the order of a fresh secret permutation of its records, and every transform
of a peer's array preserves order unless a variant explicitly permutes it.
"""

from __future__ import annotations

import hashlib
import random
import secrets
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction

from . import psi, transport
from .config import LinkageConfig, Variant
from .group import Scalar, keygen
from .lsh import BandSignatureList, get_weighted_shingles, lsh_dataset
from .psi import BlockPermutation, EncryptedList, Stage
from .records import Dataset, Record, deduplicate, preprocess_dataset
from .transport import Channel, MessageType, recv_batch, recv_json, send_batch, send_json

PROTOCOL_VERSION = 1

_VARIANT_CODES = {
    Variant.BASE: 0,
    Variant.MUTUAL: 1,
    Variant.COUNT: 2,
    Variant.REVEALING: 3,
}
_CODE_VARIANTS = {v: k for k, v in _VARIANT_CODES.items()}

_SIG_CONTEXT = b"band-signature\x00"
_SHINGLE_CONTEXT = b"record-shingle\x00"

ELEMENT_SIZE = 33


class ProtocolError(Exception):
    pass


class HandshakeError(ProtocolError):
    pass


@dataclass
class RunStats:
    n_local: int
    n_peer: int
    bytes_sent: int
    bytes_received: int
    comm_seconds: float
    offline_seconds: float
    total_seconds: float

    @property
    def comm_kb(self) -> float:
        return (self.bytes_sent + self.bytes_received) / 1000.0


@dataclass
class MatchEntry:
    record_id: str
    hits: int
    handle: bytes
    exact_jaccard: Fraction | None = None


@dataclass
class MatchResult:
    entries: list[MatchEntry]
    n_local: int
    n_peer: int
    bands: int
    revealed: dict[bytes, dict[str, str]] | None = None
    stats: RunStats | None = None

    def __post_init__(self) -> None:
        ids = set()
        for e in self.entries:
            if not 1 <= e.hits <= self.bands:
                raise ValueError(f"hit count {e.hits} outside [1, {self.bands}]")
            if e.record_id in ids:
                raise ValueError(f"duplicate entry for record {e.record_id!r}")
            ids.add(e.record_id)

    @property
    def matched_ids(self) -> list[str]:
        return [e.record_id for e in self.entries]


@dataclass
class MatchCount:
    count: int
    n_local: int
    n_peer: int
    stats: RunStats | None = None


@dataclass
class ReceiverOutcome:
    n_peer: int
    matches: MatchResult | None = None
    revealed_ids: list[str] | None = None
    stats: RunStats | None = None


@dataclass
class SessionState:
    """Per-session secrets: scalar key, record permutation, RNG streams."""

    role: str
    sk: Scalar
    pi: list[int]
    rng: random.Random

    @classmethod
    def create(cls, role: str, n_records: int, entropy: bytes | None) -> "SessionState":
        if entropy is None:
            sk = keygen()
            rng = random.Random(secrets.randbits(128))
        else:
            sk = keygen(entropy + b"/sk/" + role.encode())
            seed = hashlib.sha256(entropy + b"/rng/" + role.encode()).digest()
            rng = random.Random(int.from_bytes(seed, "big"))
        pi = list(range(n_records))
        rng.shuffle(pi)
        return cls(role=role, sk=sk, pi=pi, rng=rng)

    def subkey(self, label: bytes, entropy: bytes | None) -> Scalar:
        if entropy is None:
            return keygen()
        return keygen(entropy + b"/sub/" + self.role.encode() + b"/" + label)


def count_matches(bitmap: list[int], bands: int) -> int:
    """Blocks of `bands` positions with at least one hit."""
    if len(bitmap) % bands:
        raise ValueError("bitmap length is not a multiple of the band count")
    n = 0
    for i in range(0, len(bitmap), bands):
        if any(bitmap[i : i + bands]):
            n += 1
    return n


def build_signature_array(
    records: list[Record], cfg: LinkageConfig, pi: list[int]
) -> tuple[list[bytes], list[BandSignatureList]]:
    """Plaintext PSI items in permuted block order.

    Position block*B + band holds the band-th signature of record pi[block],
    wrapped in a fixed context prefix so the signature universe can never
    collide with the shingle universe of the cardinality sub-protocol.
    """
    sig_lists = lsh_dataset(records, cfg.specs, cfg.params)
    items: list[bytes] = []
    for block in range(len(records)):
        for sig in sig_lists[pi[block]].sigs:
            items.append(_SIG_CONTEXT + sig)
    return items, sig_lists


def _handshake_payload(cfg: LinkageConfig, n_records: int) -> bytes:
    return (
        PROTOCOL_VERSION.to_bytes(2, "big")
        + bytes([_VARIANT_CODES[cfg.variant]])
        + cfg.params_digest()
        + cfg.spec_digest()
        + n_records.to_bytes(8, "big")
    )


def _exchange_handshake(channel: Channel, cfg: LinkageConfig, n_records: int) -> int:
    """Send our handshake, validate the peer's, return the peer's size.

    Fail-closed: any mismatch aborts the session before a single signature
    leaves the process.
    """
    channel.send_frame(MessageType.HANDSHAKE, _handshake_payload(cfg, n_records))
    payload = channel.expect_frame(MessageType.HANDSHAKE)
    if len(payload) != 2 + 1 + 32 + 32 + 8:
        channel.abort("malformed handshake")
        raise HandshakeError("malformed handshake payload")
    version = int.from_bytes(payload[0:2], "big")
    variant_code = payload[2]
    params_digest = payload[3:35]
    spec_digest = payload[35:67]
    n_peer = int.from_bytes(payload[67:75], "big")
    if version != PROTOCOL_VERSION:
        channel.abort(f"version mismatch: {version} vs {PROTOCOL_VERSION}")
        raise HandshakeError(f"peer speaks version {version}, we speak {PROTOCOL_VERSION}")
    if variant_code not in _CODE_VARIANTS or _CODE_VARIANTS[variant_code] is not cfg.variant:
        channel.abort("variant mismatch")
        raise HandshakeError("peer requested a different protocol variant")
    if params_digest != cfg.params_digest():
        channel.abort("hash parameter mismatch")
        raise HandshakeError("hash parameter digests differ; configs are not identical")
    if spec_digest != cfg.spec_digest():
        channel.abort("field group mismatch")
        raise HandshakeError("field group digests differ; configs are not identical")
    return n_peer


def _prepare(dataset: Dataset, cfg: LinkageConfig) -> Dataset:
    return deduplicate(preprocess_dataset(dataset, cfg.specs), cfg.specs)


def _record_shingle_items(record: Record, cfg: LinkageConfig) -> list[bytes]:
    return [
        _SHINGLE_CONTEXT + s.encode("utf-8")
        for s in get_weighted_shingles(record, cfg.specs)
    ]


def _needs_return_leg(cfg: LinkageConfig) -> bool:
    return cfg.variant in (Variant.MUTUAL, Variant.REVEALING) or cfg.exact_jaccard


def run_sender(
    dataset: Dataset,
    cfg: LinkageConfig,
    channel: Channel,
    *,
    entropy: bytes | None = None,
) -> MatchResult | MatchCount:
    """Drive the sender side to completion over an established channel.

    Returns a MatchResult, or a bare MatchCount in the count variant. Raises
    (and aborts the session) on any protocol violation; no partial result is
    ever returned.
    """
    t_start = time.perf_counter()
    offline = 0.0

    t0 = time.perf_counter()
    prepared = _prepare(dataset, cfg)
    n_local = len(prepared)
    state = SessionState.create("sender", n_local, entropy)
    offline += time.perf_counter() - t0

    n_peer = _exchange_handshake(channel, cfg, n_local)
    bands = cfg.params.bands

    t0 = time.perf_counter()
    items, _ = build_signature_array(prepared.records, cfg, state.pi)
    own_once = psi.encrypt_own(items, state.sk)
    offline += time.perf_counter() - t0

    send_batch(channel, MessageType.SIG_BATCH, own_once.items, ELEMENT_SIZE)

    peer_items = recv_batch(channel, MessageType.RECEIVER_SIGS, ELEMENT_SIZE)
    if len(peer_items) != n_peer * bands:
        channel.abort("receiver signature array has wrong size")
        raise ProtocolError("receiver signature array size mismatch")

    t0 = time.perf_counter()
    peer_twice = psi.reencrypt_peer(
        EncryptedList(items=tuple(peer_items), stage=Stage.ONCE), state.sk
    )
    offline += time.perf_counter() - t0

    own_twice_items = recv_batch(channel, MessageType.REENC_BATCH, ELEMENT_SIZE)
    if len(own_twice_items) != n_local * bands:
        channel.abort("re-encrypted array has wrong size")
        raise ProtocolError("re-encrypted array size mismatch")
    own_twice = EncryptedList(items=tuple(own_twice_items), stage=Stage.TWICE)

    t0 = time.perf_counter()
    bitmap = psi.intersect(own_twice, peer_twice)
    offline += time.perf_counter() - t0

    if cfg.variant is Variant.COUNT:
        count = count_matches(bitmap, bands)
        total = time.perf_counter() - t_start
        stats = RunStats(
            n_local=n_local,
            n_peer=n_peer,
            bytes_sent=channel.stats.bytes_sent,
            bytes_received=channel.stats.bytes_received,
            comm_seconds=channel.stats.comm_seconds,
            offline_seconds=offline,
            total_seconds=total,
        )
        return MatchCount(count=count, n_local=n_local, n_peer=n_peer, stats=stats)

    entries: list[MatchEntry] = []
    for block in range(n_local):
        lo = block * bands
        hits = sum(bitmap[lo : lo + bands])
        if not hits:
            continue
        first = next(j for j in range(bands) if bitmap[lo + j])
        entries.append(
            MatchEntry(
                record_id=prepared.records[state.pi[block]].id,
                hits=hits,
                handle=own_twice.items[lo + first],
            )
        )

    if _needs_return_leg(cfg):
        send_batch(channel, MessageType.MUTUAL_RETURN, peer_twice.items, ELEMENT_SIZE)

    revealed: dict[bytes, dict[str, str]] | None = None
    if cfg.variant is Variant.REVEALING:
        handles = [e.handle for e in entries]
        send_batch(channel, MessageType.REVEAL_REQUEST, handles, ELEMENT_SIZE)
        response = recv_json(channel, MessageType.REVEAL_RESPONSE)
        revealed = {}
        for item in response:
            revealed[bytes.fromhex(item["handle"])] = item["fields"]

    if cfg.exact_jaccard:
        by_id = prepared.by_id()
        for idx, entry in enumerate(entries):
            sub_sk = state.subkey(b"psica-%d" % idx, entropy)
            my_items = _record_shingle_items(by_id[entry.record_id], cfg)
            t0 = time.perf_counter()
            blinded = psi.cardinality_start(my_items, sub_sk)
            offline += time.perf_counter() - t0
            payload = (
                entry.handle
                + len(blinded.items).to_bytes(8, "big")
                + b"".join(blinded.items)
            )
            channel.send_frame(MessageType.PSI_CA_REQUEST, payload)
            resp = channel.expect_frame(MessageType.PSI_CA_RESPONSE)
            mixed, peer_once = _parse_psi_ca_response(resp)
            t0 = time.perf_counter()
            _, _, j = psi.cardinality_finish(mixed, peer_once, sub_sk, len(my_items))
            offline += time.perf_counter() - t0
            entry.exact_jaccard = j

    if _needs_return_leg(cfg):
        channel.send_frame(MessageType.DONE, b"")

    total = time.perf_counter() - t_start
    stats = RunStats(
        n_local=n_local,
        n_peer=n_peer,
        bytes_sent=channel.stats.bytes_sent,
        bytes_received=channel.stats.bytes_received,
        comm_seconds=channel.stats.comm_seconds,
        offline_seconds=offline,
        total_seconds=total,
    )
    return MatchResult(
        entries=entries,
        n_local=n_local,
        n_peer=n_peer,
        bands=bands,
        revealed=revealed,
        stats=stats,
    )


def _parse_psi_ca_response(payload: bytes) -> tuple[EncryptedList, EncryptedList]:
    if len(payload) < 8:
        raise transport.MalformedMessage("cardinality response too short")
    n1 = int.from_bytes(payload[:8], "big")
    off = 8 + n1 * ELEMENT_SIZE
    if len(payload) < off + 8:
        raise transport.MalformedMessage("cardinality response truncated")
    mixed = tuple(
        payload[8 + i * ELEMENT_SIZE : 8 + (i + 1) * ELEMENT_SIZE] for i in range(n1)
    )
    n2 = int.from_bytes(payload[off : off + 8], "big")
    body = payload[off + 8 :]
    if len(body) != n2 * ELEMENT_SIZE:
        raise transport.MalformedMessage("cardinality response size mismatch")
    own = tuple(body[i * ELEMENT_SIZE : (i + 1) * ELEMENT_SIZE] for i in range(n2))
    return (
        EncryptedList(items=mixed, stage=Stage.TWICE),
        EncryptedList(items=own, stage=Stage.ONCE),
    )


def run_receiver(
    dataset: Dataset,
    cfg: LinkageConfig,
    channel: Channel,
    *,
    entropy: bytes | None = None,
) -> ReceiverOutcome:
    """Drive the receiver side to completion over an established channel."""
    t_start = time.perf_counter()
    offline = 0.0

    t0 = time.perf_counter()
    prepared = _prepare(dataset, cfg)
    n_local = len(prepared)
    state = SessionState.create("receiver", n_local, entropy)
    offline += time.perf_counter() - t0

    n_peer = _exchange_handshake(channel, cfg, n_local)
    bands = cfg.params.bands

    t0 = time.perf_counter()
    items, _ = build_signature_array(prepared.records, cfg, state.pi)
    own_once = psi.encrypt_own(items, state.sk)
    offline += time.perf_counter() - t0

    sender_items = recv_batch(channel, MessageType.SIG_BATCH, ELEMENT_SIZE)
    if len(sender_items) != n_peer * bands:
        channel.abort("sender signature array has wrong size")
        raise ProtocolError("sender signature array size mismatch")

    send_batch(channel, MessageType.RECEIVER_SIGS, own_once.items, ELEMENT_SIZE)

    permutation = None
    if cfg.variant is Variant.COUNT:
        permutation = BlockPermutation.sample(n_peer, bands, state.rng)

    t0 = time.perf_counter()
    sender_twice = psi.reencrypt_peer(
        EncryptedList(items=tuple(sender_items), stage=Stage.ONCE),
        state.sk,
        permutation,
    )
    offline += time.perf_counter() - t0

    send_batch(channel, MessageType.REENC_BATCH, sender_twice.items, ELEMENT_SIZE)

    matches: MatchResult | None = None
    revealed_ids: list[str] | None = None

    if _needs_return_leg(cfg):
        own_twice_items = recv_batch(channel, MessageType.MUTUAL_RETURN, ELEMENT_SIZE)
        if len(own_twice_items) != n_local * bands:
            channel.abort("returned array has wrong size")
            raise ProtocolError("returned array size mismatch")

        t0 = time.perf_counter()
        sig_table: dict[bytes, int] = {}
        for pos, item in enumerate(own_twice_items):
            sig_table.setdefault(item, pos // bands)
        offline += time.perf_counter() - t0

        if cfg.variant is Variant.MUTUAL:
            own_twice = EncryptedList(
                items=tuple(own_twice_items), stage=Stage.TWICE
            )
            t0 = time.perf_counter()
            bitmap = psi.intersect(own_twice, sender_twice)
            offline += time.perf_counter() - t0
            entries = []
            for block in range(n_local):
                lo = block * bands
                hits = sum(bitmap[lo : lo + bands])
                if not hits:
                    continue
                first = next(j for j in range(bands) if bitmap[lo + j])
                entries.append(
                    MatchEntry(
                        record_id=prepared.records[state.pi[block]].id,
                        hits=hits,
                        handle=own_twice_items[lo + first],
                    )
                )
            matches = MatchResult(
                entries=entries, n_local=n_local, n_peer=n_peer, bands=bands
            )

        if cfg.variant is Variant.REVEALING or cfg.exact_jaccard:
            by_block = prepared.records
            sub_counter = 0
            if cfg.variant is Variant.REVEALING:
                handles = recv_batch(channel, MessageType.REVEAL_REQUEST, ELEMENT_SIZE)
                revealed_ids = []
                response = []
                for handle in handles:
                    block = sig_table.get(handle)
                    if block is None:
                        channel.abort("unknown reveal handle")
                        raise ProtocolError("reveal request for unknown handle")
                    rec = by_block[state.pi[block]]
                    revealed_ids.append(rec.id)
                    response.append(
                        {"handle": handle.hex(), "fields": dict(rec.fields)}
                    )
                send_json(channel, MessageType.REVEAL_RESPONSE, response)

            while True:
                mtype, payload = channel.recv_frame()
                if mtype is MessageType.DONE:
                    break
                if mtype is MessageType.ABORT:
                    raise transport.PeerAbort(payload.decode("utf-8", "replace"))
                if mtype is not MessageType.PSI_CA_REQUEST:
                    channel.abort("unexpected message in sub-protocol loop")
                    raise ProtocolError(f"unexpected {mtype.name} in sub-protocol loop")
                if not cfg.exact_jaccard:
                    channel.abort("cardinality sub-protocol not negotiated")
                    raise ProtocolError("peer started a sub-protocol we did not agree to")
                if len(payload) < ELEMENT_SIZE + 8:
                    raise transport.MalformedMessage("cardinality request too short")
                handle = payload[:ELEMENT_SIZE]
                n_items = int.from_bytes(payload[ELEMENT_SIZE : ELEMENT_SIZE + 8], "big")
                body = payload[ELEMENT_SIZE + 8 :]
                if len(body) != n_items * ELEMENT_SIZE:
                    raise transport.MalformedMessage("cardinality request size mismatch")
                block = sig_table.get(handle)
                if block is None:
                    channel.abort("unknown cardinality handle")
                    raise ProtocolError("cardinality request for unknown handle")
                rec = by_block[state.pi[block]]
                sub_sk = state.subkey(b"psica-%d" % sub_counter, entropy)
                sub_counter += 1
                incoming = EncryptedList(
                    items=tuple(
                        body[i * ELEMENT_SIZE : (i + 1) * ELEMENT_SIZE]
                        for i in range(n_items)
                    ),
                    stage=Stage.ONCE,
                )
                t0 = time.perf_counter()
                mixed, own = psi.cardinality_respond(
                    incoming, _record_shingle_items(rec, cfg), sub_sk, state.rng
                )
                offline += time.perf_counter() - t0
                out = (
                    len(mixed.items).to_bytes(8, "big")
                    + b"".join(mixed.items)
                    + len(own.items).to_bytes(8, "big")
                    + b"".join(own.items)
                )
                channel.send_frame(MessageType.PSI_CA_RESPONSE, out)
        else:
            mtype, payload = channel.recv_frame()
            if mtype is MessageType.ABORT:
                raise transport.PeerAbort(payload.decode("utf-8", "replace"))
            if mtype is not MessageType.DONE:
                raise ProtocolError(f"expected DONE, got {mtype.name}")

    total = time.perf_counter() - t_start
    stats = RunStats(
        n_local=n_local,
        n_peer=n_peer,
        bytes_sent=channel.stats.bytes_sent,
        bytes_received=channel.stats.bytes_received,
        comm_seconds=channel.stats.comm_seconds,
        offline_seconds=offline,
        total_seconds=total,
    )
    return ReceiverOutcome(
        n_peer=n_peer, matches=matches, revealed_ids=revealed_ids, stats=stats
    )


def run_loopback(
    sender_ds: Dataset,
    receiver_ds: Dataset,
    cfg: LinkageConfig,
    *,
    sender_entropy: bytes | None = None,
    receiver_entropy: bytes | None = None,
    record_frames: bool = False,
    timeout: float = 600.0,
) -> tuple[MatchResult | MatchCount, ReceiverOutcome, Channel, Channel]:
    """Run both roles in-process over a loopback channel pair.

    The receiver runs on a worker thread; exceptions from either side are
    re-raised here, receiver first (its failure usually explains the
    sender's).
    """
    ch_s, ch_r = transport.LoopbackChannel.pair(timeout=timeout)
    ch_s.record_frames = record_frames
    ch_r.record_frames = record_frames

    receiver_out: list[ReceiverOutcome] = []
    receiver_err: list[BaseException] = []

    def _run_receiver() -> None:
        try:
            receiver_out.append(
                run_receiver(receiver_ds, cfg, ch_r, entropy=receiver_entropy)
            )
        except BaseException as exc:  # noqa: BLE001 - surfaced to the caller
            receiver_err.append(exc)
            ch_r.close()

    worker = threading.Thread(target=_run_receiver, daemon=True)
    worker.start()
    sender_exc: BaseException | None = None
    try:
        sender_result = run_sender(sender_ds, cfg, ch_s, entropy=sender_entropy)
    except BaseException as exc:  # noqa: BLE001
        sender_exc = exc
        ch_s.close()
        sender_result = None
    worker.join(timeout=timeout)
    if receiver_err:
        raise receiver_err[0]
    if sender_exc is not None:
        raise sender_exc
    assert sender_result is not None
    return sender_result, receiver_out[0], ch_s, ch_r
