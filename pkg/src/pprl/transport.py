"""Framed transport: loopback queues for tests, mutually-authenticated TLS
for real deployments.

Wire unit is a frame: 1-byte message type, 4-byte big-endian payload length,
payload. Payloads above MAX_FRAME_PAYLOAD are never sent; batch helpers
split long element arrays across frames at element boundaries and reassemble
them exactly. Every channel keeps byte and wall-clock accounting so runs can
report communication cost separately from compute.
"""

from __future__ import annotations

import json
import queue
import socket
import ssl
import struct
import time
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence


class MessageType(IntEnum):
    HANDSHAKE = 1
    SIG_BATCH = 2
    RECEIVER_SIGS = 3
    REENC_BATCH = 4
    MUTUAL_RETURN = 5
    REVEAL_REQUEST = 6
    REVEAL_RESPONSE = 7
    PSI_CA_REQUEST = 8
    PSI_CA_RESPONSE = 9
    DONE = 10
    ABORT = 11


MAX_FRAME_PAYLOAD = 16 * 1024 * 1024

_HEADER = struct.Struct(">BI")


class TransportError(Exception):
    """Base class for channel failures."""


class MalformedMessage(TransportError):
    pass


class ChannelTimeout(TransportError):
    pass


class ChannelClosed(TransportError):
    pass


class PeerAbort(TransportError):
    """The peer sent an explicit ABORT frame; the payload carries its reason."""


@dataclass
class ChannelStats:
    bytes_sent: int = 0
    bytes_received: int = 0
    frames_sent: int = 0
    frames_received: int = 0
    send_seconds: float = 0.0
    recv_seconds: float = 0.0

    @property
    def comm_seconds(self) -> float:
        return self.send_seconds + self.recv_seconds

    @property
    def total_bytes(self) -> int:
        return self.bytes_sent + self.bytes_received


@dataclass
class Channel:
    """Transport base: subclasses implement raw byte IO."""

    stats: ChannelStats = field(default_factory=ChannelStats)
    record_frames: bool = False
    transcript: list[tuple[str, int, bytes]] = field(default_factory=list)

    def _write(self, data: bytes) -> None:
        raise NotImplementedError

    def _read(self, n: int) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError

    def send_frame(self, mtype: MessageType, payload: bytes) -> None:
        if len(payload) > MAX_FRAME_PAYLOAD:
            raise MalformedMessage("payload exceeds frame limit")
        t0 = time.perf_counter()
        self._write(_HEADER.pack(int(mtype), len(payload)) + payload)
        self.stats.send_seconds += time.perf_counter() - t0
        self.stats.bytes_sent += _HEADER.size + len(payload)
        self.stats.frames_sent += 1
        if self.record_frames:
            self.transcript.append(("send", int(mtype), payload))

    def recv_frame(self) -> tuple[MessageType, bytes]:
        t0 = time.perf_counter()
        header = self._read(_HEADER.size)
        code, length = _HEADER.unpack(header)
        if length > MAX_FRAME_PAYLOAD:
            raise MalformedMessage("announced payload exceeds frame limit")
        payload = self._read(length) if length else b""
        self.stats.recv_seconds += time.perf_counter() - t0
        self.stats.bytes_received += _HEADER.size + length
        self.stats.frames_received += 1
        try:
            mtype = MessageType(code)
        except ValueError as exc:
            raise MalformedMessage(f"unknown message type {code}") from exc
        if self.record_frames:
            self.transcript.append(("recv", int(mtype), payload))
        return mtype, payload

    def expect_frame(self, expected: MessageType) -> bytes:
        """Receive one frame of the given type; ABORT raises, anything else
        is a protocol violation."""
        mtype, payload = self.recv_frame()
        if mtype is MessageType.ABORT:
            raise PeerAbort(payload.decode("utf-8", "replace"))
        if mtype is not expected:
            raise MalformedMessage(f"expected {expected.name}, got {mtype.name}")
        return payload

    def abort(self, reason: str) -> None:
        try:
            self.send_frame(MessageType.ABORT, reason.encode("utf-8"))
        except TransportError:
            pass


class LoopbackChannel(Channel):
    """In-process channel over a pair of queues; use pair() to get both ends."""

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue, timeout: float = 60.0):
        super().__init__()
        self._inbox = inbox
        self._outbox = outbox
        self._timeout = timeout
        self._buffer = b""
        self._closed = False

    @classmethod
    def pair(cls, timeout: float = 60.0) -> tuple["LoopbackChannel", "LoopbackChannel"]:
        q_ab: queue.Queue = queue.Queue()
        q_ba: queue.Queue = queue.Queue()
        return cls(q_ba, q_ab, timeout), cls(q_ab, q_ba, timeout)

    def _write(self, data: bytes) -> None:
        if self._closed:
            raise ChannelClosed("channel is closed")
        self._outbox.put(data)

    def _read(self, n: int) -> bytes:
        while len(self._buffer) < n:
            try:
                chunk = self._inbox.get(timeout=self._timeout)
            except queue.Empty as exc:
                raise ChannelTimeout("no data within timeout") from exc
            if chunk is None:
                raise ChannelClosed("peer closed the channel")
            self._buffer += chunk
        out, self._buffer = self._buffer[:n], self._buffer[n:]
        return out

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._outbox.put(None)


class TlsChannel(Channel):
    """Mutually authenticated TLS 1.3 channel over TCP.

    Both sides pin the peer's certificate directly (no CA hierarchy): each
    context trusts exactly the expected peer cert and requires a client
    certificate, so an unauthenticated endpoint cannot even complete the
    handshake.
    """

    def __init__(self, sock: ssl.SSLSocket):
        super().__init__()
        self._sock = sock

    @staticmethod
    def _context(server: bool, certfile: str, keyfile: str, peer_certfile: str) -> ssl.SSLContext:
        ctx = ssl.SSLContext(
            ssl.PROTOCOL_TLS_SERVER if server else ssl.PROTOCOL_TLS_CLIENT
        )
        ctx.minimum_version = ssl.TLSVersion.TLSv1_3
        ctx.load_cert_chain(certfile, keyfile)
        ctx.load_verify_locations(peer_certfile)
        ctx.verify_mode = ssl.CERT_REQUIRED
        if not server:
            ctx.check_hostname = False
        return ctx

    @classmethod
    def serve(
        cls,
        host: str,
        port: int,
        certfile: str,
        keyfile: str,
        peer_certfile: str,
        timeout: float = 120.0,
    ) -> "TlsChannel":
        ctx = cls._context(True, certfile, keyfile, peer_certfile)
        with socket.create_server((host, port)) as listener:
            listener.settimeout(timeout)
            try:
                raw, _ = listener.accept()
            except socket.timeout as exc:
                raise ChannelTimeout("no peer connected") from exc
        raw.settimeout(timeout)
        try:
            tls = ctx.wrap_socket(raw, server_side=True)
        except ssl.SSLError as exc:
            raw.close()
            raise TransportError(f"TLS handshake failed: {exc}") from exc
        return cls(tls)

    @classmethod
    def connect(
        cls,
        host: str,
        port: int,
        certfile: str,
        keyfile: str,
        peer_certfile: str,
        timeout: float = 120.0,
    ) -> "TlsChannel":
        ctx = cls._context(False, certfile, keyfile, peer_certfile)
        try:
            raw = socket.create_connection((host, port), timeout=timeout)
        except socket.timeout as exc:
            raise ChannelTimeout("connect timed out") from exc
        try:
            tls = ctx.wrap_socket(raw, server_hostname=host)
        except ssl.SSLError as exc:
            raw.close()
            raise TransportError(f"TLS handshake failed: {exc}") from exc
        return cls(tls)

    def _write(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except socket.timeout as exc:
            raise ChannelTimeout("send timed out") from exc
        except OSError as exc:
            raise ChannelClosed(f"socket error: {exc}") from exc

    def _read(self, n: int) -> bytes:
        chunks = []
        remaining = n
        while remaining:
            try:
                chunk = self._sock.recv(remaining)
            except socket.timeout as exc:
                raise ChannelTimeout("receive timed out") from exc
            except OSError as exc:
                raise ChannelClosed(f"socket error: {exc}") from exc
            if not chunk:
                raise ChannelClosed("peer closed the connection")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


def send_batch(
    channel: Channel,
    mtype: MessageType,
    items: Sequence[bytes],
    element_size: int,
) -> None:
    """Send an array of fixed-size elements, split across frames as needed.

    The first frame carries an 8-byte element count; frames split only at
    element boundaries so the receiver can validate every chunk.
    """
    blob = b"".join(items)
    if len(blob) != len(items) * element_size:
        raise ValueError("element size mismatch")
    per_frame = ((MAX_FRAME_PAYLOAD - 8) // element_size) * element_size
    first = len(items).to_bytes(8, "big") + blob[:per_frame]
    channel.send_frame(mtype, first)
    offset = per_frame
    while offset < len(blob):
        channel.send_frame(mtype, blob[offset : offset + per_frame])
        offset += per_frame


def recv_batch(
    channel: Channel, mtype: MessageType, element_size: int
) -> list[bytes]:
    """Reassemble a batch sent by send_batch, validating sizes throughout."""
    payload = channel.expect_frame(mtype)
    if len(payload) < 8:
        raise MalformedMessage("batch header too short")
    count = int.from_bytes(payload[:8], "big")
    body = payload[8:]
    if len(body) % element_size:
        raise MalformedMessage("batch chunk not aligned to element size")
    chunks = [body]
    received = len(body) // element_size
    while received < count:
        more = channel.expect_frame(mtype)
        if not more or len(more) % element_size:
            raise MalformedMessage("batch chunk not aligned to element size")
        chunks.append(more)
        received += len(more) // element_size
    if received != count:
        raise MalformedMessage("batch size does not match announced count")
    blob = b"".join(chunks)
    return [blob[i : i + element_size] for i in range(0, len(blob), element_size)]


def send_json(channel: Channel, mtype: MessageType, obj) -> None:
    channel.send_frame(mtype, json.dumps(obj, separators=(",", ":")).encode("utf-8"))


def recv_json(channel: Channel, mtype: MessageType):
    payload = channel.expect_frame(mtype)
    try:
        return json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedMessage(f"bad JSON payload: {exc}") from exc
