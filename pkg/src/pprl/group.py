"""Prime-order group for commutative blinding, built on NIST P-256.

Elements are curve points taken modulo negation and represented by their
x-coordinate alone, so exponentiation is x-only scalar multiplication
(delegated to the OpenSSL backend via an ECDH exchange, which returns
exactly the x-coordinate of the product). The quotient keeps everything the
protocol needs: exp commutes, composes, and is invertible, and equality of
blinded values still witnesses equality of the underlying inputs.

hash_to_group maps arbitrary bytes to an element through a simplified-SWU
point mapping fed by an XMD expander, so nobody ever learns a discrete log
of a mapped element with respect to any fixed base.

Canonical wire form of an element is 33 bytes: 0x02 followed by the 32-byte
big-endian x-coordinate. The 0x03 SEC1 prefix is rejected as non-canonical;
in the quotient the two lifts are the same element.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass
from functools import lru_cache

from cryptography.hazmat.primitives.asymmetric import ec

try:
    import gmpy2

    _HAVE_GMPY2 = True
except ImportError:  # pragma: no cover - exercised only without the extra
    _HAVE_GMPY2 = False

# P-256 domain parameters.
P = 0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFF
A = P - 3
B = 0x5AC635D8AA3A93E7B3EBBD55769886BC651D06B0CC53B0F63BCE3C3E27D2604B
ORDER = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551

ENCODED_LENGTH = 33

_CURVE = ec.SECP256R1()

if _HAVE_GMPY2:
    _P_MPZ = gmpy2.mpz(P)

    def _legendre(a: int) -> int:
        return int(gmpy2.legendre(a, _P_MPZ))

    def _invmod(a: int) -> int:
        return int(gmpy2.invert(a, _P_MPZ))

else:  # pragma: no cover

    def _legendre(a: int) -> int:
        r = pow(a, (P - 1) // 2, P)
        return -1 if r == P - 1 else r

    def _invmod(a: int) -> int:
        return pow(a, -1, P)


class GroupError(ValueError):
    """Malformed or invalid group element material."""


@dataclass(frozen=True)
class GroupElement:
    """A curve point modulo negation, held as its x-coordinate."""

    x: int

    def __post_init__(self) -> None:
        if not 0 <= self.x < P:
            raise GroupError("x-coordinate out of field range")

    def encode(self) -> bytes:
        return b"\x02" + self.x.to_bytes(32, "big")


def serialize(element: GroupElement) -> bytes:
    return element.encode()


def deserialize(data: bytes) -> GroupElement:
    """Parse and fully validate a canonical 33-byte encoding.

    Rejects wrong lengths, any prefix other than 0x02 (including the
    redundant 0x03 lift), out-of-range coordinates, and x values with no
    curve point (non-residue right-hand side).
    """
    if len(data) != ENCODED_LENGTH:
        raise GroupError(f"encoded element must be {ENCODED_LENGTH} bytes")
    if data[0] != 0x02:
        raise GroupError("non-canonical or malformed element prefix")
    x = int.from_bytes(data[1:], "big")
    if x >= P:
        raise GroupError("x-coordinate not reduced mod field prime")
    rhs = (x * x % P * x + A * x + B) % P
    if _legendre(rhs) != 1:
        raise GroupError("x-coordinate is not on the curve")
    return GroupElement(x)


@dataclass(frozen=True)
class Scalar:
    """A secret exponent in [1, order-1]."""

    value: int

    def __post_init__(self) -> None:
        if not 1 <= self.value < ORDER:
            raise GroupError("scalar out of range")

    def inverse(self) -> "Scalar":
        return Scalar(pow(self.value, -1, ORDER))


def keygen(entropy: bytes | None = None) -> Scalar:
    """Fresh uniform scalar; pass entropy bytes for deterministic derivation
    (tests and seeded reruns only — live sessions must leave it None)."""
    if entropy is None:
        return Scalar(secrets.randbelow(ORDER - 1) + 1)
    wide = int.from_bytes(expand_message_xmd(entropy, b"pprl/keygen/v1", 48), "big")
    return Scalar(wide % (ORDER - 1) + 1)


@lru_cache(maxsize=256)
def _backend_private_key(value: int) -> ec.EllipticCurvePrivateKey:
    return ec.derive_private_key(value, _CURVE)


def exp_encoded(encoded: bytes, k: Scalar) -> bytes:
    """Exponentiate directly on canonical encodings (hot path for batches)."""
    try:
        pub = ec.EllipticCurvePublicKey.from_encoded_point(_CURVE, encoded)
    except ValueError as exc:
        raise GroupError(f"cannot exponentiate invalid element: {exc}") from exc
    shared = _backend_private_key(k.value).exchange(ec.ECDH(), pub)
    return b"\x02" + shared


def exp(element: GroupElement, k: Scalar) -> GroupElement:
    """element^k in the quotient group."""
    out = exp_encoded(element.encode(), k)
    return GroupElement(int.from_bytes(out[1:], "big"))


def expand_message_xmd(msg: bytes, dst: bytes, length: int) -> bytes:
    """SHA-256 XMD expander: uniform bytes from (msg, domain tag)."""
    if not 0 < length <= 255 * 32:
        raise ValueError("length out of range for XMD")
    if len(dst) > 255:
        raise ValueError("domain tag too long")
    ell = (length + 31) // 32
    dst_prime = dst + len(dst).to_bytes(1, "big")
    b0 = hashlib.sha256(
        bytes(64) + msg + length.to_bytes(2, "big") + b"\x00" + dst_prime
    ).digest()
    prev = hashlib.sha256(b0 + b"\x01" + dst_prime).digest()
    chunks = [prev]
    for i in range(2, ell + 1):
        prev = hashlib.sha256(
            bytes(a ^ c for a, c in zip(b0, prev)) + i.to_bytes(1, "big") + dst_prime
        ).digest()
        chunks.append(prev)
    return b"".join(chunks)[:length]


_DST = b"pprl-v1-P256_XMD:SHA-256_SSWU_NU_"

# Simplified-SWU constants for y^2 = x^3 + Ax + B with Z = -10.
_Z = P - 10
_C1 = (-B * _invmod(A)) % P
_C2 = (B * _invmod(_Z * A % P)) % P


def _sswu_x(u: int) -> int:
    # x-coordinate half of the simplified-SWU map; the y sign is quotiented
    # away so the square roots are never taken.
    tv1 = _Z * (u * u % P) % P
    den = (tv1 * tv1 + tv1) % P
    if den == 0:
        x = _C2
    else:
        x = _C1 * (1 + _invmod(den)) % P
    gx = (x * x % P * x + A * x + B) % P
    if _legendre(gx) == 1:
        return x
    return tv1 * x % P


def hash_to_group(data: bytes) -> GroupElement:
    """Deterministic map bytes -> element with unknown discrete logs."""
    u = int.from_bytes(expand_message_xmd(data, _DST, 48), "big") % P
    return GroupElement(_sswu_x(u))
