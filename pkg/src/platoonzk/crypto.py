"""Pairing-based identity proofs over BLS12-381.

The symmetric pairing notation e: G x G -> GT is realised on the
asymmetric curve as

* verifier keys ``v = g^a`` in G2 (``g`` is the G2 generator),
* proofs ``delta = H(digest || nonce)^a`` in G1,
* verification ``e(delta, g) == e(H(digest || nonce), v)``.

All functions are pure; points are carried as canonical compressed bytes
and validated (on-curve, prime-order subgroup, non-identity) before any
pairing is evaluated.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Protocol

from . import backend as _bk
from .errors import PlatoonError

CURVE_ID = "BLS12-381"
ORDER = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001
PROOF_DST = b"PLATOONZK-V01-CS01-with-BLS12381G1_XMD:SHA-256_SSWU_RO_"

G1_BYTES = 48
G2_BYTES = 96
DIGEST_BYTES = 32
NONCE_BYTES = 16
SCALAR_BYTES = 32

_G1_IDENTITY = bytes([0xC0]) + bytes(G1_BYTES - 1)
_G2_IDENTITY = bytes([0xC0]) + bytes(G2_BYTES - 1)


class CryptoError(PlatoonError):
    pass


class InvalidIdentifier(CryptoError, ValueError):
    pass


class DecodeError(CryptoError, ValueError):
    """Text or length problem in a serialized key or proof."""


class MalformedPoint(DecodeError):
    """Bytes do not encode a usable group element."""


class RandomSource(Protocol):
    def randbytes(self, n: int) -> bytes: ...


class _SystemRandom:
    def randbytes(self, n: int) -> bytes:
        return secrets.token_bytes(n)


@dataclass(frozen=True)
class GroupParams:
    curve_id: str
    g: bytes  # key-group generator (G2)
    g1: bytes  # proof-group generator (G1)
    order_p: int

    def serialize(self) -> str:
        return f"{self.curve_id}:{self.order_p:064x}:{self.g1.hex()}:{self.g.hex()}"


@dataclass(frozen=True)
class ProverKey:
    a: int = field(repr=False)

    def __post_init__(self):
        if not 1 <= self.a < ORDER:
            raise ValueError("prover key must lie in [1, p-1]")

    def to_hex(self) -> str:
        return self.a.to_bytes(SCALAR_BYTES, "big").hex()

    @classmethod
    def from_hex(cls, text: str) -> ProverKey:
        raw = _unhex(text, SCALAR_BYTES, "prover key")
        a = int.from_bytes(raw, "big")
        if not 1 <= a < ORDER:
            raise DecodeError("prover key out of range")
        return cls(a)


@dataclass(frozen=True)
class VerifierKey:
    v: bytes

    def __post_init__(self):
        if len(self.v) != G2_BYTES:
            raise DecodeError(f"verifier key must be {G2_BYTES} bytes")

    def to_hex(self) -> str:
        return self.v.hex()

    @classmethod
    def from_hex(cls, text: str) -> VerifierKey:
        key = cls(_unhex(text, G2_BYTES, "verifier key"))
        _check_g2(key.v)
        return key


@dataclass(frozen=True)
class IdentityDigest:
    value: bytes

    def __post_init__(self):
        if len(self.value) != DIGEST_BYTES:
            raise ValueError(f"identity digest must be {DIGEST_BYTES} bytes")

    def hex(self) -> str:
        return self.value.hex()


@dataclass(frozen=True)
class ProofBundle:
    delta: bytes
    digest: IdentityDigest
    nonce: bytes | None = None

    def __post_init__(self):
        if len(self.delta) != G1_BYTES:
            raise DecodeError(f"proof element must be {G1_BYTES} bytes")
        if self.nonce is not None and len(self.nonce) != NONCE_BYTES:
            raise ValueError(f"nonce must be {NONCE_BYTES} bytes")

    def to_hex(self) -> str:
        """delta || digest || nonce, 160 hex chars without nonce, 192 with."""
        return (self.delta + self.digest.value + (self.nonce or b"")).hex()

    @classmethod
    def from_hex(cls, text: str) -> ProofBundle:
        base = G1_BYTES + DIGEST_BYTES
        raw = _unhex(text, None, "proof")
        if len(raw) not in (base, base + NONCE_BYTES):
            raise DecodeError(f"proof must be {base} or {base + NONCE_BYTES} bytes, got {len(raw)}")
        delta = raw[:G1_BYTES]
        _check_g1(delta)
        nonce = raw[base:] or None
        return cls(delta, IdentityDigest(raw[G1_BYTES:base]), nonce)


def _unhex(text: str, size: int | None, what: str) -> bytes:
    text = text.strip()
    if text != text.lower():
        raise DecodeError(f"{what}: hex must be lowercase")
    try:
        raw = bytes.fromhex(text)
    except ValueError:
        raise DecodeError(f"{what}: not valid hex") from None
    if size is not None and len(raw) != size:
        raise DecodeError(f"{what}: expected {size} bytes, got {len(raw)}")
    return raw


def _check_g1(data: bytes) -> None:
    if data == _G1_IDENTITY:
        raise MalformedPoint("G1 identity is not a valid proof element")
    if not _bk.impl.g1_validate(data):
        raise MalformedPoint("bytes are not a prime-order G1 point")


def _check_g2(data: bytes) -> None:
    if data == _G2_IDENTITY:
        raise MalformedPoint("G2 identity is not a valid verifier key")
    if not _bk.impl.g2_validate(data):
        raise MalformedPoint("bytes are not a prime-order G2 point")


@lru_cache(maxsize=None)
def setup_params() -> GroupParams:
    impl = _bk.impl
    return GroupParams(CURVE_ID, impl.g2_generator(), impl.g1_generator(), ORDER)


def keygen(rng: RandomSource | None = None) -> tuple[ProverKey, VerifierKey]:
    """Draw a ~ U[1, p-1] and return (a, g^a).

    Pass a seeded ``random.Random`` (or anything with ``randbytes``) for a
    reproducible key pair; the default source is the OS CSPRNG.
    """
    source = rng if rng is not None else _SystemRandom()
    while True:
        # 64 bytes keeps the modular bias below 2^-250
        a = int.from_bytes(source.randbytes(64), "big") % ORDER
        if a:
            break
    return ProverKey(a), derive_verifier_key(ProverKey(a))


def derive_verifier_key(key: ProverKey) -> VerifierKey:
    return VerifierKey(_bk.impl.g2_mul(setup_params().g, key.a))


def hash_identity(identifier: str) -> IdentityDigest:
    if not isinstance(identifier, str) or identifier == "":
        raise InvalidIdentifier("identifier must be a non-empty string")
    return IdentityDigest(hashlib.sha256(identifier.encode("utf-8")).digest())


def hash_to_point(digest: IdentityDigest, nonce: bytes | None = None, dst: bytes = PROOF_DST) -> bytes:
    return _bk.impl.hash_to_g1(digest.value + (nonce or b""), dst)


def generate_proof(key: ProverKey, digest: IdentityDigest, nonce: bytes | None = None) -> ProofBundle:
    h = hash_to_point(digest, nonce)
    return ProofBundle(_bk.impl.g1_mul(h, key.a), digest, nonce)


def verify_proof(proof: ProofBundle, verifier_key: VerifierKey, params: GroupParams | None = None) -> bool:
    """Check e(delta, g) == e(H(digest || nonce), v).

    Raises MalformedPoint when delta or v is not a valid element; returns
    False for a well-formed proof that does not satisfy the equation.
    """
    params = params or setup_params()
    _check_g1(proof.delta)
    _check_g2(verifier_key.v)
    h = hash_to_point(proof.digest, proof.nonce)
    impl = _bk.impl
    return impl.pairing_check([(proof.delta, params.g), (impl.g1_neg(h), verifier_key.v)])


def pair(p: bytes, q: bytes):
    """e(p, q) as a backend target-group element."""
    return _bk.impl.pairing(p, q)


# -- signatures over arbitrary messages (ledger endorsements reuse the scheme)

ENDORSE_DST = b"PLATOONZK-ENDORSE-V01-with-BLS12381G1_XMD:SHA-256_SSWU_RO_"


def sign(key: ProverKey, message: bytes, dst: bytes = ENDORSE_DST) -> bytes:
    return _bk.impl.g1_mul(_bk.impl.hash_to_g1(message, dst), key.a)


def verify_signature(signature: bytes, message: bytes, verifier_key: VerifierKey, dst: bytes = ENDORSE_DST) -> bool:
    """False for a malformed or non-matching signature; never raises on bad bytes."""
    if len(signature) != G1_BYTES:
        return False
    try:
        _check_g1(signature)
        _check_g2(verifier_key.v)
    except MalformedPoint:
        return False
    impl = _bk.impl
    h = impl.hash_to_g1(message, dst)
    return impl.pairing_check([(signature, setup_params().g), (impl.g1_neg(h), verifier_key.v)])


def serialize(obj: ProverKey | VerifierKey | ProofBundle) -> str:
    return obj.to_hex()


_KINDS = {"prover_key": ProverKey, "verifier_key": VerifierKey, "proof": ProofBundle}


def deserialize(kind: str, text: str):
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown kind {kind!r}") from None
    return cls.from_hex(text)
