import hashlib
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platoonzk import backend, crypto
from platoonzk.crypto import (
    DecodeError,
    IdentityDigest,
    InvalidIdentifier,
    MalformedPoint,
    ProofBundle,
    ProverKey,
    VerifierKey,
)

from py_ecc.bls.hash_to_curve import hash_to_G1 as ref_hash_to_G1
from py_ecc.bls.point_compression import compress_G1, compress_G2
from py_ecc.optimized_bls12_381 import G2 as REF_G2
from py_ecc.optimized_bls12_381 import FQ12, multiply, neg, pairing as ref_pairing

MAC = "00:A0:C9:14:C8:29"
# sha256sum of the ASCII string, computed outside Python
MAC_DIGEST = "b04a8866050d017d7a655946cd19e4363c399dbe454f1235b2c0f992a9665a31"

identifiers = st.text(min_size=1, max_size=40)


def keypair(seed):
    return crypto.keygen(random.Random(seed))


class TestIdentity:
    def test_sha256_vectors(self):
        assert crypto.hash_identity("abc").hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        assert crypto.hash_identity(MAC).hex() == MAC_DIGEST

    @pytest.mark.parametrize("bad", ["", None, b"bytes", 7])
    def test_rejects_empty_or_non_text(self, bad):
        with pytest.raises(InvalidIdentifier):
            crypto.hash_identity(bad)

    def test_digest_length_enforced(self):
        with pytest.raises(ValueError):
            IdentityDigest(b"\x00" * 31)


class TestKeys:
    def test_keygen_is_seed_reproducible(self):
        assert keypair(1) == keypair(1)
        assert keypair(1) != keypair(2)

    def test_verifier_key_matches_reference(self):
        sk, vk = keypair(42)
        z1, z2 = compress_G2(multiply(REF_G2, sk.a))
        assert vk.v == z1.to_bytes(48, "big") + z2.to_bytes(48, "big")

    def test_prover_key_range(self):
        with pytest.raises(ValueError):
            ProverKey(0)
        with pytest.raises(ValueError):
            ProverKey(crypto.ORDER)
        ProverKey(crypto.ORDER - 1)

    def test_keygen_resamples_zero(self):
        class Zeros:
            calls = 0

            def randbytes(self, n):
                Zeros.calls += 1
                return bytes(n) if Zeros.calls == 1 else bytes(n - 1) + b"\x05"

        sk, _ = crypto.keygen(Zeros())
        assert sk.a == 5 and Zeros.calls == 2

    def test_params(self):
        params = crypto.setup_params()
        assert params.curve_id == "BLS12-381"
        assert params.order_p == crypto.ORDER
        assert params.serialize().startswith("BLS12-381:73eda753")


class TestProofs:
    def test_proof_matches_reference_computation(self):
        sk, _ = keypair(7)
        digest = crypto.hash_identity(MAC)
        nonce = bytes(range(16))
        proof = crypto.generate_proof(sk, digest, nonce)
        h = ref_hash_to_G1(digest.value + nonce, crypto.PROOF_DST, hashlib.sha256)
        assert proof.delta == compress_G1(multiply(h, sk.a)).to_bytes(48, "big")

    def test_reference_pairing_agrees_on_verdicts(self):
        # e(delta, g) == e(h, v) evaluated entirely by the reference library
        sk, vk = keypair(8)
        other, _ = keypair(9)
        digest = crypto.hash_identity(MAC)
        h = ref_hash_to_G1(digest.value, crypto.PROOF_DST, hashlib.sha256)
        v = multiply(REF_G2, sk.a)
        good = multiply(h, sk.a)
        wrong = multiply(h, other.a)
        assert ref_pairing(REF_G2, good) == ref_pairing(v, h)
        assert ref_pairing(REF_G2, wrong) != ref_pairing(v, h)
        assert crypto.verify_proof(crypto.generate_proof(sk, digest), vk)
        assert not crypto.verify_proof(crypto.generate_proof(other, digest), vk)
        assert ref_pairing(neg(REF_G2), good) * ref_pairing(v, h) == FQ12.one()

    @settings(max_examples=15)
    @given(st.integers(min_value=0, max_value=2**32), identifiers, st.none() | st.binary(min_size=16, max_size=16))
    def test_completeness(self, seed, ident, nonce):
        sk, vk = keypair(seed)
        proof = crypto.generate_proof(sk, crypto.hash_identity(ident), nonce)
        assert crypto.verify_proof(proof, vk)

    def test_completeness_both_backends(self, any_backend):
        sk, vk = keypair(3)
        proof = crypto.generate_proof(sk, crypto.hash_identity(MAC), b"\x01" * 16)
        assert crypto.verify_proof(proof, vk)

    def test_cross_key_rejected(self, any_backend):
        sk, _ = keypair(10)
        _, other_vk = keypair(11)
        assert not crypto.verify_proof(crypto.generate_proof(sk, crypto.hash_identity(MAC)), other_vk)

    def test_wrong_identifier_rejected(self):
        sk, vk = keypair(12)
        proof = crypto.generate_proof(sk, crypto.hash_identity(MAC))
        forged = ProofBundle(proof.delta, crypto.hash_identity("00:A0:C9:14:C8:2A"))
        assert not crypto.verify_proof(forged, vk)

    def test_nonce_binding(self):
        sk, vk = keypair(13)
        proof = crypto.generate_proof(sk, crypto.hash_identity(MAC), b"\x00" * 16)
        replayed = ProofBundle(proof.delta, proof.digest, b"\x01" * 16)
        assert not crypto.verify_proof(replayed, vk)
        assert not crypto.verify_proof(ProofBundle(proof.delta, proof.digest), vk)

    def test_single_byte_mutations_never_accept(self):
        sk, vk = keypair(14)
        proof = crypto.generate_proof(sk, crypto.hash_identity(MAC), b"\x02" * 16)
        raw = bytes.fromhex(proof.to_hex())
        rng = random.Random(0)
        for _ in range(20):
            i = rng.randrange(len(raw))
            mutated = bytearray(raw)
            mutated[i] ^= rng.randrange(1, 256)
            try:
                assert not crypto.verify_proof(ProofBundle.from_hex(mutated.hex()), vk)
            except MalformedPoint:
                pass

    def test_identity_point_rejected(self):
        _, vk = keypair(15)
        inf = bytes([0xC0]) + bytes(47)
        with pytest.raises(MalformedPoint):
            crypto.verify_proof(ProofBundle(inf, crypto.hash_identity(MAC)), vk)
        with pytest.raises(MalformedPoint):
            VerifierKey.from_hex((bytes([0xC0]) + bytes(95)).hex())


class TestEncoding:
    def test_round_trips(self):
        sk, vk = keypair(20)
        proof = crypto.generate_proof(sk, crypto.hash_identity(MAC), b"\x03" * 16)
        assert crypto.deserialize("prover_key", crypto.serialize(sk)) == sk
        assert crypto.deserialize("verifier_key", crypto.serialize(vk)) == vk
        assert crypto.deserialize("proof", crypto.serialize(proof)) == proof
        assert len(proof.to_hex()) == 192
        assert len(ProofBundle(proof.delta, proof.digest).to_hex()) == 160

    @pytest.mark.parametrize(
        "kind,text",
        [
            ("verifier_key", "zz" * 96),
            ("verifier_key", "00" * 95),
            ("proof", "00" * 81),
            ("prover_key", "00" * 32),
            ("prover_key", "ff" * 32),
        ],
    )
    def test_malformed_inputs(self, kind, text):
        with pytest.raises(DecodeError):
            crypto.deserialize(kind, text)

    def test_uppercase_hex_rejected(self):
        _, vk = keypair(21)
        with pytest.raises(DecodeError):
            VerifierKey.from_hex(vk.to_hex().upper())

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            crypto.deserialize("token", "00")


class TestBilinearity:
    def test_pairing_bilinear(self, any_backend):
        rng = random.Random(30)
        params = crypto.setup_params()
        impl = backend.impl
        a, b = rng.randrange(1, crypto.ORDER), rng.randrange(1, crypto.ORDER)
        lhs = crypto.pair(impl.g1_mul(params.g1, a), impl.g2_mul(params.g, b))
        assert lhs == crypto.pair(params.g1, params.g) ** (a * b)

    def test_not_degenerate(self):
        params = crypto.setup_params()
        assert not crypto.pair(params.g1, params.g).is_one()


class TestSignatures:
    def test_sign_verify(self, any_backend):
        sk, vk = keypair(40)
        sig = crypto.sign(sk, b"message")
        assert crypto.verify_signature(sig, b"message", vk)
        assert not crypto.verify_signature(sig, b"massage", vk)
        assert not crypto.verify_signature(sig, b"message", keypair(41)[1])

    def test_domain_separated_from_proofs(self):
        sk, vk = keypair(42)
        digest = crypto.hash_identity(MAC)
        proof = crypto.generate_proof(sk, digest)
        assert not crypto.verify_signature(proof.delta, digest.value, vk)

    @given(st.binary(max_size=60))
    def test_garbage_never_raises(self, junk):
        _, vk = keypair(43)
        assert crypto.verify_signature(junk, b"m", vk) is False
