"""The twelve acceptance criteria, each at its stated size and tolerance.

Every test appends one ``[criterion N] PASS|FAIL ...`` line, printed in the
terminal summary, and then asserts.
"""

import itertools
import random
import time

import pytest

from conftest import ACCEPTANCE_LINES
from platoonzk import backend, bench, crypto
from platoonzk.crypto import MalformedPoint, ProofBundle
from platoonzk.ledger import (
    Endorsement,
    EndorsementPolicy,
    EndorsementShortfall,
    Ledger,
    PlatoonRecord,
    TxKind,
    make_peers,
    verify_journal,
)
from platoonzk.protocol import VerificationResult, Vote, decide
from platoonzk.reputation import ScoreTable, VerifierGroup, select_verifier_group, update_scores
from platoonzk.simnet import PRESETS, run_scenario

pytestmark = pytest.mark.slow


def report(n, ok, detail):
    line = f"[criterion {n}] {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def random_identifier(rng):
    return ":".join(f"{b:02X}" for b in rng.randbytes(6))


def test_1_completeness():
    rng = random.Random(101)
    t0 = time.monotonic()
    good = 0
    for _ in range(1000):
        sk, vk = crypto.keygen(rng)
        proof = crypto.generate_proof(sk, crypto.hash_identity(random_identifier(rng)), rng.randbytes(16))
        good += crypto.verify_proof(proof, vk)
    elapsed = time.monotonic() - t0
    ok = good == 1000 and elapsed < 600
    assert report(1, ok, f"completeness {good}/1000 in {elapsed:.1f} s (backend {backend.name()}, budget 600 s)")


def test_2_bilinearity():
    rng = random.Random(202)
    params = crypto.setup_params()
    impl = backend.impl
    base = crypto.pair(params.g1, params.g)
    held = 0
    for _ in range(100):
        # random base points x, y and exponents a, b
        x = impl.g1_mul(params.g1, rng.randrange(1, crypto.ORDER))
        y = impl.g2_mul(params.g, rng.randrange(1, crypto.ORDER))
        a, b = rng.randrange(1, crypto.ORDER), rng.randrange(1, crypto.ORDER)
        lhs = crypto.pair(impl.g1_mul(x, a), impl.g2_mul(y, b))
        held += lhs == crypto.pair(x, y) ** (a * b)
    ok = held == 100 and not base.is_one()
    assert report(2, ok, f"bilinearity {held}/100 exact in the target group")


def test_3_soundness_sampling():
    rng = random.Random(303)
    sk, vk = crypto.keygen(rng)
    proof = crypto.generate_proof(sk, crypto.hash_identity(random_identifier(rng)), rng.randbytes(16))
    raw = bytes.fromhex(proof.to_hex())
    mutation_accepts = 0
    for _ in range(100):
        mutated = bytearray(raw)
        mutated[rng.randrange(len(raw))] ^= rng.randrange(1, 256)
        try:
            mutation_accepts += crypto.verify_proof(ProofBundle.from_hex(mutated.hex()), vk)
        except MalformedPoint:
            pass  # rejected at decoding
    cross_accepts = 0
    for _ in range(100):
        sk_a, _ = crypto.keygen(rng)
        _, vk_b = crypto.keygen(rng)
        p = crypto.generate_proof(sk_a, crypto.hash_identity(random_identifier(rng)), rng.randbytes(16))
        cross_accepts += crypto.verify_proof(p, vk_b)
    ok = mutation_accepts == 0 and cross_accepts == 0
    assert report(3, ok, f"false accepts: {mutation_accepts}/100 mutations, {cross_accepts}/100 cross-key")


def test_4_voting_oracle():
    cases = mismatches = 0
    for n in range(1, 8):
        for bits in itertools.product([True, False], repeat=n):
            votes = [Vote(f"V{i}", "r", b) for i, b in enumerate(bits)]
            oracle = 2 * sum(bits) > n
            cases += 1
            mismatches += decide(votes, n) != oracle
    ok = mismatches == 0 and cases == 254
    assert report(4, ok, f"decide vs brute-force majority: {cases - mismatches}/{cases} vectors agree")


def test_5_reputation_oracle():
    members = [f"T{i}" for i in range(1, 6)]
    group = VerifierGroup(tuple(members), 0, bytes(16))
    base = ScoreTable({"T1": 2, "T3": -1})
    update_cases = update_bad = 0
    for bits in itertools.product([True, False], repeat=5):
        for approved in (True, False):
            votes = tuple(Vote(m, "r", b) for m, b in zip(members, bits))
            new = update_scores(VerificationResult("r", approved, votes, 0), group, base)
            expect = {m: base[m] + (1 if b == approved else -1) for m, b in zip(members, bits)}
            update_cases += 1
            update_bad += any(new[m] != expect[m] for m in members)

    rng = random.Random(505)
    sort_bad = 0
    for _ in range(100):
        n = rng.randint(1, 15)
        ids = rng.sample([f"T{i:02d}" for i in range(50)], n)
        scores = ScoreTable({t: rng.randint(-5, 5) for t in ids})
        k = rng.randint(1, n)
        expect = sorted(ids, key=lambda t: (-scores[t], t))[:k]
        sort_bad += list(select_verifier_group(ids, scores, k, rng=rng).members) != expect
    ok = update_bad == 0 and update_cases == 64 and sort_bad == 0
    assert report(
        5, ok, f"update_scores {update_cases - update_bad}/64 vectors, selection {100 - sort_bad}/100 tables"
    )


def _ten_block_ledger():
    peers = make_peers(3, "acceptance")
    led = Ledger(peers, EndorsementPolicy(2), companies=["C1", "C2"], block_max_tx=3)
    rng = random.Random(606)
    for i in range(27):
        rec = PlatoonRecord("P1", "join", (f"T{i:02d}",), "route-1", 1000 * i)
        led.submit_platoon_record(rec, "T00", now=i)
    assert led.height == 9 and len(led.blocks) == 10
    return led, rng


def test_6_tamper_evidence():
    led, rng = _ten_block_ledger()
    journal = led.journal_text().encode()
    untouched = verify_journal(journal) and led.verify_chain()
    caught = 0
    for _ in range(50):
        mutated = bytearray(journal)
        pos = rng.randrange(len(journal) - 1)  # the final newline is framing, not ledger content
        mutated[pos] ^= 1 << rng.randrange(8)
        caught += not verify_journal(bytes(mutated))
    ok = untouched and caught == 50
    assert report(6, ok, f"untouched ledger verifies={untouched}; {caught}/50 single-bit mutations detected")


def test_7_endorsement_gate():
    peers = make_peers(3, "gate")
    led = Ledger(peers, EndorsementPolicy(2))
    payload = PlatoonRecord("P1", "join", ("T01",), "route-1", 0).to_obj()
    outcomes = []

    tx = led.new_transaction(TxKind.PLATOON, payload, "T01")
    try:
        led.append_transaction(tx.with_endorsements([led.endorse(tx, "peer0")]))
        outcomes.append(("k-1 endorsements", "committed"))
    except EndorsementShortfall:
        outcomes.append(("k-1 endorsements", "rejected"))

    tx = led.new_transaction(TxKind.PLATOON, payload, "T02")
    receipt = led.append_transaction(tx.with_endorsements([led.endorse(tx, "peer0"), led.endorse(tx, "peer2")]))
    led.flush()
    committed = led.receipts[receipt.tx_id].committed_at is not None
    outcomes.append(("k distinct", "committed" if committed else "rejected"))

    tx = led.new_transaction(TxKind.PLATOON, payload, "T03")
    e = led.endorse(tx, "peer1")
    try:
        led.append_transaction(tx.with_endorsements([e, Endorsement(e.peer_id, e.signature)]))
        outcomes.append(("duplicate endorser", "committed"))
    except EndorsementShortfall:
        outcomes.append(("duplicate endorser", "rejected"))

    expected = [("k-1 endorsements", "rejected"), ("k distinct", "committed"), ("duplicate endorser", "rejected")]
    ok = outcomes == expected
    assert report(7, ok, "2-of-any: " + ", ".join(f"{c} -> {o}" for c, o in outcomes))


def _fmt(reports, attr):
    return " >= ".join(f"{r.policy} {getattr(r, attr):.1f}" for r in reports)


def test_8_throughput_trend():
    reports = bench.bench_throughput([1, 2, 3], bench.LoadSpec(step_s=0.5), rounds=3)
    means = [r.tps_avg for r in reports]
    ok = means[0] >= means[1] >= means[2] and all(r.n_rounds == 3 for r in reports)
    ref = bench.REFERENCE["throughput_peak_tps"]
    assert report(8, ok, f"mean tps {_fmt(reports, 'tps_avg')} (reference only: {ref})")


def test_9_latency_trend():
    reports = bench.bench_latency([1, 2, 3], bench.LoadSpec(), rounds=3)
    means = [r.latency_avg_ms for r in reports]
    ok = means[0] <= means[1] <= means[2] and all(r.n_rounds == 3 for r in reports)
    detail = " <= ".join(f"{r.policy} {r.latency_avg_ms:.1f} ms" for r in reports)
    assert report(9, ok, f"mean latency {detail}")


def test_10_crypto_timing_order():
    runs = [bench.bench_crypto(100, seed=1000 + i) for i in range(3)]
    verify_slower = sum(t.verify_avg_ms > t.prove_avg_ms for t in runs)
    under_second = all(t.prove_avg_ms < 1000 and t.verify_avg_ms < 1000 for t in runs)
    ok = verify_slower >= 2 and under_second
    shown = ", ".join(f"{t.prove_avg_ms:.2f}/{t.verify_avg_ms:.2f}" for t in runs)
    assert report(10, ok, f"prove/verify ms per run {shown}; verify slower on {verify_slower}/3 (reference 29/210)")


def test_11_baseline_scenario():
    cfg = PRESETS["baseline"]
    t0 = time.monotonic()
    first = run_scenario(cfg)
    elapsed = time.monotonic() - t0
    second = run_scenario(cfg)
    honest = [t for _, t in cfg.schedule()]
    approved = all(first.outcomes.get(t) == "approved" for t in honest)
    counts = first.approvals == first.join_records() and first.consistent()
    same = (first.trace.to_text() == second.trace.to_text()
            and first.ledger.journal_text() == second.ledger.journal_text())
    ok = cfg.n_trucks == 8 and cfg.n_companies == 2 and approved and counts and same and elapsed < 60
    assert report(
        11, ok,
        f"{first.approvals}/{len(honest)} honest joins approved, {first.join_records()} join records, "
        f"byte-identical rerun={same}, {elapsed:.2f} s",
    )


def _exclusion_point(run, truck):
    decided = 0
    for e in run.trace:
        if e.kind == "decide":
            decided += 1
        if e.kind == "epoch" and decided and truck not in e.payload["group"]:
            return decided
    return None


def test_12_byzantine_exclusion():
    cfg = PRESETS["byzantine"]
    (bad,) = cfg.byzantine_set
    k = cfg.verifier_group_k
    honest = [t for t in cfg.founders if t != bad]
    first = run_scenario(cfg)
    second = run_scenario(cfg)
    initially_in = bad in first.trace.of_kind("epoch")[0].payload["group"]
    after = _exclusion_point(first, bad)
    deterministic = first.trace.to_text() == second.trace.to_text()
    ok = len(honest) >= k and initially_in and after is not None and after <= 2 * k and deterministic
    assert report(12, ok, f"{bad} rotated out after {after} decided requests (bound 2k = {2 * k}), "
                          f"deterministic={deterministic}")
