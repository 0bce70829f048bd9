"""Wall-clock benchmarks of the ledger commit path and of the proof primitives.

Pipeline per measurement::

    generator thread --(open-loop, constant rate)--> endorsement pool
        (one task per transaction, peers sign concurrently across txs)
    --> sequencer thread (validates endorsements, queues, cuts blocks)

Submit timestamps are written only by the generator and commit timestamps
only by the sequencer; both are read after the pipeline has drained, so
the bookkeeping never contends with the measured work.

Throughput is the plateau of an upward rate sweep: each step offers
``rate`` tx/s for ``step_s`` seconds, measures committed tx / (last commit
- first submit), and the sweep stops once the measured rate falls below
``saturation`` x offered or stops improving.  Latency is measured at a
fixed offered rate as per-transaction submit-to-commit wall time.
"""

from __future__ import annotations

import concurrent.futures
import json
import logging
import os
import platform
import queue
import random
import statistics
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

from . import backend, crypto
from .ledger import EndorsementPolicy, Ledger, LedgerError, TxKind, make_peers

log = logging.getLogger(__name__)

MIN_ROUNDS = 3
MIN_CRYPTO_ITERATIONS = 100
REFERENCE = {
    "throughput_peak_tps": {"1-of-any": 27, "2-of-any": 17, "3-of-any": 15},
    "crypto_ms": {"prove": 29, "verify": 210},
    "note": "reference values only; hardware-dependent and never asserted",
}


class BenchError(ValueError):
    pass


def _clock_ms() -> float:
    return time.monotonic() * 1000.0


@dataclass(frozen=True)
class LoadSpec:
    n_peers: int = 3
    start_tps: float = 25.0
    growth: float = 2.0
    max_tps: float = 3200.0
    step_s: float = 1.0
    saturation: float = 0.9
    latency_tps: float = 50.0
    latency_tx: int = 100
    block_max_tx: int = 10
    block_timeout_ms: float = 100.0
    endorse_workers: int = 3
    seed: int = 0

    def validate(self, policies: list[int] | None = None) -> LoadSpec:
        if self.n_peers < 1 or self.endorse_workers < 1 or self.block_max_tx < 1:
            raise BenchError("n_peers, endorse_workers and block_max_tx must be >= 1")
        if self.start_tps < 0 or self.latency_tps < 0 or self.latency_tx < 0 or self.step_s <= 0:
            raise BenchError("rates and counts must be non-negative, step_s positive")
        if self.growth <= 1 or not 0 < self.saturation <= 1:
            raise BenchError("growth must exceed 1 and saturation lie in (0, 1]")
        for k in policies or ():
            if not 1 <= k <= self.n_peers:
                raise BenchError(f"{k}-of-any needs {k} peers, load has {self.n_peers}")
        return self


@dataclass
class RoundSample:
    round: int
    offered_tps: float
    tps: float
    n_tx: int
    latency_min_ms: float
    latency_avg_ms: float
    latency_max_ms: float


@dataclass
class BenchmarkReport:
    policy: str
    k: int
    metric: str
    tps_min: float
    tps_avg: float
    tps_max: float
    latency_min_ms: float
    latency_avg_ms: float
    latency_max_ms: float
    crypto_prove_avg_ms: float | None
    crypto_verify_avg_ms: float | None
    n_rounds: int
    hardware_note: str
    backend: str
    rounds: list[RoundSample] = field(default_factory=list)

    def to_obj(self) -> dict:
        return asdict(self)


class CryptoTiming(NamedTuple):
    prove_avg_ms: float
    verify_avg_ms: float


def hardware_note() -> str:
    return (
        f"{platform.system()} {platform.machine()}, {os.cpu_count()} cpu, "
        f"python {platform.python_version()}, backend {backend.name()}"
    )


# -- the pipeline ---------------------------------------------------------------


class _Pipeline:
    _STOP = object()

    def __init__(self, ledger: Ledger, workers: int):
        self.ledger = ledger
        self.pool = concurrent.futures.ThreadPoolExecutor(max_workers=workers, thread_name_prefix="endorse")
        self.to_sequencer: queue.Queue = queue.Queue()
        self.submitted: dict[str, float] = {}
        self.failures = 0
        self.sequencer = threading.Thread(target=self._sequence, name="sequencer", daemon=True)
        self.sequencer.start()

    def _endorse(self, tx) -> None:
        try:
            self.to_sequencer.put(self.ledger.gather_endorsements(tx))
        except LedgerError as exc:
            log.warning("endorsement failed: %s", exc)
            self.to_sequencer.put(None)

    def _sequence(self) -> None:
        while True:
            due = self.ledger.next_cut_time()
            wait = None if due is None else max(0.0, (due - _clock_ms()) / 1000.0)
            try:
                item = self.to_sequencer.get(timeout=wait)
            except queue.Empty:
                self.ledger.tick(_clock_ms())
                continue
            if item is self._STOP:
                self.ledger.cut_block(_clock_ms())
                return
            if item is None:
                self.failures += 1
                continue
            self.ledger.append_transaction(item, _clock_ms())
            self.ledger.tick(_clock_ms())

    def offer(self, rate: float, n: int, tag: str) -> None:
        """Open-loop: transaction i is released at t0 + i/rate regardless of backlog."""
        t0 = time.monotonic()
        for i in range(n):
            delay = t0 + i / rate - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            payload = {
                "event": "join",
                "member_list": [f"{tag}-{i}"],
                "platoon_id": f"bench-{tag}",
                "route_tag": "bench",
                "sim_timestamp": i,
            }
            tx = self.ledger.new_transaction(TxKind.PLATOON, payload, "bench")
            self.submitted[tx.tx_id] = _clock_ms()
            self.pool.submit(self._endorse, tx)

    def drain(self) -> None:
        self.pool.shutdown(wait=True)
        self.to_sequencer.put(self._STOP)
        self.sequencer.join()

    def measurements(self) -> tuple[float, list[float]]:
        """(commit rate, per-tx latencies in ms) over everything offered so far."""
        lat, commits = [], []
        for tx_id, t_sub in self.submitted.items():
            r = self.ledger.receipts.get(tx_id)
            if r is not None and r.committed_at is not None:
                lat.append(r.committed_at - t_sub)
                commits.append(r.committed_at)
        if not commits:
            return 0.0, lat
        span_s = (max(commits) - min(self.submitted.values())) / 1000.0
        return (len(commits) / span_s if span_s > 0 else float(len(commits))), lat


def _fresh_ledger(k: int, load: LoadSpec, round_no: int) -> Ledger:
    peers = make_peers(load.n_peers, f"bench:{load.seed}:{round_no}")
    return Ledger(
        peers, EndorsementPolicy(k), block_max_tx=load.block_max_tx, block_timeout_ms=load.block_timeout_ms
    )


def _run_step(k: int, load: LoadSpec, round_no: int, rate: float, n: int) -> tuple[float, list[float]]:
    if rate <= 0 or n <= 0:
        return 0.0, []
    pipe = _Pipeline(_fresh_ledger(k, load, round_no), load.endorse_workers)
    pipe.offer(rate, n, f"k{k}r{round_no}")
    pipe.drain()
    return pipe.measurements()


def _stats(values: list[float]) -> tuple[float, float, float]:
    if not values:
        return 0.0, 0.0, 0.0
    return min(values), statistics.fmean(values), max(values)


def _sweep(k: int, load: LoadSpec, round_no: int) -> RoundSample:
    rate, best, best_lat, offered = load.start_tps, 0.0, [], 0.0
    while 0 < rate <= load.max_tps:
        measured, lat = _run_step(k, load, round_no, rate, max(1, round(rate * load.step_s)))
        log.info("k=%d round %d offered %.0f tps -> %.1f tps", k, round_no, rate, measured)
        improved = measured > best * 1.05
        if measured > best:
            best, best_lat, offered = measured, lat, rate
        if measured < load.saturation * rate or not improved:
            break
        rate *= load.growth
    lo, avg, hi = _stats(best_lat)
    return RoundSample(round_no, offered, best, len(best_lat), lo, avg, hi)


def _fixed_rate(k: int, load: LoadSpec, round_no: int) -> RoundSample:
    measured, lat = _run_step(k, load, round_no, load.latency_tps, load.latency_tx)
    lo, avg, hi = _stats(lat)
    return RoundSample(round_no, load.latency_tps, measured, len(lat), lo, avg, hi)


def _aggregate(k: int, metric: str, samples: list[RoundSample], crypto_t: CryptoTiming | None, pooled: bool) -> BenchmarkReport:
    tps_lo, tps_avg, tps_hi = _stats([s.tps for s in samples])
    if pooled:
        # latency families: extremes over all transactions, mean weighted by tx count
        n = sum(s.n_tx for s in samples)
        lat_avg = sum(s.latency_avg_ms * s.n_tx for s in samples) / n if n else 0.0
        live = [s for s in samples if s.n_tx]
        lat_lo = min((s.latency_min_ms for s in live), default=0.0)
        lat_hi = max((s.latency_max_ms for s in live), default=0.0)
    else:
        lat_lo, lat_avg, lat_hi = _stats([s.latency_avg_ms for s in samples])
    return BenchmarkReport(
        policy=EndorsementPolicy(k).label,
        k=k,
        metric=metric,
        tps_min=tps_lo,
        tps_avg=tps_avg,
        tps_max=tps_hi,
        latency_min_ms=lat_lo,
        latency_avg_ms=lat_avg,
        latency_max_ms=lat_hi,
        crypto_prove_avg_ms=None if crypto_t is None else crypto_t.prove_avg_ms,
        crypto_verify_avg_ms=None if crypto_t is None else crypto_t.verify_avg_ms,
        n_rounds=len(samples),
        hardware_note=hardware_note(),
        backend=backend.name(),
        rounds=samples,
    )


def _check(policy_list, load, rounds) -> LoadSpec:
    if rounds < MIN_ROUNDS:
        raise BenchError(f"need at least {MIN_ROUNDS} rounds, got {rounds}")
    if not policy_list:
        raise BenchError("no policies given")
    return (load or LoadSpec()).validate(list(policy_list))


def bench_throughput(
    policy_list: list[int], load_spec: LoadSpec | None = None, rounds: int = MIN_ROUNDS, *, crypto_iterations: int = 0
) -> list[BenchmarkReport]:
    """Peak commit rate per policy; rounds are interleaved across policies to spread drift."""
    load = _check(policy_list, load_spec, rounds)
    samples: dict[int, list[RoundSample]] = {k: [] for k in policy_list}
    for r in range(rounds):
        for k in policy_list:
            samples[k].append(_sweep(k, load, r))
    timing = bench_crypto(crypto_iterations) if crypto_iterations else None
    return [_aggregate(k, "throughput", samples[k], timing, pooled=False) for k in policy_list]


def bench_latency(
    policy_list: list[int], load_spec: LoadSpec | None = None, rounds: int = MIN_ROUNDS, *, crypto_iterations: int = 0
) -> list[BenchmarkReport]:
    """Submit-to-commit wall time at a fixed offered rate."""
    load = _check(policy_list, load_spec, rounds)
    samples: dict[int, list[RoundSample]] = {k: [] for k in policy_list}
    for r in range(rounds):
        for k in policy_list:
            samples[k].append(_fixed_rate(k, load, r))
    timing = bench_crypto(crypto_iterations) if crypto_iterations else None
    return [_aggregate(k, "latency", samples[k], timing, pooled=True) for k in policy_list]


# -- crypto ---------------------------------------------------------------------------


def bench_crypto(n_iterations: int = MIN_CRYPTO_ITERATIONS, *, seed: int | None = None) -> CryptoTiming:
    """Mean wall time of proof generation and verification over fresh inputs.

    Each iteration draws a new key pair and a new random identifier;
    generation covers hashing the identifier and computing the proof,
    verification covers point validation and the pairing check.
    """
    if n_iterations < MIN_CRYPTO_ITERATIONS:
        raise BenchError(f"bench_crypto needs at least {MIN_CRYPTO_ITERATIONS} iterations, got {n_iterations}")
    rng = random.Random(seed) if seed is not None else random.Random()
    prove_ns = verify_ns = 0
    for _ in range(n_iterations):
        sk, vk = crypto.keygen(rng)
        ident = ":".join(f"{b:02X}" for b in rng.randbytes(6))
        nonce = rng.randbytes(crypto.NONCE_BYTES)
        t0 = time.perf_counter_ns()
        proof = crypto.generate_proof(sk, crypto.hash_identity(ident), nonce)
        t1 = time.perf_counter_ns()
        ok = crypto.verify_proof(proof, vk)
        t2 = time.perf_counter_ns()
        if not ok:
            raise AssertionError("benchmark proof failed to verify")
        prove_ns += t1 - t0
        verify_ns += t2 - t1
    return CryptoTiming(prove_ns / n_iterations / 1e6, verify_ns / n_iterations / 1e6)


def bench_backends(n_iterations: int = MIN_CRYPTO_ITERATIONS, *, seed: int = 0) -> dict:
    """Same crypto workload under every importable backend."""
    out = {}
    for name in ("native", "python"):
        if name not in backend.available():
            out[name] = None
            continue
        with backend.use(name):
            t0 = time.perf_counter()
            timing = bench_crypto(n_iterations, seed=seed)
            out[name] = {**timing._asdict(), "wall_s": time.perf_counter() - t0}
    if out.get("native") and out.get("python"):
        out["speedup_verify"] = out["python"]["verify_avg_ms"] / out["native"]["verify_avg_ms"]
        out["speedup_prove"] = out["python"]["prove_avg_ms"] / out["native"]["prove_avg_ms"]
    return out


# -- reports ------------------------------------------------------------------------------


def report_document(reports: list[BenchmarkReport], load_spec: LoadSpec | None = None) -> dict:
    return {
        "format": "platoonzk-bench/1",
        "hardware_note": hardware_note(),
        "load_spec": asdict(load_spec or LoadSpec()),
        "reference": REFERENCE,
        "summary": [r.to_obj() for r in reports],
    }


def write_report(path: str | Path, reports: list[BenchmarkReport], load_spec: LoadSpec | None = None) -> None:
    Path(path).write_text(json.dumps(report_document(reports, load_spec), indent=2, sort_keys=True) + "\n")
