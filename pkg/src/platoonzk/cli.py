"""Command-line entry point: ``platoonzk <verb> [options]``.

Every artifact is JSON text.  Key files hold both halves of a key pair
(``prover_key`` and ``verifier_key``); proof files hold one ``proof`` hex
string.  ``verify`` exits 0 for a valid proof, 1 for an invalid one and 2
for malformed input.  Scenario configs are looked up as a path, then in
``$PLATOONZK_CONFIG_DIR``, then among the shipped configs and presets.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from . import backend, bench, crypto, simnet
from .errors import PlatoonError
from .ledger import EndorsementPolicy, Ledger, LedgerError, make_peers

CONFIG_DIR_ENV = "PLATOONZK_CONFIG_DIR"
KEY_FORMAT = "platoonzk-key/1"
PROOF_FORMAT = "platoonzk-proof/1"

EXIT_OK, EXIT_FAIL, EXIT_MALFORMED = 0, 1, 2


class Malformed(PlatoonError):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _read_json(path: str) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        raise Malformed(f"cannot read {path}: {exc}") from None
    except ValueError:
        raise Malformed(f"{path} is not valid JSON") from None
    if not isinstance(obj, dict):
        raise Malformed(f"{path} must hold a JSON object")
    return obj


def _field(obj: dict, name: str, path: str) -> str:
    value = obj.get(name)
    if not isinstance(value, str):
        raise Malformed(f"{path} has no {name!r} field")
    return value


def _load_prover_key(path: str) -> crypto.ProverKey:
    try:
        return crypto.ProverKey.from_hex(_field(_read_json(path), "prover_key", path))
    except crypto.DecodeError as exc:
        raise Malformed(f"{path}: {exc}") from None


def _load_verifier_key(path: str) -> crypto.VerifierKey:
    try:
        return crypto.VerifierKey.from_hex(_field(_read_json(path), "verifier_key", path))
    except crypto.DecodeError as exc:
        raise Malformed(f"{path}: {exc}") from None


def _peer_keys(n: int, seed) -> dict:
    return {p.peer_id: p.key for p in make_peers(n, seed)}


# -- verbs ----------------------------------------------------------------------


def cmd_keygen(args) -> int:
    rng = random.Random(args.seed) if args.seed is not None else None
    sk, vk = crypto.keygen(rng)
    _emit(_dump({"format": KEY_FORMAT, "prover_key": sk.to_hex(), "verifier_key": vk.to_hex()}), args.out)
    if args.public_out:
        Path(args.public_out).write_text(_dump({"format": KEY_FORMAT, "verifier_key": vk.to_hex()}))
    return EXIT_OK


def cmd_prove(args) -> int:
    sk = _load_prover_key(args.key)
    nonce = None
    if args.nonce is not None:
        try:
            nonce = bytes.fromhex(args.nonce)
        except ValueError:
            raise Malformed("nonce must be hex") from None
        if len(nonce) != crypto.NONCE_BYTES:
            raise Malformed(f"nonce must be {crypto.NONCE_BYTES} bytes")
    proof = crypto.generate_proof(sk, crypto.hash_identity(args.id), nonce)
    _emit(_dump({"format": PROOF_FORMAT, "identity_digest": proof.digest.hex(), "proof": proof.to_hex()}), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    vk = _load_verifier_key(args.key)
    try:
        proof = crypto.ProofBundle.from_hex(_field(_read_json(args.proof), "proof", args.proof))
    except crypto.DecodeError as exc:
        raise Malformed(f"{args.proof}: {exc}") from None
    ok = crypto.verify_proof(proof, vk)
    if ok and args.id is not None:
        ok = proof.digest == crypto.hash_identity(args.id)
    print("valid" if ok else "invalid")
    return EXIT_OK if ok else EXIT_FAIL


def _open_ledger(args, create: bool) -> Ledger:
    path = Path(args.ledger)
    if path.exists():
        header = json.loads(path.read_text(encoding="utf-8").split("\n", 1)[0])
        keys = _peer_keys(len(header["peers"]), args.peer_seed)
        return Ledger.load_journal(path, keys)
    if not create:
        raise LedgerError(f"no ledger journal at {path}")
    companies = [c for c in (args.companies or "").split(",") if c]
    return Ledger(make_peers(args.peers, args.peer_seed), EndorsementPolicy(args.policy), companies=companies)


def cmd_register_key(args) -> int:
    ledger = _open_ledger(args, create=True)
    vk = _load_verifier_key(args.key)
    receipt = ledger.register_verifier_key(args.truck, vk, args.owner, crypto.hash_identity(args.id))
    ledger.flush()
    ledger.write_journal(args.ledger)
    print(json.dumps({"truck_id": args.truck, "tx_id": receipt.tx_id, "height": ledger.height}, sort_keys=True))
    return EXIT_OK


def _resolve_config(name: str) -> simnet.ScenarioConfig:
    candidates = [Path(name)]
    env_dir = os.environ.get(CONFIG_DIR_ENV)
    if env_dir:
        candidates += [Path(env_dir) / name, Path(env_dir) / f"{name}.json"]
    shipped = resources.files("platoonzk") / "configs"
    candidates += [shipped / name, shipped / f"{name}.json"]
    for c in candidates:
        if c.is_file():
            return simnet.ScenarioConfig.from_json(c.read_text(encoding="utf-8"))
    if name in simnet.PRESETS:
        return simnet.PRESETS[name]
    raise simnet.ConfigError(f"no scenario config {name!r} (looked for a file, in ${CONFIG_DIR_ENV}, and presets)")


def cmd_run_scenario(args) -> int:
    cfg = _resolve_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    run = simnet.run_scenario(cfg)
    if args.trace:
        run.trace.write(args.trace)
    if args.journal:
        run.ledger.write_journal(args.journal)
    print(json.dumps(run.summary(), sort_keys=True))
    return EXIT_OK if run.consistent() else EXIT_FAIL


def cmd_ledger_inspect(args) -> int:
    text = Path(args.ledger).read_text(encoding="utf-8")
    try:
        ledger = Ledger.from_journal(text)
    except (LedgerError, ValueError, KeyError) as exc:
        print(json.dumps({"chain_ok": False, "error": str(exc)}, sort_keys=True))
        return EXIT_FAIL
    if args.height is not None:
        if not 0 <= args.height <= ledger.height:
            raise LedgerError(f"height {args.height} outside 0..{ledger.height}")
        print(ledger.block_bytes(args.height).decode("utf-8"))
        return EXIT_OK
    kinds: dict[str, int] = {}
    for block in ledger.blocks:
        for tx in block.txs:
            kinds[tx.kind.value] = kinds.get(tx.kind.value, 0) + 1
    info = {
        "chain_ok": ledger.verify_chain(),
        "endorsements_ok": ledger.audit_endorsements(),
        "height": ledger.height,
        "policy": ledger.policy.label,
        "peers": sorted(ledger.peers),
        "tx_counts": kinds,
        "trucks": sorted(ledger.keys),
        "head": ledger.blocks[-1].block_hash.hex(),
    }
    print(_dump(info), end="")
    return EXIT_OK


def cmd_query_history(args) -> int:
    ledger = Ledger.load_journal(args.ledger)
    for record in ledger.query_platoon_history(args.querier, args.truck):
        print(json.dumps(record.to_obj(), sort_keys=True))
    return EXIT_OK


def _load_spec(args) -> bench.LoadSpec:
    kw = {"seed": args.seed if args.seed is not None else 0, "n_peers": args.peers}
    for name in ("step_s", "start_tps", "max_tps", "latency_tps", "latency_tx"):
        value = getattr(args, name, None)
        if value is not None:
            kw[name] = value
    return bench.LoadSpec(**kw)


def _policies(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("policies must be a comma-separated list of integers") from None


def _bench_ledger(fn, args) -> int:
    load = _load_spec(args)
    reports = fn(args.policies, load, args.rounds, crypto_iterations=args.crypto_iterations)
    if args.out:
        bench.write_report(args.out, reports, load)
    for r in reports:
        print(
            f"{r.policy}: tps min/avg/max {r.tps_min:.1f}/{r.tps_avg:.1f}/{r.tps_max:.1f}  "
            f"latency ms min/avg/max {r.latency_min_ms:.1f}/{r.latency_avg_ms:.1f}/{r.latency_max_ms:.1f}"
        )
    return EXIT_OK


def cmd_bench_throughput(args) -> int:
    return _bench_ledger(bench.bench_throughput, args)


def cmd_bench_latency(args) -> int:
    return _bench_ledger(bench.bench_latency, args)


def cmd_bench_crypto(args) -> int:
    runs = []
    for i in range(args.runs):
        seed = None if args.seed is None else args.seed + i
        runs.append(bench.bench_crypto(args.iterations, seed=seed)._asdict())
    doc = {"backend": backend.name(), "hardware_note": bench.hardware_note(), "iterations": args.iterations,
           "reference_ms": bench.REFERENCE["crypto_ms"], "runs": runs}
    _emit(_dump(doc), args.out)
    return EXIT_OK


def cmd_bench_backends(args) -> int:
    _emit(_dump(bench.bench_backends(args.iterations, seed=args.seed or 0)), args.out)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="platoonzk", description=__doc__.split("\n")[0])
    parser.add_argument("--backend", choices=["native", "python"], help="force a curve backend")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True, metavar="verb")

    p = sub.add_parser("keygen", help="generate a prover/verifier key pair")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="key file (default: stdout)")
    p.add_argument("--public-out", help="also write a verifier-key-only file")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("prove", help="prove knowledge of a key over an identifier")
    p.add_argument("--key", required=True)
    p.add_argument("--id", required=True, help="identifier, e.g. a MAC address")
    p.add_argument("--nonce", help="16-byte challenge nonce as hex")
    p.add_argument("--out")
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("verify", help="check a proof; exit 0 valid, 1 invalid, 2 malformed")
    p.add_argument("--key", required=True, help="key file holding verifier_key")
    p.add_argument("--proof", required=True)
    p.add_argument("--id", help="also require the proof to cover this identifier")
    p.set_defaults(func=cmd_verify)

    def ledger_args(p, creating=False):
        p.add_argument("--ledger", required=True, help="journal file")
        p.add_argument("--peer-seed", default="0", help="seed the endorsing peer keys derive from")
        if creating:
            p.add_argument("--peers", type=int, default=3, help="endorsing peers for a new ledger")
            p.add_argument("--policy", type=int, default=1, help="k of k-of-any for a new ledger")
            p.add_argument("--companies", help="comma-separated company ids for a new ledger")

    p = sub.add_parser("register-key", help="record a truck's verifier key on the ledger (issuer role)")
    ledger_args(p, creating=True)
    p.add_argument("--truck", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--owner", required=True)
    p.add_argument("--id", required=True, help="identifier whose digest is recorded")
    p.set_defaults(func=cmd_register_key)

    p = sub.add_parser("run-scenario", help="run a simulated scenario")
    p.add_argument("--config", default="baseline", help="config file, name in the config dir, or preset")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--trace", help="write the event trace here")
    p.add_argument("--journal", help="write the ledger journal here")
    p.set_defaults(func=cmd_run_scenario)

    p = sub.add_parser("ledger-inspect", help="verify a journal and summarize it")
    p.add_argument("--ledger", required=True)
    p.add_argument("--height", type=int, help="print one block instead")
    p.set_defaults(func=cmd_ledger_inspect)

    p = sub.add_parser("query-history", help="platoon records visible to a company or truck")
    p.add_argument("--ledger", required=True)
    p.add_argument("--as", dest="querier", required=True)
    p.add_argument("--truck")
    p.set_defaults(func=cmd_query_history)

    for verb, func in (("bench-throughput", cmd_bench_throughput), ("bench-latency", cmd_bench_latency)):
        p = sub.add_parser(verb, help=f"{verb.split('-')[1]} per endorsement policy")
        p.add_argument("--policies", type=_policies, default=[1, 2, 3], help="e.g. 1,2,3")
        p.add_argument("--rounds", type=int, default=3)
        p.add_argument("--peers", type=int, default=3)
        p.add_argument("--seed", type=int)
        p.add_argument("--crypto-iterations", type=int, default=0, help="also time proofs (0 = skip)")
        p.add_argument("--out", help="JSON report path")
        if verb == "bench-throughput":
            p.add_argument("--step-s", type=float, help="seconds per sweep step")
            p.add_argument("--start-tps", type=float)
            p.add_argument("--max-tps", type=float)
        else:
            p.add_argument("--rate", dest="latency_tps", type=float, help="offered tx/s")
            p.add_argument("--tx", dest="latency_tx", type=int, help="transactions per round")
        p.set_defaults(func=func)

    p = sub.add_parser("bench-crypto", help="time proof generation and verification")
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench_crypto)

    p = sub.add_parser("bench-backends", help="compare the native and pure-Python backends")
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench_backends)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.backend:
            with backend.use(args.backend):
                return args.func(args)
        return args.func(args)
    except Malformed as exc:
        print(f"platoonzk: malformed input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except (PlatoonError, ValueError, OSError, KeyError) as exc:
        print(f"platoonzk: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
