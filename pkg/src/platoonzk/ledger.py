"""Simplified permissioned ledger with k-of-any endorsement.

Flow per transaction: build -> endorse by k distinct live peers (each
peer signs the canonical transaction bytes with its own BLS key) ->
sequencer validates endorsements and queues the transaction -> a block is
cut after ``block_max_tx`` transactions or ``block_timeout_ms`` since
the first queued one, whichever comes first.

Blocks are hash-chained: ``block_hash = SHA256(height_u64be || prev_hash ||
canonical_json(txs))``.  The genesis block links to SHA-256 of the journal
header, so peers and policy are covered by the chain as well.

Journal format (UTF-8, one canonical JSON object per line)::

    {"format":"platoonzk-ledger/1","issuer":...,"companies":[...],"peers":[{"id":..,"vk":..}],"policy_k":..}
    {"block_hash":..,"height":0,"prev_hash":..,"txs":[]}
    {"block_hash":..,"height":1,"prev_hash":..,"txs":[{"endorsements":[{"peer":..,"sig":..}],"kind":..,"payload":..,"submitter":..,"tx_id":..}]}
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

from . import crypto
from .crypto import ProverKey, VerifierKey
from .errors import PlatoonError
from .textio import canonical_bytes, canonical_json, is_hex

log = logging.getLogger(__name__)

JOURNAL_FORMAT = "platoonzk-ledger/1"
DEFAULT_ISSUER = "issuer"
PLATOON_EVENTS = ("join", "leave", "form", "dissolve")


class LedgerError(PlatoonError):
    pass


class DuplicateKey(LedgerError):
    pass


class EndorsementShortfall(LedgerError):
    pass


class InvalidEndorsement(LedgerError):
    pass


class ValidationFailure(LedgerError, ValueError):
    pass


class UnknownPeer(LedgerError):
    pass


class PeerUnavailable(LedgerError):
    pass


class PermissionDenied(LedgerError):
    pass


class UnknownParticipant(LedgerError):
    pass


class AccessDenied(LedgerError):
    pass


class MissingVerifierKey(LedgerError, KeyError):
    pass


class JournalError(LedgerError):
    pass


class TxKind(str, Enum):
    VERIFIER_KEY = "VerifierKeyRecord"
    REPUTATION = "ReputationUpdate"
    PLATOON = "PlatoonRecord"


@dataclass(frozen=True)
class EndorsementPolicy:
    k: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("endorsement policy needs k >= 1")

    @property
    def label(self) -> str:
        return f"{self.k}-of-any"


@dataclass(frozen=True)
class Endorsement:
    peer_id: str
    signature: bytes

    def to_obj(self) -> dict:
        return {"peer": self.peer_id, "sig": self.signature.hex()}


@dataclass(frozen=True)
class Transaction:
    tx_id: str
    kind: TxKind
    payload: bytes
    submitter: str
    endorsements: tuple[Endorsement, ...] = ()

    def signing_bytes(self) -> bytes:
        return canonical_bytes(
            {"kind": self.kind.value, "payload": self.payload.decode("utf-8"), "submitter": self.submitter, "tx_id": self.tx_id}
        )

    def payload_obj(self):
        return json.loads(self.payload)

    def with_endorsements(self, endorsements: Iterable[Endorsement]) -> Transaction:
        return Transaction(self.tx_id, self.kind, self.payload, self.submitter, tuple(endorsements))

    def to_obj(self) -> dict:
        return {
            "endorsements": [e.to_obj() for e in self.endorsements],
            "kind": self.kind.value,
            "payload": self.payload.decode("utf-8"),
            "submitter": self.submitter,
            "tx_id": self.tx_id,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> Transaction:
        ends = tuple(Endorsement(e["peer"], bytes.fromhex(e["sig"])) for e in obj["endorsements"])
        return cls(obj["tx_id"], TxKind(obj["kind"]), obj["payload"].encode("utf-8"), obj["submitter"], ends)


@dataclass(frozen=True)
class LedgerBlock:
    height: int
    prev_hash: bytes
    txs: tuple[Transaction, ...]
    block_hash: bytes

    @staticmethod
    def compute_hash(height: int, prev_hash: bytes, txs: Iterable[Transaction]) -> bytes:
        body = canonical_bytes([tx.to_obj() for tx in txs])
        return hashlib.sha256(height.to_bytes(8, "big") + prev_hash + body).digest()

    @classmethod
    def build(cls, height: int, prev_hash: bytes, txs: Iterable[Transaction]) -> LedgerBlock:
        txs = tuple(txs)
        return cls(height, prev_hash, txs, cls.compute_hash(height, prev_hash, txs))

    def hash_ok(self) -> bool:
        return self.compute_hash(self.height, self.prev_hash, self.txs) == self.block_hash

    def to_line(self) -> str:
        return canonical_json(
            {
                "block_hash": self.block_hash.hex(),
                "height": self.height,
                "prev_hash": self.prev_hash.hex(),
                "txs": [tx.to_obj() for tx in self.txs],
            }
        )

    @classmethod
    def from_line(cls, line: str) -> LedgerBlock:
        obj = json.loads(line)
        return cls(
            obj["height"],
            bytes.fromhex(obj["prev_hash"]),
            tuple(Transaction.from_obj(t) for t in obj["txs"]),
            bytes.fromhex(obj["block_hash"]),
        )


@dataclass(frozen=True)
class PlatoonRecord:
    platoon_id: str
    event: str
    member_list: tuple[str, ...]
    route_tag: str
    sim_timestamp: int

    def to_obj(self) -> dict:
        return {
            "event": self.event,
            "member_list": list(self.member_list),
            "platoon_id": self.platoon_id,
            "route_tag": self.route_tag,
            "sim_timestamp": self.sim_timestamp,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> PlatoonRecord:
        return cls(obj["platoon_id"], obj["event"], tuple(obj["member_list"]), obj["route_tag"], obj["sim_timestamp"])


@dataclass
class Receipt:
    tx_id: str
    height: int
    submitted_at: float
    committed_at: float | None = None


@dataclass
class EndorsingPeer:
    peer_id: str
    verifier_key: VerifierKey
    key: ProverKey | None = field(default=None, repr=False)
    live: bool = True


def make_peers(n: int, seed: int | str = 0) -> list[EndorsingPeer]:
    """Deterministic peer identities; one independent key stream per peer."""
    peers = []
    for i in range(n):
        rng = random.Random(f"platoonzk-peer:{seed}:{i}")
        sk, vk = crypto.keygen(rng)
        peers.append(EndorsingPeer(f"peer{i}", vk, sk))
    return peers


# -- payload schemas -----------------------------------------------------------


def _expect(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationFailure(msg)


def _check_fields(obj, fields: dict) -> None:
    _expect(isinstance(obj, dict), "payload must be a JSON object")
    _expect(set(obj) == set(fields), f"payload fields must be exactly {sorted(fields)}")
    for name, typ in fields.items():
        value = obj[name]
        ok = isinstance(value, typ) and not (typ is int and isinstance(value, bool))
        _expect(ok, f"field {name!r} must be {typ.__name__}")


def validate_payload(kind: TxKind, payload: bytes) -> dict:
    try:
        obj = json.loads(payload)
    except (ValueError, UnicodeDecodeError):
        raise ValidationFailure("payload is not JSON") from None
    _expect(canonical_bytes(obj) == payload, "payload is not in canonical form")
    if kind is TxKind.VERIFIER_KEY:
        _check_fields(obj, {"truck_id": str, "verifier_key": str, "owner": str, "identity_digest": str})
        _expect(obj["truck_id"] != "" and obj["owner"] != "", "truck_id and owner must be non-empty")
        _expect(is_hex(obj["identity_digest"], 64), "identity_digest must be 64 lowercase hex chars")
        try:
            VerifierKey.from_hex(obj["verifier_key"])
        except crypto.DecodeError as exc:
            raise ValidationFailure(f"verifier_key: {exc}") from None
    elif kind is TxKind.REPUTATION:
        _check_fields(obj, {"platoon_id": str, "request_id": str, "epoch": int, "deltas": dict, "scores": dict})
        _expect(all(d in (-1, 1) for d in obj["deltas"].values()), "deltas must be +1 or -1")
        _expect(all(isinstance(s, int) for s in obj["scores"].values()), "scores must be integers")
    elif kind is TxKind.PLATOON:
        _check_fields(
            obj, {"platoon_id": str, "event": str, "member_list": list, "route_tag": str, "sim_timestamp": int}
        )
        _expect(obj["event"] in PLATOON_EVENTS, f"event must be one of {PLATOON_EVENTS}")
        _expect(all(isinstance(m, str) for m in obj["member_list"]), "member ids must be strings")
        if obj["event"] in ("join", "form"):
            _expect(len(obj["member_list"]) > 0, "join/form records need members")
        _expect(obj["sim_timestamp"] >= 0, "sim_timestamp must be non-negative")
    return obj


# -- chain verification ---------------------------------------------------------


def verify_chain(blocks: list[LedgerBlock], genesis_prev: bytes | None = None) -> bool:
    """True iff heights run 0..n-1, every hash recomputes and every link holds."""
    for i, block in enumerate(blocks):
        if block.height != i or not block.hash_ok():
            return False
        if i == 0:
            if genesis_prev is not None and block.prev_hash != genesis_prev:
                return False
        elif block.prev_hash != blocks[i - 1].block_hash:
            return False
    return True


def first_invalid_height(blocks: list[LedgerBlock], genesis_prev: bytes | None = None) -> int | None:
    for n in range(1, len(blocks) + 1):
        if not verify_chain(blocks[:n], genesis_prev):
            return n - 1
    return None


def verify_journal(text: str | bytes) -> bool:
    """Strict check of a serialized journal; any non-canonical byte fails it."""
    try:
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if len(lines) < 2:
            return False
        header = json.loads(lines[0])
        if canonical_json(header) != lines[0] or header.get("format") != JOURNAL_FORMAT:
            return False
        blocks = []
        for line in lines[1:]:
            block = LedgerBlock.from_line(line)
            if block.to_line() != line:
                return False
            blocks.append(block)
    except (ValueError, KeyError, TypeError, AttributeError):
        return False
    return verify_chain(blocks, hashlib.sha256(lines[0].encode("utf-8")).digest())


# -- the ledger -----------------------------------------------------------------


class Ledger:
    def __init__(
        self,
        peers: list[EndorsingPeer],
        policy: EndorsementPolicy = EndorsementPolicy(1),
        *,
        issuer: str = DEFAULT_ISSUER,
        companies: Iterable[str] = (),
        block_max_tx: int = 10,
        block_timeout_ms: float = 100,
    ):
        if policy.k > len(peers):
            raise ValueError(f"policy {policy.label} needs at least {policy.k} peers, have {len(peers)}")
        if len({p.peer_id for p in peers}) != len(peers):
            raise ValueError("duplicate peer ids")
        self.peers = {p.peer_id: p for p in peers}
        self.policy = policy
        self.issuer = issuer
        self.companies = set(companies)
        self.block_max_tx = block_max_tx
        self.block_timeout_ms = block_timeout_ms
        self.endorse_fail = False
        self._lock = threading.RLock()
        self._tx_seq = 0
        self.blocks: list[LedgerBlock] = []
        self._block_lines: list[str] = []
        self.pending: list[Transaction] = []
        self.pending_since: float | None = None
        self.receipts: dict[str, Receipt] = {}
        # state derived from committed blocks
        self.keys: dict[str, VerifierKey] = {}
        self.digests: dict[str, bytes] = {}
        self.owners: dict[str, str] = {}
        self.records: list[PlatoonRecord] = []
        self.reputation_log: list[dict] = []
        self._pending_key_ids: set[str] = set()
        self.header_line = canonical_json(
            {
                "companies": sorted(self.companies),
                "format": JOURNAL_FORMAT,
                "issuer": issuer,
                "peers": [{"id": p.peer_id, "vk": p.verifier_key.to_hex()} for p in peers],
                "policy_k": policy.k,
            }
        )
        self._commit_block(())

    # -- chain ---------------------------------------------------------------

    @property
    def genesis_prev(self) -> bytes:
        return hashlib.sha256(self.header_line.encode("utf-8")).digest()

    @property
    def height(self) -> int:
        return len(self.blocks) - 1

    def block_bytes(self, height: int) -> bytes:
        return self._block_lines[height].encode("utf-8")

    def journal_text(self) -> str:
        return "\n".join([self.header_line, *self._block_lines]) + "\n"

    def write_journal(self, path: str | Path) -> None:
        Path(path).write_text(self.journal_text(), encoding="utf-8")

    def verify_chain(self) -> bool:
        return verify_chain(self.blocks, self.genesis_prev)

    def _commit_block(self, txs, now=None) -> LedgerBlock:
        prev = self.blocks[-1].block_hash if self.blocks else self.genesis_prev
        block = LedgerBlock.build(len(self.blocks), prev, txs)
        self.blocks.append(block)
        self._block_lines.append(block.to_line())
        for tx in block.txs:
            self._apply(tx)
            receipt = self.receipts.get(tx.tx_id)
            if receipt is not None:
                receipt.committed_at = now
        return block

    def _apply(self, tx: Transaction) -> None:
        obj = tx.payload_obj()
        if tx.kind is TxKind.VERIFIER_KEY:
            truck = obj["truck_id"]
            self.keys[truck] = VerifierKey(bytes.fromhex(obj["verifier_key"]))
            self.digests[truck] = bytes.fromhex(obj["identity_digest"])
            self.owners[truck] = obj["owner"]
            self.companies.add(obj["owner"])
            self._pending_key_ids.discard(truck)
        elif tx.kind is TxKind.PLATOON:
            self.records.append(PlatoonRecord.from_obj(obj))
        else:
            self.reputation_log.append(obj)

    # -- endorsement -----------------------------------------------------------

    def new_transaction(self, kind: TxKind, payload: dict, submitter: str) -> Transaction:
        body = canonical_bytes(payload)
        with self._lock:
            self._tx_seq += 1
            seq = self._tx_seq
        tx_id = hashlib.sha256(f"{seq}|{kind.value}|{submitter}|".encode() + body).hexdigest()[:32]
        return Transaction(tx_id, kind, body, submitter)

    def endorse(self, tx: Transaction, peer_id: str) -> Endorsement:
        peer = self.peers.get(peer_id)
        if peer is None:
            raise UnknownPeer(f"unknown endorsing peer {peer_id!r}")
        if not peer.live:
            raise PeerUnavailable(f"peer {peer_id} is down")
        if self.endorse_fail:
            raise PeerUnavailable(f"peer {peer_id} failed to endorse (injected fault)")
        if peer.key is None:
            raise PeerUnavailable(f"no signing key loaded for peer {peer_id}")
        validate_payload(tx.kind, tx.payload)
        return Endorsement(peer_id, crypto.sign(peer.key, tx.signing_bytes()))

    def gather_endorsements(self, tx: Transaction, policy: EndorsementPolicy | None = None) -> Transaction:
        """Ask live peers in id order until k endorsements are collected."""
        policy = policy or self.policy
        validate_payload(tx.kind, tx.payload)
        collected = []
        for peer_id in sorted(self.peers):
            if len(collected) == policy.k:
                break
            try:
                collected.append(self.endorse(tx, peer_id))
            except PeerUnavailable as exc:
                log.debug("endorsement skipped: %s", exc)
        if len(collected) < policy.k:
            raise EndorsementShortfall(f"{policy.label}: only {len(collected)} endorsements for {tx.tx_id}")
        return tx.with_endorsements(collected)

    def valid_endorsers(self, tx: Transaction) -> set[str]:
        """Distinct peers with a valid signature; raises on any bad one."""
        message = tx.signing_bytes()
        good = set()
        for e in tx.endorsements:
            peer = self.peers.get(e.peer_id)
            if peer is None or not crypto.verify_signature(e.signature, message, peer.verifier_key):
                raise InvalidEndorsement(f"bad endorsement by {e.peer_id!r} on {tx.tx_id}")
            good.add(e.peer_id)
        return good

    # -- commit path -------------------------------------------------------------

    def append_transaction(self, tx: Transaction, now: float = 0, policy: EndorsementPolicy | None = None) -> Receipt:
        policy = policy or self.policy
        validate_payload(tx.kind, tx.payload)
        endorsers = self.valid_endorsers(tx)
        if len(endorsers) < policy.k:
            raise EndorsementShortfall(f"{policy.label}: {len(endorsers)} distinct endorsers on {tx.tx_id}")
        with self._lock:
            if tx.tx_id in self.receipts:
                raise ValidationFailure(f"transaction {tx.tx_id} already submitted")
            if tx.kind is TxKind.VERIFIER_KEY:
                truck = tx.payload_obj()["truck_id"]
                if truck in self.keys or truck in self._pending_key_ids:
                    raise DuplicateKey(f"verifier key for {truck} already registered")
                self._pending_key_ids.add(truck)
            if not self.pending:
                self.pending_since = now
            self.pending.append(tx)
            receipt = Receipt(tx.tx_id, len(self.blocks), now)
            self.receipts[tx.tx_id] = receipt
            if len(self.pending) >= self.block_max_tx:
                self.cut_block(now)
        return receipt

    def submit(self, kind: TxKind, payload: dict, submitter: str, now: float = 0) -> Receipt:
        tx = self.gather_endorsements(self.new_transaction(kind, payload, submitter))
        return self.append_transaction(tx, now)

    def next_cut_time(self) -> float | None:
        if not self.pending:
            return None
        return self.pending_since + self.block_timeout_ms

    def tick(self, now: float) -> LedgerBlock | None:
        """Cut a block when the batch timeout has elapsed."""
        with self._lock:
            due = self.next_cut_time()
            if due is not None and now >= due:
                return self.cut_block(now)
        return None

    def cut_block(self, now: float = 0) -> LedgerBlock | None:
        with self._lock:
            if not self.pending:
                return None
            txs, self.pending, self.pending_since = self.pending, [], None
            return self._commit_block(txs, now)

    flush = cut_block

    # -- domain operations ---------------------------------------------------------

    def register_verifier_key(
        self,
        truck_id: str,
        verifier_key: VerifierKey,
        owner: str,
        identity_digest: crypto.IdentityDigest,
        *,
        submitter: str | None = None,
        now: float = 0,
        policy: EndorsementPolicy | None = None,
    ) -> Receipt:
        submitter = submitter or self.issuer
        if submitter != self.issuer:
            raise PermissionDenied(f"{submitter!r} is not the permission issuer")
        if truck_id in self.keys or truck_id in self._pending_key_ids:
            raise DuplicateKey(f"verifier key for {truck_id} already registered")
        payload = {
            "identity_digest": identity_digest.hex(),
            "owner": owner,
            "truck_id": truck_id,
            "verifier_key": verifier_key.to_hex(),
        }
        tx = self.gather_endorsements(self.new_transaction(TxKind.VERIFIER_KEY, payload, submitter), policy)
        return self.append_transaction(tx, now, policy)

    def verifier_key(self, truck_id: str) -> VerifierKey:
        try:
            return self.keys[truck_id]
        except KeyError:
            raise MissingVerifierKey(f"no verifier key on ledger for {truck_id}") from None

    def identity_digest(self, truck_id: str) -> bytes:
        try:
            return self.digests[truck_id]
        except KeyError:
            raise MissingVerifierKey(f"no identity record on ledger for {truck_id}") from None

    def submit_platoon_record(self, record: PlatoonRecord, submitter: str, now: float = 0) -> Receipt:
        return self.submit(TxKind.PLATOON, record.to_obj(), submitter, now)

    def query_platoon_history(self, querier: str, truck_id: str | None = None) -> list[PlatoonRecord]:
        """Committed records visible to ``querier``, ordered by sim_timestamp.

        Companies see records that involve trucks they own; a truck sees
        only its own.  Naming a truck outside that scope is access-denied.
        """
        if querier in self.companies:
            scope = {t for t, owner in self.owners.items() if owner == querier}
        elif querier in self.keys:
            scope = {querier}
        else:
            raise UnknownParticipant(f"unknown participant {querier!r}")
        if truck_id is not None:
            if truck_id not in scope:
                raise AccessDenied(f"{querier} may not read history of {truck_id}")
            scope = {truck_id}
        hits = [r for r in self.records if scope.intersection(r.member_list)]
        return sorted(hits, key=lambda r: r.sim_timestamp)

    def audit_endorsements(self) -> bool:
        """Every committed transaction carries >= policy.k distinct valid endorsers."""
        for block in self.blocks:
            for tx in block.txs:
                try:
                    if len(self.valid_endorsers(tx)) < self.policy.k:
                        return False
                except InvalidEndorsement:
                    return False
        return True

    # -- persistence -----------------------------------------------------------------

    @classmethod
    def from_journal(
        cls, text: str, peer_keys: dict[str, ProverKey] | None = None, **kwargs
    ) -> Ledger:
        """Rebuild a ledger by replaying a journal; signing keys are optional."""
        if not verify_journal(text):
            raise JournalError("journal fails integrity verification")
        lines = text.rstrip("\n").split("\n")
        header = json.loads(lines[0])
        peer_keys = peer_keys or {}
        peers = []
        for entry in header["peers"]:
            vk = VerifierKey.from_hex(entry["vk"])
            sk = peer_keys.get(entry["id"])
            if sk is not None and crypto.derive_verifier_key(sk) != vk:
                raise JournalError(f"signing key does not match journal for {entry['id']}")
            peers.append(EndorsingPeer(entry["id"], vk, sk))
        ledger = cls(
            peers,
            EndorsementPolicy(header["policy_k"]),
            issuer=header["issuer"],
            companies=header["companies"],
            **kwargs,
        )
        if ledger.header_line != lines[0] or ledger._block_lines[0] != lines[1]:
            raise JournalError("journal header or genesis block is not canonical")
        for line in lines[2:]:
            block = LedgerBlock.from_line(line)
            for tx in block.txs:
                validate_payload(tx.kind, tx.payload)
                if len(ledger.valid_endorsers(tx)) < ledger.policy.k:
                    raise JournalError(f"transaction {tx.tx_id} lacks endorsements")
            ledger.blocks.append(block)
            ledger._block_lines.append(line)
            for tx in block.txs:
                ledger._apply(tx)
        ledger._tx_seq = sum(len(b.txs) for b in ledger.blocks)
        return ledger

    @classmethod
    def load_journal(cls, path: str | Path, peer_keys=None, **kwargs) -> Ledger:
        return cls.from_journal(Path(path).read_text(encoding="utf-8"), peer_keys, **kwargs)
