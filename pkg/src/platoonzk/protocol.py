"""Join-request workflow for one platoon.

A prover submits a proof bound to the verifier group's current challenge;
each verifier checks it against the prover's on-ledger verifier key and
votes; the group admits the prover on a strict majority of the *full*
group size (silent verifiers count as False, ties reject).  A prover that
hears nothing within ``timeout_ms`` restarts with a fresh nonce, at most
``max_attempts`` times in total.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Protocol

from . import crypto, reputation
from .crypto import ProofBundle, ProverKey
from .errors import PlatoonError
from .ledger import LedgerError, PlatoonRecord, TxKind
from .reputation import ScoreTable, VerifierGroup

if TYPE_CHECKING:
    from .crypto import RandomSource, VerifierKey
    from .ledger import Ledger, Receipt

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_MS = 500
DEFAULT_MAX_ATTEMPTS = 3
_NONCE_TAG = b"platoonzk/join-nonce/v1"


class ProtocolError(PlatoonError):
    pass


class AlreadyMember(ProtocolError):
    pass


class NotAVerifier(ProtocolError):
    pass


class DuplicateVote(ProtocolError, ValueError):
    pass


class MaxAttemptsExceeded(ProtocolError):
    """Terminal: the prover gave up after the last allowed attempt."""


class VotingRule(str, Enum):
    STRICT_MAJORITY = "strict-majority"
    UNANIMOUS = "unanimous"


class LedgerView(Protocol):
    def verifier_key(self, truck_id: str) -> VerifierKey: ...

    def identity_digest(self, truck_id: str) -> bytes: ...


@dataclass(frozen=True)
class TruckIdentity:
    truck_id: str
    mac_address: str
    owner_company: str

    def __post_init__(self):
        if not self.mac_address:
            raise ValueError("mac_address must be non-empty")


@dataclass(frozen=True)
class JoinRequest:
    request_id: str
    join_id: str
    prover: str
    proof: ProofBundle
    submitted_at: int
    attempt: int
    deadline: int
    epoch: int
    verifiers: tuple[str, ...]

    @property
    def timeout_ms(self) -> int:
        return self.deadline - self.submitted_at


@dataclass(frozen=True)
class Vote:
    verifier: str
    request_id: str
    verdict: bool


@dataclass(frozen=True)
class VerificationResult:
    request_id: str
    approved: bool
    votes: tuple[Vote, ...]
    decided_at: int


@dataclass(frozen=True)
class ProtocolConfig:
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    verifier_group_k: int = reputation.DEFAULT_K
    rule: VotingRule = VotingRule.STRICT_MAJORITY
    approval_only_reputation: bool = False


@dataclass(frozen=True)
class PendingTx:
    kind: TxKind
    payload: dict
    submitter: str
    first_attempt_at: int
    reason: str = ""


@dataclass(frozen=True)
class PlatoonState:
    platoon_id: str
    members: tuple[str, ...]
    group: VerifierGroup
    scores: ScoreTable
    config: ProtocolConfig = field(default_factory=ProtocolConfig)
    route_tag: str = ""
    pending_records: tuple[PendingTx, ...] = ()

    @property
    def leader(self) -> str:
        return self.group.members[0]


def join_nonce(challenge: bytes, request_id: str) -> bytes:
    """Per-request nonce bound to the group's epoch challenge."""
    return hashlib.sha256(_NONCE_TAG + challenge + request_id.encode("utf-8")).digest()[: crypto.NONCE_BYTES]


def form_platoon(
    platoon_id: str,
    founders: Iterable[str],
    ledger: Ledger,
    *,
    config: ProtocolConfig = ProtocolConfig(),
    now: int = 0,
    route_tag: str = "",
    rng: RandomSource | None = None,
) -> PlatoonState:
    founders = tuple(founders)
    scores = ScoreTable().with_members(founders)
    group = reputation.select_verifier_group(founders, scores, config.verifier_group_k, rng=rng)
    state = PlatoonState(platoon_id, founders, group, scores, config, route_tag)
    record = PlatoonRecord(platoon_id, "form", founders, route_tag, now)
    return _submit_or_queue(state, ledger, TxKind.PLATOON, record.to_obj(), now)


def submit_join_request(
    prover: TruckIdentity,
    prover_key: ProverKey,
    platoon: PlatoonState,
    now: int,
    ledger: LedgerView,
    *,
    join_id: str | None = None,
    attempt: int = 1,
) -> JoinRequest:
    if prover.truck_id in platoon.members:
        raise AlreadyMember(f"{prover.truck_id} is already in platoon {platoon.platoon_id}")
    ledger.verifier_key(prover.truck_id)
    join_id = join_id or f"{prover.truck_id}@{now}"
    digest = crypto.hash_identity(prover.mac_address)
    return _make_request(prover.truck_id, prover_key, digest, platoon, now, join_id, attempt)


def _make_request(prover_id, prover_key, digest, platoon, now, join_id, attempt) -> JoinRequest:
    request_id = f"{join_id}#{attempt}"
    nonce = join_nonce(platoon.group.challenge, request_id)
    proof = crypto.generate_proof(prover_key, digest, nonce)
    return JoinRequest(
        request_id=request_id,
        join_id=join_id,
        prover=prover_id,
        proof=proof,
        submitted_at=now,
        attempt=attempt,
        deadline=now + platoon.config.timeout_ms,
        epoch=platoon.group.epoch,
        verifiers=platoon.group.members,
    )


def check_request(request: JoinRequest, platoon: PlatoonState, ledger: LedgerView) -> bool:
    """The honest verdict: fresh nonce, registered identity, valid pairing equation."""
    if request.proof.nonce != join_nonce(platoon.group.challenge, request.request_id):
        return False
    if request.proof.digest.value != ledger.identity_digest(request.prover):
        return False
    try:
        return crypto.verify_proof(request.proof, ledger.verifier_key(request.prover))
    except crypto.MalformedPoint:
        return False


def cast_vote(
    verifier: str,
    request: JoinRequest,
    ledger: LedgerView,
    platoon: PlatoonState,
    *,
    byzantine: bool = False,
) -> Vote:
    """``byzantine`` is a simulation fixture: the verdict is inverted."""
    if verifier not in platoon.group:
        raise NotAVerifier(f"{verifier} is not in verifier group epoch {platoon.group.epoch}")
    verdict = check_request(request, platoon, ledger)
    return Vote(verifier, request.request_id, verdict != byzantine)


def decide(votes: Iterable[Vote], group_size: int, rule: VotingRule = VotingRule.STRICT_MAJORITY) -> bool:
    votes = list(votes)
    voters = [v.verifier for v in votes]
    if len(set(voters)) != len(voters):
        raise DuplicateVote("more than one vote from the same verifier")
    if len(votes) > group_size:
        raise ValueError(f"{len(votes)} votes for a group of {group_size}")
    yes = sum(1 for v in votes if v.verdict)
    if rule is VotingRule.UNANIMOUS:
        return yes == group_size
    return 2 * yes > group_size


def tally(request: JoinRequest, votes: Iterable[Vote], platoon: PlatoonState, now: int) -> VerificationResult:
    accepted = tuple(sorted((v for v in votes if v.request_id == request.request_id), key=lambda v: v.verifier))
    for v in accepted:
        if v.verifier not in request.verifiers:
            raise NotAVerifier(f"vote from {v.verifier}, who was not addressed")
    approved = decide(accepted, len(request.verifiers), platoon.config.rule)
    return VerificationResult(request.request_id, approved, accepted, now)


def handle_timeout(
    request: JoinRequest,
    now: int,
    prover_key: ProverKey,
    platoon: PlatoonState,
    *,
    result_delivered: bool = False,
) -> JoinRequest:
    """Restart an unanswered request; returns ``request`` unchanged when not due."""
    if result_delivered or now < request.deadline:
        return request
    if request.attempt >= platoon.config.max_attempts:
        raise MaxAttemptsExceeded(f"{request.join_id} timed out after {request.attempt} attempts")
    return _make_request(
        request.prover, prover_key, request.proof.digest, platoon, now, request.join_id, request.attempt + 1
    )


def _submit_or_queue(state: PlatoonState, ledger: Ledger, kind: TxKind, payload: dict, now: int) -> PlatoonState:
    try:
        ledger.submit(kind, payload, state.leader, now)
    except LedgerError as exc:
        log.info("ledger submit deferred (%s): %s", kind.value, exc)
        pending = PendingTx(kind, payload, state.leader, now, type(exc).__name__)
        return replace(state, pending_records=state.pending_records + (pending,))
    return state


def retry_pending(platoon: PlatoonState, ledger: Ledger, now: int) -> PlatoonState:
    still = []
    for p in platoon.pending_records:
        try:
            ledger.submit(p.kind, p.payload, p.submitter, now)
        except LedgerError:
            still.append(p)
    return replace(platoon, pending_records=tuple(still))


def finalize(
    request: JoinRequest,
    result: VerificationResult,
    platoon: PlatoonState,
    ledger: Ledger,
    now: int,
    *,
    rng: RandomSource | None = None,
) -> PlatoonState:
    """Apply a decision: membership, platoon record, reputation, rotation."""
    if result.request_id != request.request_id:
        raise ValueError("result does not belong to this request")
    cfg = platoon.config
    state = platoon
    voting_group = platoon.group
    if result.approved and request.prover not in state.members:
        state = replace(state, members=state.members + (request.prover,))
        record = PlatoonRecord(state.platoon_id, "join", (request.prover,), state.route_tag, now)
        state = _submit_or_queue(state, ledger, TxKind.PLATOON, record.to_obj(), now)
    scores = reputation.update_scores(
        result, voting_group, state.scores.with_members(state.members), approval_only=cfg.approval_only_reputation
    )
    deltas = reputation.score_deltas(result, voting_group)
    if not result.approved and cfg.approval_only_reputation:
        deltas = {}
    group = reputation.select_verifier_group(state.members, scores, cfg.verifier_group_k, previous=voting_group, rng=rng)
    state = replace(state, scores=scores, group=group)
    if deltas:
        update = {
            "deltas": deltas,
            "epoch": group.epoch,
            "platoon_id": state.platoon_id,
            "request_id": result.request_id,
            "scores": scores.snapshot(),
        }
        state = _submit_or_queue(state, ledger, TxKind.REPUTATION, update, now)
    return state
