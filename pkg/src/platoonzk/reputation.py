"""Reputation bookkeeping and verifier-group rotation.

Each decided request moves every voting-group member by exactly one
point: +1 when its verdict matched the group decision, -1 otherwise
(silent verifiers are counted as having voted False).  The verifier group
is then re-drawn as the top-k platoon members by (score desc, id asc).
"""

from __future__ import annotations

import json
import secrets
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import TYPE_CHECKING, Iterable, Mapping

from .errors import PlatoonError

if TYPE_CHECKING:
    from .crypto import RandomSource
    from .protocol import VerificationResult

DEFAULT_K = 3
INITIAL_SCORE = 0
CHALLENGE_BYTES = 16


class ReputationError(PlatoonError):
    pass


class InsufficientMembers(ReputationError, ValueError):
    pass


class ResultAlreadyApplied(ReputationError):
    pass


@dataclass(frozen=True)
class VerifierGroup:
    members: tuple[str, ...]
    epoch: int
    challenge: bytes

    def __contains__(self, truck_id: str) -> bool:
        return truck_id in self.members

    @property
    def k(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class ScoreTable:
    """Immutable score map; ``applied`` records consumed request ids."""

    scores: Mapping[str, int] = field(default_factory=dict)
    applied: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "scores", MappingProxyType(dict(self.scores)))

    def __getitem__(self, truck_id: str) -> int:
        return self.scores.get(truck_id, INITIAL_SCORE)

    def with_members(self, truck_ids: Iterable[str]) -> ScoreTable:
        scores = dict(self.scores)
        for t in truck_ids:
            scores.setdefault(t, INITIAL_SCORE)
        return ScoreTable(scores, self.applied)

    def snapshot(self) -> dict[str, int]:
        return dict(sorted(self.scores.items()))


def score_deltas(result: VerificationResult, group: VerifierGroup) -> dict[str, int]:
    verdicts = {v.verifier: v.verdict for v in result.votes}
    return {m: (1 if verdicts.get(m, False) == result.approved else -1) for m in group.members}


def update_scores(
    result: VerificationResult,
    group: VerifierGroup,
    scores: ScoreTable,
    *,
    approval_only: bool = False,
) -> ScoreTable:
    """Apply the +/-1 rule for one decided request and return the new table.

    With ``approval_only`` the table is left untouched for rejected
    requests (the request id is still consumed).
    """
    if result.request_id in scores.applied:
        raise ResultAlreadyApplied(f"result for {result.request_id} already applied")
    new = dict(scores.scores)
    if result.approved or not approval_only:
        for member, delta in score_deltas(result, group).items():
            new[member] = new.get(member, INITIAL_SCORE) + delta
    return ScoreTable(new, scores.applied | {result.request_id})


def rank(members: Iterable[str], scores: ScoreTable) -> list[str]:
    return sorted(members, key=lambda t: (-scores[t], t))


def select_verifier_group(
    platoon_members: Iterable[str],
    scores: ScoreTable,
    k: int = DEFAULT_K,
    *,
    previous: VerifierGroup | None = None,
    rng: RandomSource | None = None,
) -> VerifierGroup:
    members = list(platoon_members)
    if k < 1:
        raise ValueError("verifier group size must be at least 1")
    if len(members) < k:
        raise InsufficientMembers(f"platoon has {len(members)} members, need {k}")
    if len(set(members)) != len(members):
        raise ValueError("duplicate platoon member ids")
    epoch = 0 if previous is None else previous.epoch + 1
    challenge = rng.randbytes(CHALLENGE_BYTES) if rng is not None else secrets.token_bytes(CHALLENGE_BYTES)
    return VerifierGroup(tuple(rank(members, scores)[:k]), epoch, challenge)


def snapshot_line(group: VerifierGroup, scores: ScoreTable, sim_time: int) -> str:
    """One structured-text line per epoch: group, challenge and all scores."""
    return json.dumps(
        {
            "t": sim_time,
            "epoch": group.epoch,
            "group": list(group.members),
            "challenge": group.challenge.hex(),
            "scores": scores.snapshot(),
        },
        sort_keys=True,
        separators=(",", ":"),
    )
