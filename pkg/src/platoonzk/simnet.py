"""Deterministic discrete-event simulation of one platoon.

Virtual time is integer milliseconds.  Every random draw comes from a
per-entity stream (``random.Random`` seeded with ``"<seed>:<entity>"``) so
adding or removing an entity never shifts anybody else's draws.

Conventions the scenario runner follows:

* Setup at t=0, before any event: all trucks' verifier keys are registered
  by the issuer and committed, then the first ``n_founders`` trucks form
  the platoon (a ``form`` record).  The remaining trucks join per schedule.
* Broadcasts are k unicasts.  The group leader (``verifiers[0]`` of the
  request) aggregates votes and decides once all k votes are in or
  ``vote_window_ms`` after the first one arrives; absentees count as False.
* Verifiers ignore requests from a past epoch; the prover then times out
  and retries under the new challenge.
* A retry from a truck that was already admitted (its result got lost) is
  answered by the leader with the cached approval, not re-voted.
* Ledger writes that fail (endorsement faults) are queued on the platoon
  and retried every ``ledger_retry_ms`` until ``horizon_ms``.
"""

from __future__ import annotations

import heapq
import json
import logging
import random
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

from . import crypto, protocol
from .errors import PlatoonError
from .ledger import EndorsementPolicy, Ledger, make_peers
from .protocol import JoinRequest, PlatoonState, ProtocolConfig, TruckIdentity, VerificationResult, Vote
from .textio import canonical_json

log = logging.getLogger(__name__)

FAULT_KINDS = ("peer-crash", "byzantine-verifier", "ledger-endorse-fail")
LEDGER_TARGET = "ledger"


class SimError(PlatoonError):
    pass


class ConfigError(SimError, ValueError):
    pass


class UnknownTarget(ConfigError):
    pass


# -- configuration ---------------------------------------------------------------


@dataclass(frozen=True)
class LatencySpec:
    """Per-message latency: fixed when ``low == high``, else uniform on integers."""

    low: int = 10
    high: int = 10

    @classmethod
    def fixed(cls, ms: int) -> LatencySpec:
        return cls(ms, ms)

    @classmethod
    def uniform(cls, low: int, high: int) -> LatencySpec:
        return cls(low, high)

    @property
    def kind(self) -> str:
        return "fixed" if self.low == self.high else "uniform"

    def sample(self, rng: random.Random) -> int:
        return rng.randint(self.low, self.high)

    def to_obj(self) -> dict:
        if self.kind == "fixed":
            return {"kind": "fixed", "ms": self.low}
        return {"kind": "uniform", "low": self.low, "high": self.high}

    @classmethod
    def from_obj(cls, obj) -> LatencySpec:
        if isinstance(obj, int) and not isinstance(obj, bool):
            return cls.fixed(obj)
        if not isinstance(obj, dict):
            raise ConfigError(f"bad latency spec {obj!r}")
        if obj.get("kind") == "fixed":
            return cls.fixed(obj["ms"])
        if obj.get("kind") == "uniform":
            return cls.uniform(obj["low"], obj["high"])
        raise ConfigError(f"latency kind must be fixed or uniform, got {obj.get('kind')!r}")


@dataclass(frozen=True)
class LinkModel:
    latency: LatencySpec = LatencySpec()
    drop_rate: float = 0.0


@dataclass(frozen=True)
class FaultSpec:
    kind: str
    target: str
    start_ms: int
    end_ms: int

    @property
    def empty(self) -> bool:
        return self.end_ms <= self.start_ms


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    n_trucks: int = 8
    n_companies: int = 2
    verifier_group_k: int = 3
    endorsement_k: int = 1
    n_peers: int = 3
    link_latency_ms: LatencySpec = LatencySpec.fixed(10)
    drop_rate: float = 0.0
    byzantine_set: tuple[str, ...] = ()
    join_schedule: tuple[tuple[int, str], ...] | None = None
    timeout_T_ms: int = protocol.DEFAULT_TIMEOUT_MS
    max_attempts: int = protocol.DEFAULT_MAX_ATTEMPTS
    n_founders: int | None = None
    forger_set: tuple[str, ...] = ()
    faults: tuple[FaultSpec, ...] = ()
    vote_window_ms: int | None = None
    block_max_tx: int = 10
    block_timeout_ms: int = 100
    ledger_retry_ms: int = 100
    approval_only_reputation: bool = False
    platoon_id: str = "P1"
    route_tag: str = "route-1"
    horizon_ms: int | None = None

    # -- derived ------------------------------------------------------------------

    @property
    def truck_ids(self) -> list[str]:
        width = max(2, len(str(self.n_trucks)))
        return [f"T{i:0{width}d}" for i in range(1, self.n_trucks + 1)]

    @property
    def company_ids(self) -> list[str]:
        return [f"C{i}" for i in range(1, self.n_companies + 1)]

    def owner_of(self, truck_id: str) -> str:
        return self.company_ids[self.truck_ids.index(truck_id) % self.n_companies]

    @property
    def peer_ids(self) -> list[str]:
        return [f"peer{i}" for i in range(self.n_peers)]

    @property
    def founders(self) -> list[str]:
        n = self.verifier_group_k if self.n_founders is None else self.n_founders
        return self.truck_ids[:n]

    def schedule(self) -> list[tuple[int, str]]:
        """Join schedule; default staggers non-founders 1000 ms apart from t=1000."""
        if self.join_schedule is not None:
            return sorted((int(t), str(truck)) for t, truck in self.join_schedule)
        joiners = [t for t in self.truck_ids if t not in self.founders]
        return [(1000 * (i + 1), t) for i, t in enumerate(joiners)]

    @property
    def vote_window(self) -> int:
        return self.timeout_T_ms // 2 if self.vote_window_ms is None else self.vote_window_ms

    @property
    def horizon(self) -> int:
        if self.horizon_ms is not None:
            return self.horizon_ms
        last = max((t for t, _ in self.schedule()), default=0)
        return last + self.max_attempts * self.timeout_T_ms + 5000

    @property
    def link(self) -> LinkModel:
        return LinkModel(self.link_latency_ms, self.drop_rate)

    def protocol_config(self) -> ProtocolConfig:
        return ProtocolConfig(
            timeout_ms=self.timeout_T_ms,
            max_attempts=self.max_attempts,
            verifier_group_k=self.verifier_group_k,
            approval_only_reputation=self.approval_only_reputation,
        )

    # -- validation -----------------------------------------------------------------

    def validate(self) -> ScenarioConfig:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.n_trucks >= 1 and self.n_companies >= 1, "need at least one truck and one company")
        need(0.0 <= self.drop_rate <= 1.0, f"drop_rate {self.drop_rate} outside [0, 1]")
        need(1 <= self.verifier_group_k <= self.n_trucks, "verifier_group_k must be in [1, n_trucks]")
        need(1 <= self.endorsement_k <= self.n_peers, "endorsement_k must be in [1, n_peers]")
        need(0 <= self.link_latency_ms.low <= self.link_latency_ms.high, "latency needs 0 <= low <= high")
        need(self.timeout_T_ms > 0 and self.max_attempts >= 1, "timeout and max_attempts must be positive")
        need(0 < self.vote_window, "vote window must be positive")
        need(self.block_max_tx >= 1 and self.block_timeout_ms >= 0 and self.ledger_retry_ms > 0, "bad ledger timing")
        founders = self.founders
        need(self.verifier_group_k <= len(founders) <= self.n_trucks, "n_founders must be in [k, n_trucks]")
        trucks = set(self.truck_ids)
        seen = set()
        for t, truck in self.schedule():
            need(t >= 0, f"negative join time {t}")
            need(truck in trucks, f"join_schedule names unknown truck {truck!r}")
            need(truck not in founders, f"{truck} is a founder and cannot join")
            need(truck not in seen, f"{truck} scheduled twice")
            seen.add(truck)
        for name in ("byzantine_set", "forger_set"):
            for truck in getattr(self, name):
                if truck not in trucks:
                    raise UnknownTarget(f"{name} names unknown truck {truck!r}")
        for fault in self.faults:
            _check_fault(self, fault)
        return self

    # -- structured text ------------------------------------------------------------

    def to_obj(self) -> dict:
        obj = asdict(self)
        obj["link_latency_ms"] = self.link_latency_ms.to_obj()
        obj["byzantine_set"] = list(self.byzantine_set)
        obj["forger_set"] = list(self.forger_set)
        obj["join_schedule"] = None if self.join_schedule is None else [list(e) for e in self.join_schedule]
        obj["faults"] = [asdict(f) for f in self.faults]
        return obj

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_obj(cls, obj: dict) -> ScenarioConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        kw = dict(obj)
        if "link_latency_ms" in kw:
            kw["link_latency_ms"] = LatencySpec.from_obj(kw["link_latency_ms"])
        for name in ("byzantine_set", "forger_set"):
            if name in kw:
                kw[name] = tuple(kw[name])
        if kw.get("join_schedule") is not None:
            kw["join_schedule"] = tuple((int(t), str(truck)) for t, truck in kw["join_schedule"])
        if "faults" in kw:
            kw["faults"] = tuple(FaultSpec(**f) for f in kw["faults"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> ScenarioConfig:
        try:
            obj = json.loads(text)
        except ValueError as exc:
            raise ConfigError(f"config is not JSON: {exc}") from None
        return cls.from_obj(obj)


PRESETS: dict[str, ScenarioConfig] = {
    "baseline": ScenarioConfig(),
    "byzantine": ScenarioConfig(n_founders=4, byzantine_set=("T01",)),
    "forger": ScenarioConfig(forger_set=("T05",)),
    "lossy": ScenarioConfig(link_latency_ms=LatencySpec.uniform(5, 15), drop_rate=0.05),
}


def load_config(source: str | Path) -> ScenarioConfig:
    """A preset name or a path to a JSON config file."""
    if str(source) in PRESETS:
        return PRESETS[str(source)]
    return ScenarioConfig.from_json(Path(source).read_text(encoding="utf-8"))


def _check_fault(config: ScenarioConfig, fault: FaultSpec) -> None:
    if fault.kind not in FAULT_KINDS:
        raise ConfigError(f"fault kind must be one of {FAULT_KINDS}, got {fault.kind!r}")
    targets = {
        "peer-crash": set(config.peer_ids),
        "byzantine-verifier": set(config.truck_ids),
        "ledger-endorse-fail": {LEDGER_TARGET},
    }[fault.kind]
    if fault.target not in targets:
        raise UnknownTarget(f"{fault.kind}: unknown target {fault.target!r}")
    if not (0 <= fault.start_ms <= fault.end_ms <= config.horizon):
        raise ConfigError(f"fault window [{fault.start_ms}, {fault.end_ms}] outside [0, {config.horizon}]")


def inject_fault(config: ScenarioConfig, kind: str, target: str, window: tuple[int, int]) -> ScenarioConfig:
    fault = FaultSpec(kind, target, int(window[0]), int(window[1]))
    _check_fault(config, fault)
    return replace(config, faults=config.faults + (fault,))


# -- links and traces ------------------------------------------------------------------


def entity_stream(seed: int, entity: str) -> random.Random:
    return random.Random(f"platoonzk-sim:{seed}:{entity}")


def deliver(send_time: int, link: LinkModel, rng: random.Random) -> int | None:
    """Arrival time of one message, or None when the link drops it.

    Always consumes exactly two draws so the stream stays aligned whatever
    the outcome.
    """
    dropped = rng.random() < link.drop_rate
    latency = link.latency.sample(rng)
    return None if dropped else send_time + latency


@dataclass(frozen=True)
class TraceEvent:
    t: int
    kind: str
    payload: dict

    def to_line(self) -> str:
        return canonical_json({"t": self.t, "event": self.kind, **self.payload})


@dataclass
class EventTrace:
    events: list[TraceEvent] = field(default_factory=list)

    def emit(self, t: int, kind: str, **payload) -> None:
        if self.events and t < self.events[-1].t:
            raise SimError(f"trace time went backwards: {t} < {self.events[-1].t}")
        self.events.append(TraceEvent(t, kind, payload))

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def of_kind(self, kind: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind == kind]

    def to_text(self) -> str:
        return "".join(e.to_line() + "\n" for e in self.events)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def from_text(cls, text: str) -> EventTrace:
        trace = cls()
        for line in text.splitlines():
            obj = json.loads(line)
            t, kind = obj.pop("t"), obj.pop("event")
            trace.emit(t, kind, **obj)
        return trace


# -- the simulator -------------------------------------------------------------------


@dataclass
class _Lineage:
    identity: TruckIdentity
    request: JoinRequest | None = None
    answered: bool = False
    gave_up: bool = False


@dataclass
class ScenarioRun:
    config: ScenarioConfig
    trace: EventTrace
    ledger: Ledger
    platoon: PlatoonState
    request_states: dict[str, str]
    outcomes: dict[str, str]

    @property
    def approvals(self) -> int:
        return sum(1 for e in self.trace.of_kind("finalize") if e.payload["approved"])

    @property
    def rejections(self) -> int:
        return sum(1 for e in self.trace.of_kind("finalize") if not e.payload["approved"])

    def join_records(self) -> int:
        return sum(1 for r in self.ledger.records if r.event == "join")

    def consistent(self) -> bool:
        """Trace approvals match committed join records one-for-one."""
        approved = sorted(e.payload["prover"] for e in self.trace.of_kind("finalize") if e.payload["approved"])
        recorded = sorted(m for r in self.ledger.records if r.event == "join" for m in r.member_list)
        return approved == recorded

    def summary(self) -> dict:
        return {
            "approved": self.approvals,
            "rejected": self.rejections,
            "outcomes": dict(sorted(Counter(self.outcomes.values()).items())),
            "requests": dict(sorted(Counter(self.request_states.values()).items())),
            "members": list(self.platoon.members),
            "join_records": self.join_records(),
            "ledger_height": self.ledger.height,
            "consistent": self.consistent(),
        }


class Simulation:
    def __init__(self, config: ScenarioConfig):
        self.cfg = config.validate()
        self.trace = EventTrace()
        self.now = 0
        self._queue: list[tuple[int, int, Callable, tuple]] = []
        self._seq = 0
        self._streams: dict[str, random.Random] = {}
        self._byzantine = set(config.byzantine_set)
        self._armed_cuts: set[int] = set()
        self._retry_armed = False
        self._seen_height = 0
        self.ballots: dict[str, dict[str, Vote]] = {}
        self.window_open: set[str] = set()
        self.requests: dict[str, JoinRequest] = {}
        self.request_states: dict[str, str] = {}
        self.approved_results: dict[str, VerificationResult] = {}
        self.lineages: dict[str, _Lineage] = {}
        self._setup()

    # -- plumbing --------------------------------------------------------------

    def stream(self, entity: str) -> random.Random:
        if entity not in self._streams:
            self._streams[entity] = entity_stream(self.cfg.seed, entity)
        return self._streams[entity]

    def at(self, t: int, handler: Callable, *args) -> None:
        if t < self.now:
            raise SimError("cannot schedule into the past")
        self._seq += 1
        heapq.heappush(self._queue, (t, self._seq, handler, args))

    def emit(self, kind: str, **payload) -> None:
        self.trace.emit(self.now, kind, **payload)

    def send(self, src: str, dst: str, what: str, handler: Callable, *args) -> None:
        if src == dst:
            self.at(self.now, handler, dst, *args)
            return
        arrival = deliver(self.now, self.cfg.link, self.stream(f"link:{src}"))
        if arrival is None:
            self.emit("drop", src=src, dst=dst, msg=what)
        else:
            self.at(arrival, handler, dst, *args)

    # -- setup -------------------------------------------------------------------

    def _setup(self) -> None:
        cfg = self.cfg
        peers = make_peers(cfg.n_peers, cfg.seed)
        self.ledger = Ledger(
            peers,
            EndorsementPolicy(cfg.endorsement_k),
            companies=cfg.company_ids,
            block_max_tx=cfg.block_max_tx,
            block_timeout_ms=cfg.block_timeout_ms,
        )
        self.identities: dict[str, TruckIdentity] = {}
        self.keys: dict[str, crypto.ProverKey] = {}
        self.emit("setup", trucks=cfg.n_trucks, companies=cfg.n_companies, peers=cfg.n_peers,
                  policy=self.ledger.policy.label, k=cfg.verifier_group_k, seed=cfg.seed)
        for truck in cfg.truck_ids:
            mac = _mac_address(self.stream(f"mac:{truck}"))
            ident = TruckIdentity(truck, mac, cfg.owner_of(truck))
            sk, vk = crypto.keygen(self.stream(f"key:{truck}"))
            self.identities[truck] = ident
            self.keys[truck] = sk
            self.ledger.register_verifier_key(truck, vk, ident.owner_company, crypto.hash_identity(mac), now=0)
            self.emit("register", truck=truck, owner=ident.owner_company, vk=vk.to_hex())
        for truck in cfg.forger_set:
            self.keys[truck], _ = crypto.keygen(self.stream(f"forged-key:{truck}"))
        self.ledger.flush(0)
        self._sync_ledger()
        self.platoon = protocol.form_platoon(
            cfg.platoon_id,
            cfg.founders,
            self.ledger,
            config=cfg.protocol_config(),
            route_tag=cfg.route_tag,
            rng=self.stream("challenge"),
        )
        self.emit("form", platoon=cfg.platoon_id, members=list(self.platoon.members))
        self._emit_epoch()
        self._after_ledger_write()
        for t, truck in cfg.schedule():
            self.at(t, self._on_submit, truck)
        for fault in cfg.faults:
            if not fault.empty:
                self.at(fault.start_ms, self._on_fault, fault, True)
                self.at(fault.end_ms, self._on_fault, fault, False)

    # -- ledger bookkeeping -----------------------------------------------------------

    def _sync_ledger(self) -> None:
        while self._seen_height < self.ledger.height:
            self._seen_height += 1
            block = self.ledger.blocks[self._seen_height]
            kinds = Counter(tx.kind.value for tx in block.txs)
            self.emit("commit", height=block.height, txs=len(block.txs), kinds=dict(sorted(kinds.items())),
                      block_hash=block.block_hash.hex())

    def _after_ledger_write(self) -> None:
        self._sync_ledger()
        due = self.ledger.next_cut_time()
        if due is not None:
            when = max(int(due), self.now)
            if when not in self._armed_cuts:
                self._armed_cuts.add(when)
                self.at(when, self._on_cut)
        if self.platoon.pending_records and not self._retry_armed:
            nxt = self.now + self.cfg.ledger_retry_ms
            if nxt <= self.cfg.horizon:
                self._retry_armed = True
                self.at(nxt, self._on_ledger_retry)

    def _on_cut(self) -> None:
        self._armed_cuts.discard(self.now)
        self.ledger.tick(self.now)
        self._after_ledger_write()

    def _on_ledger_retry(self) -> None:
        self._retry_armed = False
        before = len(self.platoon.pending_records)
        self.platoon = protocol.retry_pending(self.platoon, self.ledger, self.now)
        self.emit("ledger_retry", submitted=before - len(self.platoon.pending_records),
                  pending=len(self.platoon.pending_records))
        self._after_ledger_write()

    # -- faults --------------------------------------------------------------------------

    def _on_fault(self, fault: FaultSpec, active: bool) -> None:
        if fault.kind == "peer-crash":
            self.ledger.peers[fault.target].live = not active
        elif fault.kind == "byzantine-verifier":
            if active:
                self._byzantine.add(fault.target)
            elif fault.target not in self.cfg.byzantine_set:
                self._byzantine.discard(fault.target)
        else:
            self.ledger.endorse_fail = active
        self.emit("fault_on" if active else "fault_off", fault=fault.kind, target=fault.target)

    # -- prover side ------------------------------------------------------------------------

    def _on_submit(self, truck: str) -> None:
        lineage = self.lineages.setdefault(truck, _Lineage(self.identities[truck]))
        try:
            req = protocol.submit_join_request(lineage.identity, self.keys[truck], self.platoon, self.now, self.ledger)
        except protocol.AlreadyMember:
            self.emit("skip", prover=truck, reason="already-member")
            return
        self._issue(lineage, req)

    def _issue(self, lineage: _Lineage, req: JoinRequest) -> None:
        lineage.request = req
        self.requests[req.request_id] = req
        self.emit("submit", request_id=req.request_id, prover=req.prover, attempt=req.attempt, epoch=req.epoch,
                  verifiers=list(req.verifiers), deadline=req.deadline)
        for v in req.verifiers:
            self.send(req.prover, v, "request", self._on_request, req)
        self.at(req.deadline, self._on_prover_timeout, req.prover, req.request_id)

    def _on_prover_timeout(self, truck: str, request_id: str) -> None:
        lineage = self.lineages[truck]
        req = lineage.request
        if lineage.answered or lineage.gave_up or req.request_id != request_id:
            return
        self.request_states.setdefault(request_id, "expired")
        try:
            new = protocol.handle_timeout(req, self.now, self.keys[truck], self.platoon)
        except protocol.MaxAttemptsExceeded:
            lineage.gave_up = True
            self.emit("timeout", request_id=request_id, prover=truck, attempt=req.attempt, terminal=True)
            return
        self.emit("timeout", request_id=request_id, prover=truck, attempt=req.attempt, terminal=False)
        self._issue(lineage, new)

    def _on_result(self, truck: str, result: VerificationResult) -> None:
        lineage = self.lineages[truck]
        if lineage.answered:
            return
        lineage.answered = True
        self.emit("result", prover=truck, request_id=result.request_id, approved=result.approved)

    # -- verifier side ------------------------------------------------------------------------

    def _on_request(self, verifier: str, req: JoinRequest) -> None:
        leader = req.verifiers[0]
        if req.prover in self.platoon.members:
            cached = self.approved_results.get(req.join_id)
            if verifier == leader and cached is not None and req.request_id not in self.request_states:
                self.request_states[req.request_id] = "approved-cached"
                self.emit("resend", request_id=req.request_id, prover=req.prover, cached=cached.request_id)
                self.send(leader, req.prover, "result", self._on_result, cached)
            return
        if req.epoch != self.platoon.group.epoch or verifier not in self.platoon.group:
            self.emit("stale", verifier=verifier, request_id=req.request_id, epoch=req.epoch)
            return
        vote = protocol.cast_vote(verifier, req, self.ledger, self.platoon, byzantine=verifier in self._byzantine)
        self.emit("vote", verifier=verifier, request_id=req.request_id, verdict=vote.verdict)
        if verifier == leader:
            self._open_window(req)
        self.send(verifier, leader, "vote", self._on_vote, req, vote)

    def _open_window(self, req: JoinRequest) -> None:
        if req.request_id not in self.window_open:
            self.window_open.add(req.request_id)
            self.at(self.now + self.cfg.vote_window, self._on_window_close, req)

    def _on_vote(self, leader: str, req: JoinRequest, vote: Vote) -> None:
        if req.request_id in self.request_states:
            return
        box = self.ballots.setdefault(req.request_id, {})
        box[vote.verifier] = vote
        self._open_window(req)
        if len(box) == len(req.verifiers):
            self._decide(req)

    def _on_window_close(self, req: JoinRequest) -> None:
        if req.request_id not in self.request_states and self.ballots.get(req.request_id):
            self._decide(req)

    def _decide(self, req: JoinRequest) -> None:
        if self.now >= req.deadline or req.epoch != self.platoon.group.epoch:
            self.request_states[req.request_id] = "expired"
            self.emit("discard", request_id=req.request_id, reason="expired" if self.now >= req.deadline else "stale")
            return
        votes = self.ballots.pop(req.request_id).values()
        result = protocol.tally(req, votes, self.platoon, self.now)
        yes = sum(v.verdict for v in result.votes)
        self.request_states[req.request_id] = "approved" if result.approved else "rejected"
        self.emit("decide", request_id=req.request_id, approved=result.approved, yes=yes,
                  no=len(result.votes) - yes, absent=len(req.verifiers) - len(result.votes))
        pending_before = len(self.platoon.pending_records)
        self.platoon = protocol.finalize(req, result, self.platoon, self.ledger, self.now, rng=self.stream("challenge"))
        self.emit("finalize", request_id=req.request_id, prover=req.prover, approved=result.approved,
                  members=list(self.platoon.members))
        if len(self.platoon.pending_records) > pending_before:
            self.emit("ledger_pending", pending=len(self.platoon.pending_records),
                      reason=self.platoon.pending_records[-1].reason)
        self._emit_epoch()
        if result.approved:
            self.approved_results[req.join_id] = result
        self._after_ledger_write()
        self.send(req.verifiers[0], req.prover, "result", self._on_result, result)

    def _emit_epoch(self) -> None:
        g = self.platoon.group
        self.emit("epoch", epoch=g.epoch, group=list(g.members), challenge=g.challenge.hex(),
                  scores=self.platoon.scores.snapshot())

    # -- run -----------------------------------------------------------------------------

    def run(self) -> ScenarioRun:
        while self._queue:
            t, _, handler, args = heapq.heappop(self._queue)
            if t > self.cfg.horizon:
                break
            self.now = t
            handler(*args)
        self.ledger.flush(self.now)
        self._sync_ledger()
        outcomes = {}
        for truck, lineage in sorted(self.lineages.items()):
            if truck in self.platoon.members:
                outcomes[truck] = "approved"
            elif any(self.request_states.get(r) == "rejected" for r in self.requests if self.requests[r].prover == truck):
                outcomes[truck] = "rejected"
            else:
                outcomes[truck] = "timeout"
        run = ScenarioRun(self.cfg, self.trace, self.ledger, self.platoon, dict(self.request_states), outcomes)
        for rid in self.requests:
            run.request_states.setdefault(rid, "expired")
        self.emit("end", **run.summary(), pending=len(self.platoon.pending_records))
        return run


def _mac_address(rng: random.Random) -> str:
    octets = bytearray(rng.randbytes(6))
    octets[0] = (octets[0] | 0x02) & 0xFE  # locally administered, unicast
    return ":".join(f"{b:02X}" for b in octets)


def run_scenario(config: ScenarioConfig) -> ScenarioRun:
    """Run a scenario to completion; ``.trace`` is the EventTrace."""
    return Simulation(config).run()
