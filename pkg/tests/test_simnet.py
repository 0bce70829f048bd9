import json
import statistics
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platoonzk.simnet import (
    PRESETS,
    ConfigError,
    EventTrace,
    LatencySpec,
    LinkModel,
    ScenarioConfig,
    SimError,
    UnknownTarget,
    deliver,
    entity_stream,
    inject_fault,
    load_config,
    run_scenario,
)

BASE = PRESETS["baseline"]


@pytest.fixture(scope="module")
def baseline():
    return run_scenario(BASE)


def decisions_with(run, truck):
    """(score before, score after) for every decision where ``truck`` sat in the group."""
    epochs = run.trace.of_kind("epoch")
    return [
        (a.payload["scores"].get(truck, 0), b.payload["scores"].get(truck, 0))
        for a, b in zip(epochs, epochs[1:])
        if truck in a.payload["group"]
    ]


class TestConfig:
    def test_json_round_trip(self):
        cfg = replace(PRESETS["lossy"], byzantine_set=("T02",), join_schedule=((900, "T05"), (100, "T04")))
        cfg = inject_fault(cfg, "peer-crash", "peer1", (100, 200))
        again = ScenarioConfig.from_json(cfg.to_json())
        assert again == cfg
        assert json.loads(cfg.to_json())["link_latency_ms"] == {"kind": "uniform", "low": 5, "high": 15}

    def test_fixed_latency_shorthand(self):
        cfg = ScenarioConfig.from_json('{"link_latency_ms": 25}')
        assert cfg.link_latency_ms == LatencySpec.fixed(25)

    @pytest.mark.parametrize(
        "kw",
        [
            {"drop_rate": 1.5},
            {"verifier_group_k": 9},
            {"endorsement_k": 4},
            {"n_founders": 2},
            {"join_schedule": ((10, "T01"),)},
            {"join_schedule": ((10, "T04"), (20, "T04"))},
            {"join_schedule": ((10, "T42"),)},
            {"timeout_T_ms": 0},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            replace(BASE, **kw).validate()

    def test_unknown_field_and_bad_json(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_json('{"n_truck": 3}')
        with pytest.raises(ConfigError):
            ScenarioConfig.from_json("{")

    def test_unknown_targets(self):
        with pytest.raises(UnknownTarget):
            replace(BASE, byzantine_set=("T99",)).validate()
        with pytest.raises(UnknownTarget):
            inject_fault(BASE, "peer-crash", "peer7", (0, 10))
        with pytest.raises(UnknownTarget):
            inject_fault(BASE, "byzantine-verifier", "peer0", (0, 10))
        with pytest.raises(ConfigError):
            inject_fault(BASE, "meteor", "T01", (0, 10))
        with pytest.raises(ConfigError):
            inject_fault(BASE, "peer-crash", "peer0", (20, 10))

    def test_derived_defaults(self):
        assert BASE.founders == ["T01", "T02", "T03"]
        assert BASE.schedule() == [(1000 * i, f"T0{i + 3}") for i in range(1, 6)]
        assert BASE.vote_window == 250
        assert BASE.owner_of("T01") == "C1" and BASE.owner_of("T02") == "C2"

    def test_load_config(self, tmp_path):
        assert load_config("byzantine") is PRESETS["byzantine"]
        path = tmp_path / "c.json"
        path.write_text(PRESETS["forger"].to_json())
        assert load_config(path) == PRESETS["forger"]


class TestDeliver:
    def test_fixed_latency(self):
        rng = entity_stream(0, "link:x")
        assert [deliver(100, LinkModel(LatencySpec.fixed(10)), rng) for _ in range(5)] == [110] * 5

    def test_drop_all_and_none(self):
        rng = entity_stream(0, "link:x")
        assert all(deliver(0, LinkModel(drop_rate=1.0), rng) is None for _ in range(50))
        assert all(deliver(0, LinkModel(drop_rate=0.0), rng) is not None for _ in range(50))

    def test_uniform_mean(self):
        rng = entity_stream(1, "link:y")
        link = LinkModel(LatencySpec.uniform(5, 15))
        samples = [deliver(0, link, rng) for _ in range(20000)]
        assert min(samples) == 5 and max(samples) == 15
        assert abs(statistics.fmean(samples) - 10) <= 0.5

    def test_drop_rate_frequency(self):
        rng = entity_stream(2, "link:z")
        drops = sum(deliver(0, LinkModel(drop_rate=0.2), rng) is None for _ in range(10000))
        assert 0.18 < drops / 10000 < 0.22

    def test_stream_stays_aligned(self):
        # the drop decision never changes how many draws a delivery consumes
        a, b = entity_stream(3, "l"), entity_stream(3, "l")
        for _ in range(10):
            deliver(0, LinkModel(drop_rate=1.0), a)
            deliver(0, LinkModel(drop_rate=0.0), b)
        assert a.random() == b.random()


class TestTrace:
    def test_monotonic_emit(self):
        tr = EventTrace()
        tr.emit(5, "x")
        with pytest.raises(SimError):
            tr.emit(4, "y")

    def test_text_round_trip(self, baseline):
        text = baseline.trace.to_text()
        assert EventTrace.from_text(text).to_text() == text
        for line in text.splitlines():
            obj = json.loads(line)
            assert line == json.dumps(obj, sort_keys=True, separators=(",", ":"))


class TestScenarios:
    def test_baseline_all_approved(self, baseline):
        s = baseline.summary()
        assert s["approved"] == 5 and s["rejected"] == 0
        assert set(baseline.outcomes.values()) == {"approved"}
        assert baseline.platoon.members == tuple(BASE.truck_ids)
        assert baseline.consistent() and baseline.ledger.verify_chain()

    def test_deterministic(self, baseline):
        assert run_scenario(BASE).trace.to_text() == baseline.trace.to_text()

    def test_seed_changes_trace(self, baseline):
        assert run_scenario(replace(BASE, seed=1)).trace.to_text() != baseline.trace.to_text()

    def test_forger_rejected_unanimously(self):
        run = run_scenario(PRESETS["forger"])
        assert run.outcomes["T05"] == "rejected"
        assert "T05" not in run.platoon.members
        mine = [e for e in run.trace.of_kind("decide") if e.payload["request_id"].startswith("T05@")]
        assert mine and all(e.payload["yes"] == 0 for e in mine)
        assert run.consistent()

    def test_total_loss_times_out(self):
        run = run_scenario(replace(BASE, drop_rate=1.0))
        assert set(run.outcomes.values()) == {"timeout"}
        timeouts = run.trace.of_kind("timeout")
        assert sum(e.payload["terminal"] for e in timeouts) == 5
        assert max(e.payload["attempt"] for e in timeouts) == BASE.max_attempts
        assert run.join_records() == 0 and run.consistent()

    def test_lossy_stays_consistent(self):
        run = run_scenario(PRESETS["lossy"])
        assert run.consistent() and run.ledger.verify_chain()
        assert len({e.payload["request_id"] for e in run.trace.of_kind("decide")}) == len(run.trace.of_kind("decide"))

    @settings(max_examples=6)
    @given(st.integers(0, 10**6), st.floats(0, 0.3))
    def test_invariants(self, seed, drop):
        run = run_scenario(replace(BASE, seed=seed, drop_rate=drop, link_latency_ms=LatencySpec.uniform(5, 40)))
        times = [e.t for e in run.trace]
        assert times == sorted(times)
        assert run.consistent()
        for e in run.trace.of_kind("decide"):
            p = e.payload
            assert p["yes"] + p["no"] + p["absent"] == BASE.verifier_group_k
        # a membership never shrinks and each finalize adds at most the prover
        sizes = [len(e.payload["members"]) for e in run.trace.of_kind("finalize")]
        assert all(0 <= b - a <= 1 for a, b in zip([len(BASE.founders)] + sizes, sizes))


class TestFaults:
    def test_byzantine_score_strictly_decreases(self):
        run = run_scenario(PRESETS["byzantine"])
        steps = decisions_with(run, "T01")
        assert steps and all(after < before for before, after in steps)
        assert "T01" not in run.trace.of_kind("epoch")[-1].payload["group"]

    def test_injected_byzantine_window(self):
        cfg = inject_fault(replace(BASE, n_founders=4), "byzantine-verifier", "T02", (0, 2500))
        run = run_scenario(cfg)
        kinds = [e.kind for e in run.trace if e.kind.startswith("fault")]
        assert kinds == ["fault_on", "fault_off"]
        assert run.trace.of_kind("epoch")[-1].payload["scores"]["T02"] < 0

    def test_peer_crash_shortfall_then_recovery(self):
        cfg = replace(BASE, endorsement_k=3)
        cfg = inject_fault(cfg, "peer-crash", "peer1", (900, 1600))
        run = run_scenario(cfg)
        pending = run.trace.of_kind("ledger_pending")
        assert pending and pending[0].payload["reason"] == "EndorsementShortfall"
        assert run.trace.of_kind("ledger_retry")
        assert run.consistent() and run.join_records() == 5
        assert run.ledger.audit_endorsements()

    def test_endorse_fail_window(self):
        cfg = inject_fault(BASE, "ledger-endorse-fail", "ledger", (900, 1300))
        run = run_scenario(cfg)
        assert run.trace.of_kind("ledger_pending")
        assert run.consistent() and run.join_records() == 5

    def test_empty_window_is_baseline(self, baseline):
        cfg = inject_fault(BASE, "peer-crash", "peer0", (1500, 1500))
        assert run_scenario(cfg).trace.to_text() == baseline.trace.to_text()


def test_streams_are_independent():
    # extra messages on one link must not perturb another entity's draws
    a = entity_stream(7, "link:T04")
    b = entity_stream(7, "link:T05")
    first = [b.random() for _ in range(5)]
    for _ in range(100):
        a.random()
    b2 = entity_stream(7, "link:T05")
    assert [b2.random() for _ in range(5)] == first
    assert entity_stream(7, "mac:T01").random() != entity_stream(8, "mac:T01").random()


def test_added_traffic_keeps_keys(baseline):
    lossy = run_scenario(replace(BASE, drop_rate=0.2))
    keys = lambda r: [e.payload["vk"] for e in r.trace.of_kind("register")]  # noqa: E731
    assert keys(lossy) == keys(baseline)
