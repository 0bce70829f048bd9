import json

import pytest

from platoonzk import bench
from platoonzk.bench import BenchError, LoadSpec

# small, fast loads; these tests check mechanics, not performance
QUICK = LoadSpec(start_tps=20, max_tps=40, step_s=0.25, latency_tps=40, latency_tx=8, block_timeout_ms=20)


class TestValidation:
    @pytest.mark.parametrize(
        "kw",
        [{"n_peers": 0}, {"growth": 1.0}, {"saturation": 0.0}, {"saturation": 1.5}, {"step_s": 0}, {"latency_tx": -1}],
    )
    def test_bad_load(self, kw):
        with pytest.raises(BenchError):
            LoadSpec(**kw).validate()

    def test_policy_beyond_peers(self):
        with pytest.raises(BenchError):
            LoadSpec(n_peers=2).validate([1, 3])

    def test_rounds_floor(self):
        with pytest.raises(BenchError):
            bench.bench_throughput([1], QUICK, rounds=2)
        with pytest.raises(BenchError):
            bench.bench_latency([1], QUICK, rounds=0)
        with pytest.raises(BenchError):
            bench.bench_latency([], QUICK)

    def test_crypto_iteration_floor(self):
        with pytest.raises(BenchError):
            bench.bench_crypto(10)


class TestPipeline:
    def test_zero_load_zero_tps(self):
        reports = bench.bench_latency([1], LoadSpec(latency_tx=0))
        r = reports[0]
        assert r.tps_avg == 0.0 and r.latency_avg_ms == 0.0
        assert all(s.n_tx == 0 for s in r.rounds)

    def test_single_transaction(self):
        r = bench.bench_latency([2], LoadSpec(latency_tx=1, block_timeout_ms=10))[0]
        for s in r.rounds:
            assert s.n_tx == 1
            assert s.latency_min_ms == s.latency_avg_ms == s.latency_max_ms > 0

    def test_every_offered_tx_commits(self):
        r = bench.bench_latency([1, 3], QUICK)
        for rep in r:
            assert [s.n_tx for s in rep.rounds] == [QUICK.latency_tx] * 3

    def test_report_invariants(self):
        reports = bench.bench_throughput([1, 2], QUICK)
        assert [r.policy for r in reports] == ["1-of-any", "2-of-any"]
        for r in reports:
            assert r.metric == "throughput" and r.n_rounds == 3 == len(r.rounds)
            assert 0 < r.tps_min <= r.tps_avg <= r.tps_max
            assert 0 < r.latency_min_ms <= r.latency_avg_ms <= r.latency_max_ms
            assert r.crypto_prove_avg_ms is None
            for s in r.rounds:
                assert s.offered_tps in (20, 40)

    def test_latency_pooled_extremes(self):
        r = bench.bench_latency([1], QUICK)[0]
        assert r.latency_min_ms == min(s.latency_min_ms for s in r.rounds)
        assert r.latency_max_ms == max(s.latency_max_ms for s in r.rounds)
        assert r.latency_min_ms <= r.latency_avg_ms <= r.latency_max_ms


class TestCrypto:
    def test_timings_positive(self):
        t = bench.bench_crypto(100, seed=1)
        assert t.prove_avg_ms > 0 and t.verify_avg_ms > 0

    def test_attached_to_reports(self):
        r = bench.bench_latency([1], LoadSpec(latency_tx=2), crypto_iterations=100)[0]
        assert r.crypto_prove_avg_ms > 0 and r.crypto_verify_avg_ms > 0


def test_report_json(tmp_path):
    reports = bench.bench_latency([1], QUICK)
    path = tmp_path / "r.json"
    bench.write_report(path, reports, QUICK)
    doc = json.loads(path.read_text())
    assert doc["format"] == "platoonzk-bench/1"
    assert doc["load_spec"]["latency_tx"] == 8
    assert doc["summary"][0]["policy"] == "1-of-any"
    assert doc["reference"]["throughput_peak_tps"]["3-of-any"] == 15
    assert "cpu" in doc["hardware_note"]
