import numpy as np
import pytest

from multirep.bench import (
    BenchConfig,
    BenchReport,
    _timed,
    bench_encoding,
    bench_search,
    bench_storage,
    synthetic_prompt,
)
from multirep.encoder import EncoderParams


def test_warmup_runs_excluded_from_statistics():
    calls = []

    def fn():
        calls.append(len(calls))

    samples = _timed(fn, warmup=3, runs=5)
    assert len(calls) == 8
    assert len(samples) == 5


def test_single_run_has_zero_std():
    report = BenchReport()
    report.add("x", "cfg", [1.234])
    assert report.rows[0][3] == 0.0


def test_csv_has_environment_comment_and_header():
    report = BenchReport(environment="host info")
    report.add(32, "parallel_k4", [1.0, 2.0])
    csv = report.to_csv()
    lines = csv.strip().splitlines()
    assert lines[0].startswith("# ")
    assert lines[1] == "axis,config,mean_ms,std_ms"
    assert lines[2].startswith("32,parallel_k4,")


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig(timed_runs=0)
    with pytest.raises(ValueError):
        BenchConfig(index_sizes=(100, 10))


def test_synthetic_prompt_shape(rng):
    prompt = synthetic_prompt(rng, vocab_size=50, length=32, k=4)
    assert len(prompt.mask_positions) == 4
    assert len(prompt.token_ids) == 32


def test_bench_encoding_emits_expected_rows():
    cfg = BenchConfig(warmup_runs=0, timed_runs=1, input_lengths=(16,),
                      k_values=(1, 2), hidden_dim=8, n_layers=1)
    params = EncoderParams.init(64, hidden_dim=8, n_layers=1, seed=0)
    report = bench_encoding(params, cfg)
    configs = [c for _, c, _, _ in report.rows]
    assert configs == ["parallel_k1", "sequential_cap1",
                       "parallel_k2", "sequential_cap2"]


def test_bench_search_and_storage_run():
    cfg = BenchConfig(warmup_runs=0, timed_runs=1, index_sizes=(50,),
                      k_values=(2,), hidden_dim=8, n_layers=1)
    assert bench_search(cfg).rows
    rows = bench_storage(cfg, include_compressed=False).rows
    assert any("vector_bytes" in c for _, c, _, _ in rows)


def test_storage_grows_linearly_with_index_size():
    cfg = BenchConfig(warmup_runs=0, timed_runs=1, index_sizes=(100, 200),
                      k_values=(2,), hidden_dim=8, n_layers=1)
    rows = bench_storage(cfg, include_compressed=False).rows
    vec = {a: m for a, c, m, _ in rows if c == "flat_kp2_vector_bytes"}
    assert vec["200"] == pytest.approx(2 * vec["100"])
