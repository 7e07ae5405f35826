"""Wall-clock latency and storage measurement harness.

Synthetic random-token inputs and random-vector indexes isolate systems
cost from retrieval quality. Warmup runs are excluded from statistics;
reports carry an environment fingerprint so numbers are never compared
across machines silently.
"""

from __future__ import annotations

import platform
import time
from dataclasses import dataclass, field

import numpy as np

from .encoder import EncoderParams, RepresentationSet, encode_parallel, encode_sequential
from .index import DenseIndex, build_dense, compress, search_compressed, search_dense
from .prompts import TokenizedPrompt
from .vocab import EOS_ID, MASK_ID, N_RESERVED, QUOTE_ID, TURN_END_ID


@dataclass
class BenchConfig:
    warmup_runs: int = 5
    timed_runs: int = 20
    input_lengths: tuple[int, ...] = (32, 64, 128)
    index_sizes: tuple[int, ...] = (1000, 10000)
    k_values: tuple[int, ...] = (1, 4, 8)
    hidden_dim: int = 128
    n_layers: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.timed_runs < 1:
            raise ValueError("timed_runs must be >= 1")
        if list(self.index_sizes) != sorted(self.index_sizes):
            raise ValueError("index_sizes must be ascending")


@dataclass
class BenchReport:
    rows: list[tuple[str, str, float, float]] = field(default_factory=list)
    environment: str = ""

    def add(self, axis, config: str, samples_ms: list[float]) -> None:
        mean = float(np.mean(samples_ms))
        std = float(np.std(samples_ms)) if len(samples_ms) > 1 else 0.0
        self.rows.append((str(axis), config, round(mean, 3), round(std, 3)))

    def to_csv(self) -> str:
        lines = [f"# {self.environment}", "axis,config,mean_ms,std_ms"]
        lines += [f"{a},{c},{m:.3f},{s:.3f}" for a, c, m, s in self.rows]
        return "\n".join(lines) + "\n"


def environment_string() -> str:
    return f"{platform.node()} {platform.system()} {platform.machine()} python{platform.python_version()}"


def _timed(fn, warmup: int, runs: int) -> list[float]:
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(runs):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1000.0)
    return samples


def synthetic_prompt(rng, vocab_size: int, length: int, k: int) -> TokenizedPrompt:
    body = rng.integers(N_RESERVED, vocab_size, size=max(1, length - k - 3)).tolist()
    start = len(body)
    ids = body + [MASK_ID] * k + [QUOTE_ID, TURN_END_ID, EOS_ID]
    return TokenizedPrompt(token_ids=ids, mask_positions=list(range(start, start + k)))


def bench_encoding(params: EncoderParams, cfg: BenchConfig) -> BenchReport:
    rng = np.random.default_rng(cfg.seed)
    report = BenchReport(environment=environment_string())
    for length in cfg.input_lengths:
        for k in cfg.k_values:
            prompt = synthetic_prompt(rng, params.vocab_size, length, k)
            report.add(length, f"parallel_k{k}",
                       _timed(lambda: encode_parallel(params, prompt),
                              cfg.warmup_runs, cfg.timed_runs))
            report.add(length, f"sequential_cap{k}",
                       _timed(lambda: encode_sequential(params, prompt, k),
                              cfg.warmup_runs, cfg.timed_runs))
    return report


def random_index(rng, n_docs: int, k_p: int, h: int) -> DenseIndex:
    reps = [
        (f"d{i:06d}", RepresentationSet(
            hidden=rng.standard_normal((k_p, h)).astype(np.float32), logits=None))
        for i in range(n_docs)
    ]
    return build_dense(reps)


def bench_search(cfg: BenchConfig, k_q: int = 4, n_centroids: int = 64,
                 n_probe: int = 4, include_compressed: bool = False) -> BenchReport:
    rng = np.random.default_rng(cfg.seed)
    report = BenchReport(environment=environment_string())
    for size in cfg.index_sizes:
        for k_p in cfg.k_values:
            index = random_index(rng, size, k_p, cfg.hidden_dim)
            q = RepresentationSet(
                hidden=rng.standard_normal((k_q, cfg.hidden_dim)).astype(np.float32),
                logits=None)
            report.add(size, f"flat_kq{k_q}_kp{k_p}",
                       _timed(lambda: search_dense(index, q, 1000),
                              cfg.warmup_runs, cfg.timed_runs))
            if include_compressed:
                cidx = compress(index, min(n_centroids, index.n_rows), cfg.seed)
                report.add(size, f"compressed_kq{k_q}_kp{k_p}_probe{n_probe}",
                           _timed(lambda: search_compressed(cidx, q, n_probe, 1000),
                                  cfg.warmup_runs, cfg.timed_runs))
    return report


def bench_storage(cfg: BenchConfig, include_compressed: bool = True,
                  n_centroids: int = 64) -> BenchReport:
    rng = np.random.default_rng(cfg.seed)
    report = BenchReport(environment=environment_string())
    for size in cfg.index_sizes:
        for k_p in cfg.k_values:
            index = random_index(rng, size, k_p, cfg.hidden_dim)
            rep = index.storage_report()
            report.add(size, f"flat_kp{k_p}_vector_bytes", [float(rep["vectors"])])
            report.add(size, f"flat_kp{k_p}_total_bytes", [float(rep["total"])])
            if include_compressed:
                cidx = compress(index, min(n_centroids, index.n_rows), cfg.seed)
                crep = cidx.storage_report()
                report.add(size, f"compressed_kp{k_p}_total_bytes", [float(crep["total"])])
    return report
