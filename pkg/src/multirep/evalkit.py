"""Retrieval metrics, TREC-format I/O, budget-grid sweeps, per-query
oracles, scoring decomposition, and feature-correlation statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import BadFormat, IncompleteGrid, LengthMismatch
from .scoring import ScoredList
from .vocab import Vocabulary, word_tokens

DEFAULT_GRID_AXES = (1, 2, 4, 8, 16)


# ------------------------------------------------------------- judgments

class Judgments:
    """(query_id, doc_id) -> integer relevance grade; unknown pairs are 0."""

    def __init__(self, grades: dict[tuple[str, str], int] | None = None):
        self.grades = {}
        for (qid, did), g in (grades or {}).items():
            if g < 0:
                raise BadFormat(f"negative grade for ({qid}, {did})")
            self.grades[(qid, did)] = int(g)

    def grade(self, qid: str, did: str) -> int:
        return self.grades.get((qid, did), 0)

    def doc_grades(self, qid: str) -> list[int]:
        return [g for (q, _), g in self.grades.items() if q == qid]

    @classmethod
    def load(cls, path) -> "Judgments":
        grades = {}
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 4:
                    raise BadFormat(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
                qid, _, did, grade = parts
                grades[(qid, did)] = int(grade)
        return cls(grades)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for (qid, did), g in sorted(self.grades.items()):
                f.write(f"{qid} 0 {did} {g}\n")


# --------------------------------------------------------------- metrics

def mrr_at_10(run: ScoredList, judg: Judgments) -> float:
    for rank, (did, _) in enumerate(run.items[:10], 1):
        if judg.grade(run.query_id, did) >= 1:
            return 1.0 / rank
    return 0.0


def ndcg_at_10(run: ScoredList, judg: Judgments) -> float:
    dcg = sum(
        judg.grade(run.query_id, did) / math.log2(rank + 1)
        for rank, (did, _) in enumerate(run.items[:10], 1)
    )
    ideal_grades = sorted(judg.doc_grades(run.query_id), reverse=True)[:10]
    idcg = sum(g / math.log2(rank + 1) for rank, g in enumerate(ideal_grades, 1))
    return dcg / idcg if idcg > 0 else 0.0


METRICS: dict[str, Callable[[ScoredList, Judgments], float]] = {
    "mrr@10": mrr_at_10,
    "ndcg@10": ndcg_at_10,
}


def per_query_metric(runs: dict[str, ScoredList], judg: Judgments,
                     metric: str = "mrr@10") -> dict[str, float]:
    fn = METRICS[metric]
    return {qid: fn(run, judg) for qid, run in runs.items()}


def aggregate_metric(runs: dict[str, ScoredList], judg: Judgments,
                     metric: str = "mrr@10") -> float:
    per_q = per_query_metric(runs, judg, metric)
    if not per_q:
        return 0.0
    # sum in query-id order for determinism
    return float(np.mean([per_q[q] for q in sorted(per_q)]))


# ---------------------------------------------------------------- TREC IO

def write_run(path, runs: dict[str, ScoredList], tag: str = "multirep") -> None:
    with open(path, "w", encoding="utf-8") as f:
        for qid in sorted(runs):
            for rank, (did, score) in enumerate(runs[qid].items, 1):
                f.write(f"{qid} Q0 {did} {rank} {score:.17g} {tag}\n")


def read_run(path) -> dict[str, ScoredList]:
    by_query: dict[str, list[tuple[int, str, float]]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise BadFormat(f"{path}:{lineno}: expected 6 columns, got {len(parts)}")
            qid, _, did, rank, score, _ = parts
            try:
                by_query.setdefault(qid, []).append((int(rank), did, float(score)))
            except ValueError:
                raise BadFormat(f"{path}:{lineno}: bad rank or score") from None
    out = {}
    for qid, rows in by_query.items():
        rows.sort()
        out[qid] = ScoredList(query_id=qid,
                              items=[(did, score) for _, did, score in rows],
                              cutoff=max(1000, len(rows)))
    return out


# ------------------------------------------------------------ budget grid

@dataclass
class BudgetGrid:
    axes: tuple[int, ...]
    mode: str
    cells: dict[tuple[int, int], float]
    per_query: dict[tuple[int, int], dict[str, float]] = field(default_factory=dict)

    def argmax_cell(self) -> tuple[int, int]:
        """Highest aggregate; ties break toward smaller k_q, then k_p."""
        return max(self.cells, key=lambda c: (self.cells[c], -c[0], -c[1]))


def sweep_budgets(run_cell: Callable[[int, int], dict[str, float]],
                  axes: Sequence[int] = DEFAULT_GRID_AXES,
                  mode: str = "hybrid") -> BudgetGrid:
    """Evaluate every (k_q, k_p) cell via the supplied closure.

    ``run_cell(k_q, k_p)`` must return per-query metric values for that
    budget pair (re-encoding queries and using the matching passage
    index is the closure's job).
    """
    if not axes:
        raise ValueError("axes must be nonempty")
    cells, per_query = {}, {}
    for kq in axes:
        for kp in axes:
            pq = run_cell(kq, kp)
            per_query[(kq, kp)] = pq
            vals = [pq[q] for q in sorted(pq)]
            cells[(kq, kp)] = float(np.mean(vals)) if vals else 0.0
    return BudgetGrid(tuple(axes), mode, cells, per_query)


@dataclass
class OracleResult:
    mode: str  # kq_only | kp_only | joint
    per_query_best: dict[str, tuple[int, int, float]]
    aggregate: float


def oracle(grid: BudgetGrid, mode: str,
           fixed: tuple[int, int] | None = None) -> OracleResult:
    """Per-query best budget under labels; ties go to the smallest budget.

    ``fixed`` pins the non-adapted axis for single-axis oracles; defaults
    to the grid's aggregate argmax cell.
    """
    if mode not in ("kq_only", "kp_only", "joint"):
        raise ValueError(f"unknown oracle mode {mode!r}")
    if not grid.per_query:
        raise IncompleteGrid("grid carries no per-query metrics")
    queries = sorted(next(iter(grid.per_query.values())))
    for cell, pq in grid.per_query.items():
        if sorted(pq) != queries:
            raise IncompleteGrid(f"cell {cell} has a different query set")
    if fixed is None:
        fixed = grid.argmax_cell()
    kq_star, kp_star = fixed

    if mode == "kq_only":
        candidates = [(kq, kp_star) for kq in grid.axes]
    elif mode == "kp_only":
        candidates = [(kq_star, kp) for kp in grid.axes]
    else:
        candidates = [(kq, kp) for kq in grid.axes for kp in grid.axes]
    missing = [c for c in candidates if c not in grid.per_query]
    if missing:
        raise IncompleteGrid(f"missing cells: {missing}")

    per_query_best = {}
    for q in queries:
        best = max(candidates,
                   key=lambda c: (grid.per_query[c][q], -c[0], -c[1]))
        per_query_best[q] = (best[0], best[1], grid.per_query[best][q])
    aggregate = float(np.mean([per_query_best[q][2] for q in queries]))
    return OracleResult(mode, per_query_best, aggregate)


def decompose_scoring(run_variant: Callable[[str], dict[str, float]]) -> dict[str, float]:
    """Aggregate the three dense variants under identical encodings.

    ``run_variant(name)`` returns per-query metrics for one of
    ``single``, ``meanpool``, ``maxsim``.
    """
    out = {}
    for variant in ("single", "meanpool", "maxsim"):
        pq = run_variant(variant)
        out[variant] = float(np.mean([pq[q] for q in sorted(pq)])) if pq else 0.0
    return out


# ------------------------------------------------------- query features

def query_features(text: str, vocab: Vocabulary | None = None) -> tuple[int, float]:
    """(token count, Shannon entropy in bits of the token distribution)."""
    tokens = word_tokens(text)
    if not tokens:
        return 0, 0.0
    _, counts = np.unique(tokens, return_counts=True)
    p = counts / counts.sum()
    entropy = float(-(p * np.log2(p)).sum())
    return len(tokens), entropy


def rank_correlation(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """(Spearman rho with average ranks, Kendall tau-b)."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    if xs.shape != ys.shape:
        raise LengthMismatch(f"{xs.shape} vs {ys.shape}")
    if xs.size < 2:
        raise LengthMismatch("need at least 2 points")
    rho = stats.spearmanr(xs, ys).statistic
    tau = stats.kendalltau(xs, ys, variant="b").statistic
    return float(rho), float(tau)


def bootstrap_correlation_ci(xs: Sequence[float], ys: Sequence[float],
                             n_resamples: int = 1000, seed: int = 0,
                             level: float = 0.95):
    """Percentile bootstrap intervals for (rho, tau)."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    rng = np.random.default_rng(seed)
    rhos, taus = [], []
    for _ in range(n_resamples):
        idx = rng.integers(0, xs.size, xs.size)
        if np.unique(xs[idx]).size < 2 or np.unique(ys[idx]).size < 2:
            continue
        r, t = rank_correlation(xs[idx], ys[idx])
        rhos.append(r)
        taus.append(t)
    lo, hi = 100 * (1 - level) / 2, 100 * (1 + level) / 2
    return (
        (float(np.percentile(rhos, lo)), float(np.percentile(rhos, hi))),
        (float(np.percentile(taus, lo)), float(np.percentile(taus, hi))),
    )
