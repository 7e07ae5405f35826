import itertools
import math

import numpy as np
import pytest

from multirep.errors import BadFormat, IncompleteGrid, LengthMismatch
from multirep.evalkit import (
    BudgetGrid,
    Judgments,
    aggregate_metric,
    bootstrap_correlation_ci,
    mrr_at_10,
    ndcg_at_10,
    oracle,
    per_query_metric,
    query_features,
    rank_correlation,
    read_run,
    sweep_budgets,
    write_run,
)
from multirep.scoring import ScoredList


def _run(qid, docs):
    return ScoredList(qid, [(d, float(s)) for d, s in docs])


def _judg(pairs):
    return Judgments({(q, d): g for q, d, g in pairs})


def test_mrr_hand_cases():
    j = _judg([("q", "rel", 1)])
    # relevant at rank 3 -> 1/3
    run = _run("q", [("a", 3), ("b", 2), ("rel", 1)])
    assert mrr_at_10(run, j) == pytest.approx(1 / 3)
    # no relevant in top 10 -> 0
    run = _run("q", [(f"d{i}", 20 - i) for i in range(10)] + [("rel", 1)])
    assert mrr_at_10(run, j) == 0.0
    # relevant first -> 1
    assert mrr_at_10(_run("q", [("rel", 2), ("a", 1)]), j) == 1.0


def test_ndcg_hand_cases():
    j = _judg([("q", "rel", 1)])
    # single relevant doc at rank 2: dcg = 1/log2(3), idcg = 1 -> 0.6309
    run = _run("q", [("a", 2), ("rel", 1)])
    assert ndcg_at_10(run, j) == pytest.approx(1 / math.log2(3), abs=1e-4)
    assert ndcg_at_10(run, j) == pytest.approx(0.6309, abs=1e-4)
    # ideal ranking -> 1.0
    assert ndcg_at_10(_run("q", [("rel", 2), ("a", 1)]), j) == 1.0
    # nothing judged relevant -> 0
    assert ndcg_at_10(_run("q", [("a", 1)]), _judg([("q", "x", 0)])) == 0.0


def _ndcg_permutation_oracle(ranked_grades, all_grades):
    dcg = sum(g / math.log2(r + 1) for r, g in enumerate(ranked_grades[:10], 1))
    best = 0.0
    pool = sorted(all_grades, reverse=True)[:10]
    for perm in set(itertools.permutations(pool)):
        cand = sum(g / math.log2(r + 1) for r, g in enumerate(perm, 1))
        best = max(best, cand)
    return dcg / best if best > 0 else 0.0


def test_ndcg_matches_permutation_oracle(rng):
    for _ in range(100):
        n = int(rng.integers(2, 7))
        grades = rng.integers(0, 4, size=n)
        docs = [f"d{i}" for i in range(n)]
        j = _judg([("q", d, int(g)) for d, g in zip(docs, grades)])
        order = rng.permutation(n)
        run = _run("q", [(docs[i], n - r) for r, i in enumerate(order)])
        ranked_grades = [int(grades[i]) for i in order]
        expected = _ndcg_permutation_oracle(ranked_grades, grades.tolist())
        assert ndcg_at_10(run, j) == pytest.approx(expected, abs=1e-12)


def test_qrels_round_trip(tmp_path):
    j = _judg([("q1", "d1", 2), ("q1", "d2", 0), ("q2", "d3", 1)])
    path = tmp_path / "qrels.txt"
    j.save(path)
    loaded = Judgments.load(path)
    assert loaded.grade("q1", "d1") == 2
    assert loaded.grade("q2", "d3") == 1
    assert loaded.grade("q9", "d9") == 0  # unjudged defaults to 0


def test_run_file_round_trip(tmp_path):
    runs = {"q1": _run("q1", [("d2", 2.5), ("d1", 1.25)]),
            "q2": _run("q2", [("d9", 0.125)])}
    path = tmp_path / "run.txt"
    write_run(path, runs, tag="t")
    back = read_run(path)
    assert back["q1"].items == runs["q1"].items
    assert back["q2"].items == runs["q2"].items


def test_malformed_run_line_names_line_number(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text("q1 Q0 d1 1 0.5 tag\nq1 Q0 d2 oops\n")
    with pytest.raises(BadFormat, match=":2"):
        read_run(path)


def test_aggregate_is_mean_over_queries():
    j = _judg([("q1", "r1", 1), ("q2", "r2", 1)])
    runs = {"q1": _run("q1", [("r1", 1)]),          # mrr 1.0
            "q2": _run("q2", [("x", 2), ("r2", 1)])}  # mrr 0.5
    assert aggregate_metric(runs, j, "mrr@10") == pytest.approx(0.75)
    pq = per_query_metric(runs, j, "mrr@10")
    assert pq == {"q1": 1.0, "q2": 0.5}


def _toy_grid():
    axes = (1, 2)
    per_query = {
        (1, 1): {"a": 0.1, "b": 0.9},
        (1, 2): {"a": 0.5, "b": 0.2},
        (2, 1): {"a": 0.3, "b": 0.4},
        (2, 2): {"a": 0.2, "b": 0.8},
    }
    cells = {c: float(np.mean(list(pq.values()))) for c, pq in per_query.items()}
    return BudgetGrid(axes, "hybrid", cells, per_query)


def test_oracle_matches_bruteforce_enumeration():
    grid = _toy_grid()
    fixed = grid.argmax_cell()
    result = oracle(grid, "joint", fixed=fixed)
    # brute force: per query, max over all cells
    for q in ("a", "b"):
        best = max(grid.per_query[c][q] for c in grid.per_query)
        assert result.per_query_best[q][2] == best
    assert result.aggregate == pytest.approx(
        np.mean([max(grid.per_query[c][q] for c in grid.per_query)
                 for q in ("a", "b")]))


def test_oracle_dominance_chain():
    grid = _toy_grid()
    fixed = grid.argmax_cell()
    joint = oracle(grid, "joint", fixed=fixed).aggregate
    kq = oracle(grid, "kq_only", fixed=fixed).aggregate
    kp = oracle(grid, "kp_only", fixed=fixed).aggregate
    base = grid.cells[fixed]
    assert joint >= kq >= base
    assert joint >= kp >= base


def test_oracle_tie_prefers_smallest_budget():
    per_query = {(1, 1): {"a": 0.5}, (2, 1): {"a": 0.5},
                 (1, 2): {"a": 0.5}, (2, 2): {"a": 0.5}}
    grid = BudgetGrid((1, 2), "hybrid",
                      {c: 0.5 for c in per_query}, per_query)
    result = oracle(grid, "joint", fixed=(1, 1))
    assert result.per_query_best["a"][:2] == (1, 1)


def test_oracle_incomplete_grid_rejected():
    grid = _toy_grid()
    del grid.per_query[(2, 2)]["b"]
    with pytest.raises(IncompleteGrid):
        oracle(grid, "joint")


def test_sweep_budgets_builds_full_grid():
    def run_cell(kq, kp):
        return {"a": kq * 0.1, "b": kp * 0.1}

    grid = sweep_budgets(run_cell, axes=(1, 2), mode="dense")
    assert set(grid.cells) == {(1, 1), (1, 2), (2, 1), (2, 2)}
    assert grid.cells[(2, 2)] == pytest.approx(0.2)
    assert grid.argmax_cell() == (2, 2)


def test_argmax_tie_prefers_smallest_cell():
    cells = {(1, 1): 0.5, (1, 2): 0.5, (2, 1): 0.5, (2, 2): 0.5}
    grid = BudgetGrid((1, 2), "hybrid", cells, {})
    assert grid.argmax_cell() == (1, 1)


def _kendall_tau_b_oracle(xs, ys):
    """O(n^2) pair counting with the tie correction."""
    n = len(xs)
    conc = disc = tx = ty = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx, dy = xs[i] - xs[j], ys[i] - ys[j]
            if dx == 0 and dy == 0:
                tx += 1
                ty += 1
            elif dx == 0:
                tx += 1
            elif dy == 0:
                ty += 1
            elif dx * dy > 0:
                conc += 1
            else:
                disc += 1
    n0 = n * (n - 1) / 2
    denom = math.sqrt((n0 - tx) * (n0 - ty))
    return (conc - disc) / denom


def _spearman_oracle(xs, ys):
    def rank(v):
        order = sorted(range(len(v)), key=lambda i: v[i])
        ranks = [0.0] * len(v)
        i = 0
        while i < len(v):
            j = i
            while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
                j += 1
            avg = (i + j) / 2 + 1
            for t in range(i, j + 1):
                ranks[order[t]] = avg
            i = j + 1
        return ranks

    rx, ry = rank(xs), rank(ys)
    mx, my = np.mean(rx), np.mean(ry)
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    den = math.sqrt(sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry))
    return num / den


def test_correlations_match_pair_counting_oracle(rng):
    for _ in range(20):
        xs = rng.integers(0, 8, size=50).astype(float).tolist()  # heavy ties
        ys = (rng.integers(0, 8, size=50).astype(float)
              + np.array(xs) * 0.5).tolist()
        rho, tau = rank_correlation(xs, ys)
        assert rho == pytest.approx(_spearman_oracle(xs, ys), abs=1e-9)
        assert tau == pytest.approx(_kendall_tau_b_oracle(xs, ys), abs=1e-9)


def test_monotone_inputs_give_unit_correlation():
    xs = list(range(20))
    ys = [x * 2.0 + 1.0 for x in xs]
    rho, tau = rank_correlation(xs, ys)
    assert rho == 1.0 and tau == 1.0
    rho, tau = rank_correlation(xs, ys[::-1])
    assert rho == -1.0 and tau == -1.0


def test_correlation_length_mismatch():
    with pytest.raises(LengthMismatch):
        rank_correlation([1, 2], [1, 2, 3])


def test_bootstrap_ci_brackets_point_estimate(rng):
    xs = rng.standard_normal(40).tolist()
    ys = (np.array(xs) + 0.3 * rng.standard_normal(40)).tolist()
    rho, tau = rank_correlation(xs, ys)
    (rlo, rhi), (tlo, thi) = bootstrap_correlation_ci(xs, ys, n_resamples=500, seed=0)
    assert rlo <= rho <= rhi
    assert tlo <= tau <= thi
    # deterministic given the seed
    again = bootstrap_correlation_ci(xs, ys, n_resamples=500, seed=0)
    assert again == ((rlo, rhi), (tlo, thi))


def test_query_features():
    n_tokens, entropy = query_features("a a b b")
    assert n_tokens == 4
    assert entropy == pytest.approx(1.0)  # two equally likely symbols
    assert query_features("same same")[1] == 0.0
