import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multirep.encoder import RepresentationSet
from multirep.errors import DimensionMismatch, FilterMismatch, QueryIdMismatch
from multirep.scoring import (
    ContentWordFilter,
    ScoredList,
    build_content_filter,
    dense_maxsim,
    dense_meanpool,
    hybrid_fuse,
    minmax_normalize,
    ranked,
    sparse_project,
    sparse_score,
    sparse_weights,
)
from multirep.vocab import N_RESERVED, build_tokenizer


def _rep(hidden, logits=None):
    return RepresentationSet(hidden=np.asarray(hidden, dtype=np.float32),
                             logits=None if logits is None
                             else np.asarray(logits, dtype=np.float32))


def maxsim_bruteforce(q, p):
    """Independent double-loop oracle."""
    total = 0.0
    for qi in q.astype(np.float64):
        best = -math.inf
        for pj in p.astype(np.float64):
            best = max(best, float(np.dot(qi, pj)))
        total += best
    return total / q.shape[0]


def test_maxsim_matches_bruteforce_oracle(rng):
    for _ in range(200):
        kq, kp, h = rng.integers(1, 17), rng.integers(1, 17), rng.integers(2, 65)
        q = rng.standard_normal((kq, h)).astype(np.float32)
        p = rng.standard_normal((kp, h)).astype(np.float32)
        got = dense_maxsim(_rep(q), _rep(p))
        assert abs(got - maxsim_bruteforce(q, p)) < 1e-12


def test_single_row_reduces_to_inner_product(rng):
    for _ in range(100):
        h = rng.integers(2, 33)
        q = rng.standard_normal((1, h)).astype(np.float32)
        p = rng.standard_normal((1, h)).astype(np.float32)
        ip = float(q.astype(np.float64)[0] @ p.astype(np.float64)[0])
        assert dense_maxsim(_rep(q), _rep(p)) == ip
        assert dense_meanpool(_rep(q), _rep(p)) == ip


def test_maxsim_permutation_invariance(rng):
    q = rng.standard_normal((5, 8)).astype(np.float32)
    p = rng.standard_normal((7, 8)).astype(np.float32)
    base = dense_maxsim(_rep(q), _rep(p))
    assert dense_maxsim(_rep(q[::-1].copy()), _rep(p)) == base
    assert dense_maxsim(_rep(q), _rep(p[::-1].copy())) == base


def test_maxsim_duplicate_row_invariance(rng):
    q = rng.standard_normal((3, 8)).astype(np.float32)
    p = rng.standard_normal((4, 8)).astype(np.float32)
    p_dup = np.vstack([p, p[2]])
    assert dense_maxsim(_rep(q), _rep(p)) == dense_maxsim(_rep(q), _rep(p_dup))


def test_dimension_mismatch_raises(rng):
    with pytest.raises(DimensionMismatch):
        dense_maxsim(_rep(rng.standard_normal((2, 4))),
                     _rep(rng.standard_normal((2, 5))))


def test_sparse_weight_hand_cases():
    # log(1 + ReLU(x)): 0 -> 0, e-1 -> 1, negatives clamp to 0
    logits = np.array([[0.0, math.e - 1.0, -5.0]])
    w = sparse_weights(logits)
    assert w[0] == 0.0
    assert w[1] == pytest.approx(1.0, abs=1e-12)
    assert w[2] == 0.0


def test_sparse_weights_max_pool_over_rows():
    logits = np.array([[1.0, 0.0], [0.0, 2.0]])
    w = sparse_weights(logits)
    assert w[0] == pytest.approx(math.log(2.0))
    assert w[1] == pytest.approx(math.log(3.0))


def _random_filter(rng, v, n=None):
    n = n or v // 2
    ids = rng.choice(np.arange(N_RESERVED, v), size=n, replace=False)
    return ContentWordFilter(allowed_ids=frozenset(int(i) for i in ids))


def test_sparse_pipeline_matches_densify_and_dot_oracle(rng):
    for _ in range(200):
        v, k = int(rng.integers(10, 60)), int(rng.integers(1, 5))
        flt = _random_filter(rng, v)
        lq = rng.standard_normal((k, v)).astype(np.float32)
        lp = rng.standard_normal((k, v)).astype(np.float32)
        sq = sparse_project(_rep(np.zeros((k, 4)), lq), flt)
        sp = sparse_project(_rep(np.zeros((k, 4)), lp), flt)
        got = sparse_score(sq, sp)
        # oracle: materialize filtered weight vectors and take a plain dot
        dq, dp = np.zeros(v), np.zeros(v)
        for vec, logit in ((dq, lq), (dp, lp)):
            w = np.log1p(np.maximum(logit.astype(np.float64), 0.0)).max(axis=0)
            for vid in range(v):
                if vid in flt.allowed_ids:
                    vec[vid] = w[vid]
        assert abs(got - float(dq @ dp)) < 1e-9


def test_sparse_project_drops_zero_entries(rng):
    flt = ContentWordFilter(allowed_ids=frozenset({5, 6, 7}))
    logits = np.array([[0.0] * 5 + [0.0, -1.0, 2.0]])
    sv = sparse_project(_rep(np.zeros((1, 2)), logits), flt)
    assert set(sv.entries) == {7}


def test_sparse_filter_mismatch_raises(rng):
    a = ContentWordFilter(allowed_ids=frozenset({5}), name="a")
    b = ContentWordFilter(allowed_ids=frozenset({5}), name="b")
    sa = sparse_project(_rep(np.zeros((1, 2)), np.ones((1, 6))), a)
    sb = sparse_project(_rep(np.zeros((1, 2)), np.ones((1, 6))), b)
    with pytest.raises(FilterMismatch):
        sparse_score(sa, sb)


def test_content_filter_excludes_stopwords_punct_reserved():
    voc = build_tokenizer(["the cat sat , on a mat !"], max_vocab=100)
    flt = build_content_filter(voc)
    assert voc.id_of("cat") in flt
    assert voc.id_of("mat") in flt
    assert voc.id_of("the") not in flt  # stopword
    assert voc.id_of(",") not in flt  # punctuation
    for rid in range(N_RESERVED):
        assert rid not in flt


def test_minmax_degenerate_list_maps_to_half():
    assert minmax_normalize([("a", 3.0), ("b", 3.0)]) == {"a": 0.5, "b": 0.5}


def test_minmax_endpoints():
    out = minmax_normalize([("a", 1.0), ("b", 3.0), ("c", 2.0)])
    assert out == {"a": 0.0, "b": 1.0, "c": 0.5}


def test_hybrid_hand_case():
    dense = ScoredList("q", [("d1", 2.0), ("d2", 1.0), ("d3", 0.0)])
    sparse = ScoredList("q", [("d3", 4.0), ("d2", 2.0), ("d1", 0.0)])
    fused = hybrid_fuse(dense, sparse)
    scores = dict(fused.items)
    assert scores["d1"] == pytest.approx(0.5)  # 0.5*1.0 + 0.5*0.0
    assert scores["d2"] == pytest.approx(0.5)  # 0.5*0.5 + 0.5*0.5
    assert scores["d3"] == pytest.approx(0.5)  # 0.5*0.0 + 0.5*1.0
    # three-way tie breaks by doc id ascending
    assert fused.doc_ids() == ["d1", "d2", "d3"]


def test_hybrid_missing_doc_contributes_zero():
    dense = ScoredList("q", [("d1", 1.0), ("d2", 0.0)])
    sparse = ScoredList("q", [("d3", 1.0), ("d2", 0.0)])
    fused = dict(hybrid_fuse(dense, sparse).items)
    assert fused["d1"] == pytest.approx(0.5)
    assert fused["d3"] == pytest.approx(0.5)
    assert fused["d2"] == pytest.approx(0.0)


def test_hybrid_query_id_mismatch():
    with pytest.raises(QueryIdMismatch):
        hybrid_fuse(ScoredList("q1", [("d", 1.0)]), ScoredList("q2", [("d", 1.0)]))


def test_hybrid_affine_invariance(rng):
    """Positive-affine rescales of either raw list never change the ranking."""
    for _ in range(200):
        n = int(rng.integers(2, 12))
        docs = [f"d{i}" for i in range(n)]
        ds = list(zip(docs, rng.standard_normal(n).tolist()))
        ss = list(zip(docs, rng.standard_normal(n).tolist()))
        base = hybrid_fuse(ScoredList("q", ds), ScoredList("q", ss)).doc_ids()
        a, b = float(rng.uniform(0.1, 5.0)), float(rng.uniform(-3.0, 3.0))
        ds2 = [(d, a * s + b) for d, s in ds]
        c, e = float(rng.uniform(0.1, 5.0)), float(rng.uniform(-3.0, 3.0))
        ss2 = [(d, c * s + e) for d, s in ss]
        assert hybrid_fuse(ScoredList("q", ds2), ScoredList("q", ss2)).doc_ids() == base


def test_ranked_ties_break_by_doc_id_and_cutoff():
    out = ranked("q", {"b": 1.0, "a": 1.0, "c": 2.0}, cutoff=2)
    assert out.doc_ids() == ["c", "a"]


@given(st.lists(st.tuples(st.integers(0, 50), st.floats(-100, 100)),
                min_size=1, max_size=30))
@settings(max_examples=100, deadline=None)
def test_minmax_output_always_in_unit_interval(pairs):
    items = [(f"d{i}", s) for i, (_, s) in enumerate(pairs)]
    out = minmax_normalize(items)
    assert all(0.0 <= v <= 1.0 for v in out.values())
