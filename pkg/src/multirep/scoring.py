"""Pure scoring functions over representation sets.

Dense scoring is raw inner product (no normalization): MaxSim averages
each query row's best passage-row match; mean-pool dots pooled rows.
Sparse scoring max-pools log(1+ReLU(logit)) over rows per vocabulary
id, restricted to a content-word filter. Hybrid fuses dense and sparse
ranked lists by equal-weight interpolation after per-list min-max
normalization.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

import numpy as np

from .encoder import RepresentationSet
from .errors import DimensionMismatch, FilterMismatch, MissingLogits, QueryIdMismatch
from .vocab import N_RESERVED, Vocabulary


@dataclass
class ScoredList:
    query_id: str
    items: list[tuple[str, float]]  # sorted: score desc, doc_id asc
    cutoff: int = 1000

    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.items]


def ranked(query_id: str, scores: dict[str, float], cutoff: int) -> ScoredList:
    """Deterministic ranking: score descending, doc_id ascending on ties."""
    items = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:cutoff]
    return ScoredList(query_id=query_id, items=items, cutoff=cutoff)


@dataclass
class ContentWordFilter:
    allowed_ids: frozenset[int]
    name: str = "default"

    def __contains__(self, vid: int) -> bool:
        return vid in self.allowed_ids

    def sorted_ids(self) -> np.ndarray:
        return np.array(sorted(self.allowed_ids), dtype=np.int64)


def load_stopwords() -> frozenset[str]:
    text = importlib.resources.files("multirep.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(w for w in text.split() if w)


def build_content_filter(vocab: Vocabulary, stopwords: frozenset[str] | None = None,
                         name: str = "default") -> ContentWordFilter:
    """Keep lowercase content tokens: no stopwords, punctuation, or reserved ids."""
    stop = load_stopwords() if stopwords is None else stopwords
    allowed = set()
    for tok, vid in vocab.token_to_id.items():
        if tok in stop:
            continue
        if not any(c.isalnum() for c in tok):
            continue
        if any(c.isupper() for c in tok):
            continue
        allowed.add(vid)
    allowed -= set(range(N_RESERVED))
    return ContentWordFilter(allowed_ids=frozenset(allowed), name=name)


@dataclass
class SparseVector:
    entries: dict[int, float] = field(default_factory=dict)
    filter_name: str = "default"


def dense_maxsim(q: RepresentationSet, p: RepresentationSet) -> float:
    """(1/K_q) sum_i max_j <h_i^q, h_j^p>, raw inner products."""
    if q.dim != p.dim:
        raise DimensionMismatch(f"hidden dims differ: {q.dim} vs {p.dim}")
    sims = q.hidden.astype(np.float64) @ p.hidden.astype(np.float64).T
    return float(sims.max(axis=1).mean())


def dense_meanpool(q: RepresentationSet, p: RepresentationSet) -> float:
    if q.dim != p.dim:
        raise DimensionMismatch(f"hidden dims differ: {q.dim} vs {p.dim}")
    return float(
        q.hidden.astype(np.float64).mean(axis=0)
        @ p.hidden.astype(np.float64).mean(axis=0)
    )


def sparse_weights(logits: np.ndarray) -> np.ndarray:
    """Per-vocab max over rows of log(1 + ReLU(logit))."""
    return np.log1p(np.maximum(logits.astype(np.float64), 0.0)).max(axis=0)


def sparse_project(r: RepresentationSet, flt: ContentWordFilter) -> SparseVector:
    if r.logits is None:
        raise MissingLogits("representation set has no logit rows")
    ids = flt.sorted_ids()
    weights = sparse_weights(r.logits[:, ids])
    nz = weights > 0.0
    entries = {int(v): float(w) for v, w in zip(ids[nz], weights[nz])}
    return SparseVector(entries=entries, filter_name=flt.name)


def sparse_score(q: SparseVector, p: SparseVector) -> float:
    if q.filter_name != p.filter_name:
        raise FilterMismatch(f"filters differ: {q.filter_name} vs {p.filter_name}")
    if len(q.entries) > len(p.entries):
        q, p = p, q
    return float(sum(w * p.entries[v] for v, w in q.entries.items() if v in p.entries))


def minmax_normalize(items: list[tuple[str, float]]) -> dict[str, float]:
    """Min-max over one list; a degenerate list (max == min) maps to 0.5."""
    if not items:
        return {}
    vals = [s for _, s in items]
    lo, hi = min(vals), max(vals)
    if hi == lo:
        return {d: 0.5 for d, _ in items}
    return {d: (s - lo) / (hi - lo) for d, s in items}


def hybrid_fuse(dense: ScoredList, sparse: ScoredList) -> ScoredList:
    """Equal-weight interpolation over the union of both top lists.

    A doc missing from one list contributes 0 from that side.
    """
    if dense.query_id != sparse.query_id:
        raise QueryIdMismatch(f"{dense.query_id} vs {sparse.query_id}")
    nd = minmax_normalize(dense.items)
    ns = minmax_normalize(sparse.items)
    fused = {d: 0.5 * nd.get(d, 0.0) + 0.5 * ns.get(d, 0.0) for d in set(nd) | set(ns)}
    return ranked(dense.query_id, fused, max(dense.cutoff, sparse.cutoff))
