"""End-to-end drivers wiring encoder, indexes, scoring, and evaluation.

Everything here composes through plain data (text items in, runs out)
so the CLI and the test suite share one code path.
"""

from __future__ import annotations

import json

import numpy as np

from . import evalkit
from .encoder import DenoiseSchedule, EncoderParams, RepresentationSet, \
    encode_multistep, encode_parallel, encode_sequential
from .errors import BadFormat
from .index import DenseIndex, SparseIndex, build_dense, build_sparse, \
    search_dense, search_sparse
from .prompts import DEFAULT_MAX_LEN, Phrasing, Target, default_template, render_prompt
from .scoring import ContentWordFilter, ScoredList, hybrid_fuse, sparse_project
from .vocab import Vocabulary


def load_jsonl_items(path, target: str) -> list[tuple[str, str]]:
    """Queries: {id, text}. Passages: {id, title?, text}, title prepended."""
    items = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                text = obj["text"]
                if target == "passage" and obj.get("title"):
                    text = obj["title"] + " " + text
                items.append((str(obj["id"]), text))
            except (KeyError, json.JSONDecodeError) as e:
                raise BadFormat(f"{path}:{lineno}: {e}") from None
    return items


def phrasing_for(k: int) -> Phrasing:
    return Phrasing.ONE_WORD if k == 1 else Phrasing.A_FEW_WORDS


def encode_items(params: EncoderParams, vocab: Vocabulary,
                 items: list[tuple[str, str]], target: Target | str, k: int,
                 mode: str = "parallel", steps: int = 1, cap_n: int | None = None,
                 max_len: int = DEFAULT_MAX_LEN):
    """Encode (id, text) pairs; yields (id, RepresentationSet)."""
    target = Target(target) if isinstance(target, str) else target
    template = default_template(phrasing_for(k), target)
    for item_id, text in items:
        prompt = render_prompt(text, template, k, vocab, max_len)
        if mode == "parallel":
            reps = encode_parallel(params, prompt)
        elif mode == "multistep":
            reps = encode_multistep(params, prompt, DenoiseSchedule.balanced(k, steps))
        elif mode == "sequential":
            reps = encode_sequential(params, prompt, cap_n or k)
        else:
            raise ValueError(f"unknown encode mode {mode!r}")
        yield item_id, reps


def pool_rows(reps: RepresentationSet) -> RepresentationSet:
    """Collapse to a single mean row (logits dropped)."""
    return RepresentationSet(hidden=reps.hidden.mean(axis=0, keepdims=True),
                             logits=None, source=reps.source)


def search_batch(query_reps: list[tuple[str, RepresentationSet]],
                 dense_idx: DenseIndex | None, sparse_idx: SparseIndex | None,
                 flt: ContentWordFilter | None, mode: str,
                 cutoff: int = 1000) -> dict[str, ScoredList]:
    """Run dense, sparse, or hybrid search for every query."""
    runs = {}
    for qid, reps in query_reps:
        if mode in ("dense", "hybrid"):
            d = search_dense(dense_idx, reps, cutoff)
            d.query_id = qid
        if mode in ("sparse", "hybrid"):
            s = search_sparse(sparse_idx, sparse_project(reps, flt), cutoff)
            s.query_id = qid
        if mode == "dense":
            runs[qid] = d
        elif mode == "sparse":
            runs[qid] = s
        else:
            runs[qid] = hybrid_fuse(d, s)
    return runs


class EvalSetup:
    """Caches per-budget encodings and indexes for sweeps and oracles."""

    def __init__(self, params, vocab, flt, queries, corpus, qrels,
                 metric="mrr@10", cutoff=1000, max_len=DEFAULT_MAX_LEN):
        self.params = params
        self.vocab = vocab
        self.flt = flt
        self.queries = queries
        self.corpus = corpus
        self.qrels = qrels
        self.metric = metric
        self.cutoff = cutoff
        self.max_len = max_len
        self._query_reps: dict[int, list] = {}
        self._indexes: dict[int, tuple[DenseIndex, SparseIndex]] = {}

    def query_reps(self, k_q: int):
        if k_q not in self._query_reps:
            self._query_reps[k_q] = list(encode_items(
                self.params, self.vocab, self.queries, Target.QUERY, k_q,
                max_len=self.max_len))
        return self._query_reps[k_q]

    def indexes(self, k_p: int):
        if k_p not in self._indexes:
            reps = list(encode_items(self.params, self.vocab, self.corpus,
                                     Target.PASSAGE, k_p, max_len=self.max_len))
            self._indexes[k_p] = (build_dense(reps), build_sparse(reps, self.flt))
        return self._indexes[k_p]

    def run_cell(self, k_q: int, k_p: int, mode: str = "hybrid") -> dict[str, float]:
        dense_idx, sparse_idx = self.indexes(k_p)
        runs = search_batch(self.query_reps(k_q), dense_idx, sparse_idx,
                            self.flt, mode, self.cutoff)
        return evalkit.per_query_metric(runs, self.qrels, self.metric)

    def evaluate(self, k_q: int, k_p: int, mode: str = "hybrid") -> float:
        pq = self.run_cell(k_q, k_p, mode)
        return float(np.mean([pq[q] for q in sorted(pq)])) if pq else 0.0


def sweep(setup: EvalSetup, axes=evalkit.DEFAULT_GRID_AXES,
          mode: str = "hybrid") -> evalkit.BudgetGrid:
    return evalkit.sweep_budgets(lambda kq, kp: setup.run_cell(kq, kp, mode),
                                 axes, mode)


def decompose(setup: EvalSetup, k_q: int, k_p: int) -> dict[str, float]:
    """Dense variants: single (k=1), mean-pooled multi, MaxSim multi."""

    def run_variant(variant: str) -> dict[str, float]:
        if variant == "single":
            dense_idx, _ = setup.indexes(1)
            q_reps = setup.query_reps(1)
        elif variant == "meanpool":
            reps = list(encode_items(setup.params, setup.vocab, setup.corpus,
                                     Target.PASSAGE, k_p, max_len=setup.max_len))
            dense_idx = build_dense([(d, pool_rows(r)) for d, r in reps])
            q_reps = [(q, pool_rows(r)) for q, r in setup.query_reps(k_q)]
        else:
            dense_idx, _ = setup.indexes(k_p)
            q_reps = setup.query_reps(k_q)
        runs = search_batch(q_reps, dense_idx, None, None, "dense", setup.cutoff)
        return evalkit.per_query_metric(runs, setup.qrels, setup.metric)

    return evalkit.decompose_scoring(run_variant)
