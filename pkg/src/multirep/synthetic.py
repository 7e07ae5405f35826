"""Bundled synthetic retrieval task.

Each passage is a bag of distinct keywords dealt from a shared pool so
that every keyword appears in (nearly) the same number of passages; each
query is a noisy keyword subset of exactly one passage. Balancing the
keyword incidence keeps document scores comparable across the corpus,
which an untrained encoder cannot exploit and contrastive training can.

The training split is drawn separately from the evaluation queries and
covers every passage `train_reps` times, so each document receives both
positive and in-batch negative updates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .evalkit import Judgments
from .training import TrainItem


@dataclass
class SyntheticTask:
    passages: list[tuple[str, str]]
    queries: list[tuple[str, str]]
    qrels: Judgments
    train_items: list[TrainItem]


def _deal_passages(rng: np.random.Generator, n_passages: int, passage_len: int,
                   pool_size: int) -> np.ndarray:
    """Deal keyword ids into passages with balanced keyword incidence.

    Every keyword is placed in the deck the same number of times; after a
    shuffle, duplicate keywords within one passage are swapped with later
    cards so each passage holds distinct keywords.
    """
    total = n_passages * passage_len
    copies = max(1, math.ceil(total / pool_size))
    deck = np.repeat(np.arange(pool_size), copies)
    rng.shuffle(deck)
    deck = list(deck[:total])
    for start in range(0, total, passage_len):
        hand = deck[start:start + passage_len]
        for i in range(passage_len):
            if hand[i] in hand[:i]:
                for j in range(start + passage_len, total):
                    if deck[j] not in hand:
                        hand[i], deck[j] = deck[j], hand[i]
                        break
        deck[start:start + passage_len] = hand
    hands = np.array(deck).reshape(n_passages, passage_len)
    return hands


def generate(n_passages: int = 500, n_queries: int = 200, pool_size: int = 625,
             passage_len: int = 10, query_len: int = 9, noise_prob: float = 0.1,
             n_hard_negatives: int = 4, train_reps: int = 10, seed: int = 5,
             train_seed: int = 99) -> SyntheticTask:
    if query_len > passage_len:
        raise ValueError("query_len cannot exceed passage_len")
    rng = np.random.default_rng(seed)
    pool = [f"kw{i:04d}" for i in range(pool_size)]

    hands = _deal_passages(rng, n_passages, passage_len, pool_size)
    passages = []
    for i, hand in enumerate(hands):
        passages.append((f"p{i:04d}", " ".join(pool[w] for w in hand)))
    texts = {did: text for did, text in passages}
    pids = [did for did, _ in passages]

    def make_query(did: str, r: np.random.Generator) -> str:
        words = texts[did].split()
        picked = [words[i] for i in sorted(r.permutation(passage_len)[:query_len])]
        if r.random() < noise_prob:
            picked.append(pool[int(r.integers(pool_size))])
        return " ".join(picked)

    queries, grades = [], {}
    for j in range(n_queries):
        src = pids[int(rng.integers(n_passages))]
        qid = f"q{j:04d}"
        queries.append((qid, make_query(src, rng)))
        grades[(qid, src)] = 1

    train_rng = np.random.default_rng(train_seed)
    train_items = []
    for _ in range(train_reps):
        for did in pids:
            order = train_rng.permutation(n_passages)[:n_hard_negatives + 1]
            negs = [texts[pids[j]] for j in order if pids[j] != did]
            negs = negs[:n_hard_negatives]
            train_items.append(TrainItem(make_query(did, train_rng), texts[did], negs))
    train_rng.shuffle(train_items)

    return SyntheticTask(passages, queries, Judgments(grades), train_items)


def write_files(task: SyntheticTask, corpus_path, queries_path, qrels_path,
                train_path) -> None:
    with open(corpus_path, "w", encoding="utf-8") as f:
        for did, text in task.passages:
            f.write(json.dumps({"id": did, "text": text}) + "\n")
    with open(queries_path, "w", encoding="utf-8") as f:
        for qid, text in task.queries:
            f.write(json.dumps({"id": qid, "text": text}) + "\n")
    task.qrels.save(qrels_path)
    with open(train_path, "w", encoding="utf-8") as f:
        for it in task.train_items:
            f.write(json.dumps({"query": it.query_text, "positive": it.positive,
                                "negatives": it.hard_negatives}) + "\n")
