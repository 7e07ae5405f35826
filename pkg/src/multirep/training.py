"""Contrastive fine-tuning with a dual InfoNCE objective.

The dense term scores candidates with MaxSim at temperature tau; the
sparse term scores the max-pooled log(1+ReLU(logit)) vectors at tau=1.
Gradients are computed analytically (used by the finite-difference
check in the test suite) and applied with plain SGD.

Candidate pool per query: its own positive, its own hard negatives,
and every passage belonging to the other queries in the batch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .encoder import EncoderParams, backward_from_positions, forward_hidden
from .errors import BadIndex, EmptyBatch
from .prompts import DEFAULT_MAX_LEN, Phrasing, Target, default_template, render_prompt
from .scoring import ContentWordFilter
from .vocab import Vocabulary


@dataclass
class TrainItem:
    query_text: str
    positive: str
    hard_negatives: list[str] = field(default_factory=list)


@dataclass
class TrainConfig:
    tau: float = 0.01
    batch_size: int = 8
    epochs: int = 1
    learning_rate: float = 0.05
    k_q: int = 4
    k_p: int = 4
    seed: int = 42
    negatives_per_query: int = 15
    max_len: int = DEFAULT_MAX_LEN

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.k_q < 1 or self.k_p < 1:
            raise ValueError("k_q and k_p must be >= 1")


def load_train_jsonl(path) -> list[TrainItem]:
    items = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            items.append(TrainItem(obj["query"], obj["positive"],
                                   list(obj.get("negatives", []))))
    return items


def _log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max()
    return shifted - np.log(np.exp(shifted).sum())


def loss_dense(scores, positive_index: int, tau: float) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    if not 0 <= positive_index < scores.size:
        raise BadIndex(f"positive index {positive_index} out of range")
    return float(-_log_softmax(scores / tau)[positive_index])


def loss_sparse(scores, positive_index: int) -> float:
    return loss_dense(scores, positive_index, 1.0)


def _phrasing_for(k: int) -> Phrasing:
    return Phrasing.ONE_WORD if k == 1 else Phrasing.A_FEW_WORDS


class _Encoded:
    """Forward caches plus float64 mask-row views for one text."""

    def __init__(self, params, vocab, text, target, k, max_len):
        template = default_template(_phrasing_for(k), target)
        prompt = render_prompt(text, template, k, vocab, max_len)
        x, caches = forward_hidden(params, prompt.token_ids, return_caches=True)
        self.positions = prompt.mask_positions
        self.caches = caches
        self.hidden = x[prompt.mask_positions]  # (k, H) float64
        self.logits = self.hidden @ params.head  # (k, V) float64
        self.d_hidden = np.zeros_like(self.hidden)
        self.d_logits = np.zeros_like(self.logits)


def _accumulate(total: dict, grads: dict) -> None:
    total["emb"] += grads["emb"]
    total["head"] += grads["head"]
    for a, b in zip(total["mix_w"], grads["mix_w"]):
        a += b
    for a, b in zip(total["mix_b"], grads["mix_b"]):
        a += b


def batch_loss_and_grads(params: EncoderParams, batch: list[TrainItem],
                         cfg: TrainConfig, vocab: Vocabulary,
                         flt: ContentWordFilter):
    """Mean combined loss over the batch plus analytic parameter grads.

    Returns (mean_loss, per_item_losses, grads) where per_item_losses is
    a list of (dense_loss, sparse_loss).
    """
    if not batch:
        raise EmptyBatch("empty training batch")
    n = len(batch)

    queries = [_Encoded(params, vocab, it.query_text, Target.QUERY, cfg.k_q, cfg.max_len)
               for it in batch]
    passages: list[_Encoded] = []
    owner_slices = []
    pos_index = []
    for it in batch:
        start = len(passages)
        pos_index.append(start)
        texts = [it.positive] + it.hard_negatives[: cfg.negatives_per_query]
        for t in texts:
            passages.append(_Encoded(params, vocab, t, Target.PASSAGE, cfg.k_p, cfg.max_len))
        owner_slices.append((start, len(passages)))
    m = len(passages)

    # dense MaxSim scores and the argmax passage row per (query, passage, query-row)
    s_dense = np.zeros((n, m))
    arg_rows = np.zeros((n, m, cfg.k_q), dtype=np.int64)
    for i, q in enumerate(queries):
        for j, p in enumerate(passages):
            sims = q.hidden @ p.hidden.T  # (k_q, k_p)
            arg = sims.argmax(axis=1)  # lowest passage row wins ties
            arg_rows[i, j] = arg
            s_dense[i, j] = sims[np.arange(cfg.k_q), arg].mean()

    # sparse weight vectors over the filtered vocabulary
    fids = flt.sorted_ids()
    relu_q = [np.maximum(q.logits[:, fids], 0.0) for q in queries]
    relu_p = [np.maximum(p.logits[:, fids], 0.0) for p in passages]
    w_q = np.stack([np.log1p(r).max(axis=0) for r in relu_q])  # (n, F)
    w_p = np.stack([np.log1p(r).max(axis=0) for r in relu_p])  # (m, F)
    argk_q = [np.log1p(r).argmax(axis=0) for r in relu_q]
    argk_p = [np.log1p(r).argmax(axis=0) for r in relu_p]
    s_sparse = w_q @ w_p.T  # (n, m)

    per_item = []
    d_sd = np.zeros((n, m))
    d_ss = np.zeros((n, m))
    for i in range(n):
        pi = pos_index[i]
        ld = loss_dense(s_dense[i], pi, cfg.tau)
        ls = loss_sparse(s_sparse[i], pi)
        per_item.append((ld, ls))
        soft_d = np.exp(_log_softmax(s_dense[i] / cfg.tau))
        soft_s = np.exp(_log_softmax(s_sparse[i]))
        d_sd[i] = soft_d / cfg.tau / n
        d_sd[i, pi] -= 1.0 / cfg.tau / n
        d_ss[i] = soft_s / n
        d_ss[i, pi] -= 1.0 / n
    mean_loss = float(np.mean([ld + ls for ld, ls in per_item]))

    # dense backward: route each query row's gradient to its argmax passage row
    for i, q in enumerate(queries):
        for j, p in enumerate(passages):
            g = d_sd[i, j] / cfg.k_q
            if g == 0.0:
                continue
            arg = arg_rows[i, j]
            q.d_hidden += g * p.hidden[arg]
            np.add.at(p.d_hidden, arg, g * q.hidden)

    # sparse backward: d score flows through the argmax row at each vocab id
    d_wq = d_ss @ w_p  # (n, F)
    d_wp = d_ss.T @ w_q  # (m, F)
    cols = np.arange(fids.size)
    for i, q in enumerate(queries):
        deriv = 1.0 / (1.0 + relu_q[i][argk_q[i], cols])
        active = q.logits[argk_q[i], fids] > 0.0
        q.d_logits[argk_q[i], fids] += np.where(active, d_wq[i] * deriv, 0.0)
    for j, p in enumerate(passages):
        deriv = 1.0 / (1.0 + relu_p[j][argk_p[j], cols])
        active = p.logits[argk_p[j], fids] > 0.0
        p.d_logits[argk_p[j], fids] += np.where(active, d_wp[j] * deriv, 0.0)

    grads = {
        "emb": np.zeros_like(params.emb),
        "mix_w": [np.zeros_like(w) for w in params.mix_w],
        "mix_b": [np.zeros_like(b) for b in params.mix_b],
        "head": np.zeros_like(params.head),
    }
    for enc in queries + passages:
        _accumulate(grads, backward_from_positions(
            params, enc.caches, enc.positions, enc.d_hidden, enc.d_logits))
    return mean_loss, per_item, grads


def train_step(params: EncoderParams, batch: list[TrainItem], cfg: TrainConfig,
               vocab: Vocabulary, flt: ContentWordFilter):
    """One SGD update; returns (new params, per-item (dense, sparse) losses)."""
    _, per_item, grads = batch_loss_and_grads(params, batch, cfg, vocab, flt)
    out = params.copy()
    lr = cfg.learning_rate
    out.emb -= lr * grads["emb"]
    out.head -= lr * grads["head"]
    for w, gw in zip(out.mix_w, grads["mix_w"]):
        w -= lr * gw
    for b, gb in zip(out.mix_b, grads["mix_b"]):
        b -= lr * gb
    return out, per_item


def train(params: EncoderParams, items: list[TrainItem], cfg: TrainConfig,
          vocab: Vocabulary, flt: ContentWordFilter):
    """Deterministic epoch loop; returns (trained params, per-epoch mean loss)."""
    items = list(items)
    if not items:
        raise EmptyBatch("no training items")
    rng = np.random.default_rng(cfg.seed)
    curve = []
    current = params
    for _ in range(cfg.epochs):
        order = rng.permutation(len(items))
        losses = []
        for start in range(0, len(items), cfg.batch_size):
            batch = [items[i] for i in order[start:start + cfg.batch_size]]
            current, per_item = train_step(current, batch, cfg, vocab, flt)
            losses.extend(ld + ls for ld, ls in per_item)
        curve.append(float(np.mean(losses)))
    return current, curve
