"""Run a local pretrained language model over instruction prompts and
export the hidden states and vocabulary logits at K appended mask
positions to a DRPR file."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .drpr_writer import DrprHeader, write_drpr


class ModelLoad(RuntimeError):
    pass


class TemplateMismatch(RuntimeError):
    pass


_PHRASING_TEXT = {
    "one_word": "one word",
    "a_few_words": "a few words",
    "three_words": "three words",
}


@dataclass
class ExportSpec:
    model: str  # local directory or model identifier resolvable offline
    k: int = 4
    target: str = "passage"  # "query" or "passage"
    phrasing: str = "a_few_words"
    batch_size: int = 8
    with_logits: bool = True
    top_logits: int = 0  # >0: keep top-t logits per row (sparse layout)
    max_length: int = 128
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.target not in ("query", "passage"):
            raise ValueError(f"unknown target {self.target!r}")
        if self.phrasing not in _PHRASING_TEXT:
            raise TemplateMismatch(f"unknown phrasing {self.phrasing!r}")


def render_text(text: str, spec: ExportSpec) -> str:
    count = _PHRASING_TEXT[spec.phrasing]
    name = spec.target
    return (
        "You are an AI assistant that can understand human language.\n"
        f'{name.capitalize()}: "{text}". Use {count} to represent the {name} '
        "in a retrieval task.\n"
        'The words are "'
    )


def _load(spec: ExportSpec):
    try:
        import torch
        from transformers import AutoModelForMaskedLM, AutoTokenizer
    except ImportError as e:  # pragma: no cover
        raise ModelLoad(f"torch/transformers unavailable: {e}") from None
    try:
        tokenizer = AutoTokenizer.from_pretrained(spec.model)
        model = AutoModelForMaskedLM.from_pretrained(spec.model)
    except Exception as e:
        raise ModelLoad(f"cannot load model {spec.model!r}: {e}") from None
    model.eval()
    if tokenizer.mask_token_id is None:
        raise TemplateMismatch(
            f"tokenizer for {spec.model!r} declares no mask token; "
            "a mask-position interface requires one"
        )
    return torch, tokenizer, model


def _suffix_ids(tokenizer) -> list[int]:
    # turn-end / end-of-sequence ids come from the model's own template
    ids = []
    for tok_id in (tokenizer.sep_token_id, tokenizer.eos_token_id):
        if tok_id is not None and tok_id not in ids:
            ids.append(tok_id)
    return ids


def _encode_prompt(tokenizer, text: str, spec: ExportSpec) -> list[int]:
    prompt = render_text(text, spec)
    body = tokenizer.encode(prompt, add_special_tokens=False)
    suffix = _suffix_ids(tokenizer)
    budget = spec.max_length - spec.k - len(suffix)
    if budget < 1:
        raise TemplateMismatch(
            f"max_length={spec.max_length} leaves no room for {spec.k} masks"
        )
    body = body[:budget]
    return body + [tokenizer.mask_token_id] * spec.k + suffix


def _forward_batch(torch, tokenizer, model, prompts: list[list[int]], k: int):
    pad = tokenizer.pad_token_id
    if pad is None:
        pad = 0
    width = max(len(p) for p in prompts)
    input_ids = torch.full((len(prompts), width), pad, dtype=torch.long)
    attention = torch.zeros((len(prompts), width), dtype=torch.long)
    mask_pos = []
    for i, p in enumerate(prompts):
        input_ids[i, : len(p)] = torch.tensor(p, dtype=torch.long)
        attention[i, : len(p)] = 1
        positions = [j for j, t in enumerate(p) if t == tokenizer.mask_token_id]
        if len(positions) < k:
            raise TemplateMismatch("mask positions lost during encoding")
        mask_pos.append(positions[-k:])
    with torch.no_grad():
        out = model(input_ids=input_ids, attention_mask=attention,
                    output_hidden_states=True)
    hidden_all = out.hidden_states[-1]
    logits_all = out.logits
    for i, positions in enumerate(mask_pos):
        idx = torch.tensor(positions, dtype=torch.long)
        hidden = hidden_all[i, idx].to(torch.float32).cpu().numpy()
        logits = logits_all[i, idx].to(torch.float32).cpu().numpy()
        yield hidden, logits


def read_items_jsonl(path) -> list[tuple[str, str]]:
    items = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            items.append((str(obj["id"]), str(obj["text"])))
    return items


def export(spec: ExportSpec, items: Iterable[tuple[str, str]], out_path) -> DrprHeader:
    """Encode (item_id, text) pairs and write one DRPR item per input."""
    torch, tokenizer, model = _load(spec)
    items = list(items)
    h_dim = int(model.config.hidden_size)
    v_dim = int(model.config.vocab_size)

    def rows():
        for start in range(0, len(items), spec.batch_size):
            chunk = items[start : start + spec.batch_size]
            prompts = [_encode_prompt(tokenizer, text, spec) for _, text in chunk]
            reps = _forward_batch(torch, tokenizer, model, prompts, spec.k)
            for (item_id, _), (hidden, logits) in zip(chunk, reps):
                yield item_id, hidden, (logits if spec.with_logits else None)

    return write_drpr(out_path, rows(), spec.k, h_dim, v_dim,
                      with_logits=spec.with_logits, sparse_topt=spec.top_logits)
