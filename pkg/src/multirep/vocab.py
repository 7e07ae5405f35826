"""Word-level tokenizer with a frequency-capped vocabulary.

Reserved token ids occupy the low id range and never collide with
corpus tokens. The on-disk format is plain UTF-8: a 5-line header
declaring the reserved ids, then one token per line whose id equals
its line index.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

# Reserved ids, in fixed order.
MASK_ID = 0
QUOTE_ID = 1
TURN_END_ID = 2
EOS_ID = 3
UNK_ID = 4
N_RESERVED = 5

RESERVED_NAMES = ("<MASK>", "<QUOTE>", "<TURN_END>", "<EOS>", "<UNK>")

# Words (letters/digits/apostrophes) or single punctuation marks.
_TOKEN_RE = re.compile(r"[a-z0-9']+|[^\sa-z0-9']")


def word_tokens(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation boundaries."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Vocabulary:
    """Token <-> id mapping with reserved low ids."""

    token_to_id: dict[str, int] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return N_RESERVED + len(self.token_to_id)

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def encode(self, text: str) -> list[int]:
        return [self.id_of(t) for t in word_tokens(text)]

    def tokens_by_id(self) -> list[str]:
        """Token strings ordered by id, reserved names included."""
        out = list(RESERVED_NAMES) + [""] * len(self.token_to_id)
        for tok, i in self.token_to_id.items():
            out[i] = tok
        return out

    def decode(self, ids: Iterable[int]) -> str:
        table = self.tokens_by_id()
        return " ".join(table[i] for i in ids)

    def save(self, path) -> None:
        lines = [f"#reserved:{name}={i}" for i, name in enumerate(RESERVED_NAMES)]
        table = self.tokens_by_id()
        lines.extend(table[N_RESERVED:])
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        from .errors import BadFormat

        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
        if len(lines) < N_RESERVED:
            raise BadFormat(f"vocabulary file too short: {path}")
        for i, name in enumerate(RESERVED_NAMES):
            expect = f"#reserved:{name}={i}"
            if lines[i] != expect:
                raise BadFormat(f"bad reserved header line {i}: {lines[i]!r}")
        mapping = {tok: N_RESERVED + j for j, tok in enumerate(lines[N_RESERVED:]) if tok}
        return cls(mapping)


def build_tokenizer(corpus: Iterator[str] | Iterable[str], max_vocab: int) -> Vocabulary:
    """Assign ids to the ``max_vocab`` most frequent corpus tokens.

    Frequency ties break lexicographically, so the result is deterministic
    for a given corpus regardless of iteration internals.
    """
    counts: Counter[str] = Counter()
    seen_any = False
    for text in corpus:
        seen_any = True
        counts.update(word_tokens(text))
    if not seen_any:
        raise ValueError("corpus is empty")
    budget = max(0, max_vocab - N_RESERVED)  # max_vocab counts reserved ids too
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:budget]
    mapping = {tok: N_RESERVED + i for i, (tok, _) in enumerate(ranked)}
    return Vocabulary(mapping)
