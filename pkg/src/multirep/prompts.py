"""Retrieval prompt rendering.

A prompt wraps the input text in a three-part chat scaffold (system,
user, assistant prefix) and appends K mask positions capped by a fixed
suffix: closing quote, turn-end, eos. Only the input text is ever
truncated; the scaffold and masks survive intact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import TooLong, UnknownTemplate
from .vocab import EOS_ID, MASK_ID, QUOTE_ID, TURN_END_ID, Vocabulary, word_tokens

DEFAULT_MAX_LEN = 256
SUFFIX_LEN = 3  # closing quote, turn-end, eos


class Phrasing(Enum):
    ONE_WORD = "one_word"
    A_FEW_WORDS = "a_few_words"
    THREE_WORDS = "three_words"


class Target(Enum):
    QUERY = "query"
    PASSAGE = "passage"


_COUNT_TEXT = {
    Phrasing.ONE_WORD: ("one word", "word is"),
    Phrasing.A_FEW_WORDS: ("a few words", "words are"),
    Phrasing.THREE_WORDS: ("three words", "words are"),
}


@dataclass(frozen=True)
class PromptTemplate:
    system: str
    user: str  # contains {text}
    assistant_prefix: str  # ends with an opening quote
    phrasing: Phrasing
    target: Target

    def render(self, text: str) -> str:
        return "\n".join([self.system, self.user.format(text=text), self.assistant_prefix])


def default_template(phrasing: Phrasing | str, target: Target | str) -> PromptTemplate:
    try:
        phrasing = Phrasing(phrasing)
        target = Target(target)
    except ValueError as e:
        raise UnknownTemplate(str(e)) from None
    count, verb = _COUNT_TEXT[phrasing]
    name = target.value
    user = (
        f'{name.capitalize()}: "{{text}}". Use {count} to represent the {name} '
        f"in a retrieval task. Make sure your {verb} in lowercase."
    )
    return PromptTemplate(
        system="You are an AI assistant that can understand human language.",
        user=user,
        assistant_prefix=f'The {verb} "',
        phrasing=phrasing,
        target=target,
    )


@dataclass
class TokenizedPrompt:
    token_ids: list[int]
    mask_positions: list[int]
    suffix_len: int = SUFFIX_LEN
    rendered_text: str = field(default="", repr=False)

    @property
    def k(self) -> int:
        return len(self.mask_positions)


def _encode_scaffold(vocab: Vocabulary, text: str) -> list[int]:
    # Quote characters in the scaffold map to the reserved quote id.
    return [QUOTE_ID if t == '"' else vocab.id_of(t) for t in word_tokens(text)]


def render_prompt(
    text: str,
    template: PromptTemplate,
    k: int,
    vocab: Vocabulary,
    max_len: int = DEFAULT_MAX_LEN,
) -> TokenizedPrompt:
    """Tokenize ``text`` inside ``template`` with ``k`` trailing masks."""
    if not text:
        raise ValueError("text is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    if not isinstance(template, PromptTemplate):
        raise UnknownTemplate(f"not a PromptTemplate: {template!r}")

    user_pre, user_post = template.user.split("{text}")
    sys_ids = _encode_scaffold(vocab, template.system)
    pre_ids = _encode_scaffold(vocab, user_pre)
    post_ids = _encode_scaffold(vocab, user_post)
    asst_ids = _encode_scaffold(vocab, template.assistant_prefix)
    text_ids = vocab.encode(text)

    scaffold = len(sys_ids) + len(pre_ids) + len(post_ids) + len(asst_ids)
    budget = max_len - scaffold - k - SUFFIX_LEN
    if budget < 1:
        raise TooLong(
            f"prompt scaffold plus {k} masks needs {scaffold + k + SUFFIX_LEN + 1} "
            f"tokens but max_len is {max_len}"
        )
    kept_text = text_ids[:budget]

    prompt_ids = sys_ids + pre_ids + kept_text + post_ids + asst_ids
    mask_start = len(prompt_ids)
    token_ids = prompt_ids + [MASK_ID] * k + [QUOTE_ID, TURN_END_ID, EOS_ID]
    kept_words = word_tokens(text)[: len(kept_text)]
    rendered = template.render(" ".join(kept_words) if len(kept_text) < len(text_ids) else text)
    return TokenizedPrompt(
        token_ids=token_ids,
        mask_positions=list(range(mask_start, mask_start + k)),
        suffix_len=SUFFIX_LEN,
        rendered_text=rendered,
    )


def prompt_prefix_ids(prompt: TokenizedPrompt) -> list[int]:
    """Tokens before the mask block (used by the sequential baseline)."""
    return prompt.token_ids[: prompt.mask_positions[0]]
