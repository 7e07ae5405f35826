import pytest

from multirep.vocab import (
    EOS_ID,
    MASK_ID,
    N_RESERVED,
    QUOTE_ID,
    TURN_END_ID,
    UNK_ID,
    Vocabulary,
    build_tokenizer,
    word_tokens,
)


def test_reserved_ids_are_distinct_and_low():
    ids = [MASK_ID, QUOTE_ID, TURN_END_ID, EOS_ID, UNK_ID]
    assert sorted(ids) == list(range(N_RESERVED))


def test_word_tokens_lowercases_and_splits_punctuation():
    assert word_tokens('Hello, World!') == ["hello", ",", "world", "!"]
    assert word_tokens("don't stop") == ["don't", "stop"]


def test_build_tokenizer_orders_by_count_then_token():
    voc = build_tokenizer(["b b a a c"], max_vocab=100)
    # a and b tie on count 2; lexicographic tie-break puts a first
    assert voc.id_of("a") == N_RESERVED
    assert voc.id_of("b") == N_RESERVED + 1
    assert voc.id_of("c") == N_RESERVED + 2


def test_max_vocab_cap():
    voc = build_tokenizer(["a b c d e f g h"], max_vocab=N_RESERVED + 3)
    assert voc.size == N_RESERVED + 3


def test_unknown_token_maps_to_unk():
    voc = build_tokenizer(["known words only"], max_vocab=100)
    assert voc.encode("unseen")[0] == UNK_ID


def test_encode_decode_round_trip():
    voc = build_tokenizer(["alpha beta gamma"], max_vocab=100)
    ids = voc.encode("beta gamma alpha")
    assert voc.decode(ids) == "beta gamma alpha"


def test_save_load_round_trip(tmp_path):
    voc = build_tokenizer(["some words to store and reload"], max_vocab=100)
    path = tmp_path / "vocab.txt"
    voc.save(path)
    loaded = Vocabulary.load(path)
    assert loaded.token_to_id == voc.token_to_id
    assert loaded.size == voc.size


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        build_tokenizer([], max_vocab=100)
