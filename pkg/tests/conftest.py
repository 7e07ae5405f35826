import numpy as np
import pytest

from multirep.encoder import EncoderParams
from multirep.vocab import Vocabulary, build_tokenizer

CORPUS = [
    "the quick brown fox jumps over the lazy dog",
    "a corm is an underground plant stem that stores food",
    "retrieval systems rank documents by relevance to a query",
    "sparse vectors live on the vocabulary simplex",
    "dense vectors live in a learned embedding space",
    "hybrid search interpolates dense and sparse scores",
    "compression trades accuracy for storage",
    "benchmarks measure latency and throughput",
]


@pytest.fixture(scope="session")
def small_vocab() -> Vocabulary:
    return build_tokenizer(CORPUS, max_vocab=512)


@pytest.fixture(scope="session")
def small_params(small_vocab) -> EncoderParams:
    return EncoderParams.init(small_vocab.size, hidden_dim=16, n_layers=2, seed=3)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
