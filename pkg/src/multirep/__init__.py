"""Multi-representation retrieval engine.

Masked-position encoding with K parallel representations per text,
dense MaxSim / sparse max-pool / hybrid scoring, contrastive training,
multi-vector indexing with centroid+residual compression, budget
sweeps and oracles, and a latency/storage benchmark harness.
"""

from .encoder import (DenoiseSchedule, EncoderParams, RepresentationSet,
                      encode_multistep, encode_parallel, encode_sequential)
from .prompts import PromptTemplate, Phrasing, Target, TokenizedPrompt, \
    default_template, render_prompt
from .scoring import (ContentWordFilter, ScoredList, SparseVector,
                      build_content_filter, dense_maxsim, dense_meanpool,
                      hybrid_fuse, sparse_project, sparse_score)
from .vocab import Vocabulary, build_tokenizer

__version__ = "0.1.0"

__all__ = [
    "DenoiseSchedule", "EncoderParams", "RepresentationSet",
    "encode_multistep", "encode_parallel", "encode_sequential",
    "PromptTemplate", "Phrasing", "Target", "TokenizedPrompt",
    "default_template", "render_prompt",
    "ContentWordFilter", "ScoredList", "SparseVector",
    "build_content_filter", "dense_maxsim", "dense_meanpool",
    "hybrid_fuse", "sparse_project", "sparse_score",
    "Vocabulary", "build_tokenizer",
]
