"""Lexicon-grounded lexical code-switching for conversational replies."""

from .ann_index import HnswIndex, HnswParams, NeighborHit, brute_force_query, build_index
from .chat import ChatProviderConfig, RemoteChatProvider, ScriptedChatProvider, make_chat_provider
from .embedding import (
    EmbeddingProviderConfig,
    EmbeddingVector,
    HashingEmbedder,
    RemoteEmbedder,
    cosine_similarity,
    embed_batch,
    make_embedder,
)
from .extraction import BaselineTagger, ExternalTagger, extract_content_words, tokenize
from .lexicon import Lexicon, LexiconEntry, load_lexicon
from .metrics import (
    EvalRecord,
    SummaryStats,
    export_report,
    pearson,
    semantic_similarity,
    summarize,
    token_edit_distance,
)
from .pipeline import (
    DictionaryCue,
    RewritePipeline,
    RewriteTrace,
    ValidationReport,
    VarietyConfig,
    assemble_rewrite_prompt,
    generate_base,
    retrieve_cues,
    rewrite,
    run_condition,
    validate_rewrite,
    zero_shot_rewrite,
)

__version__ = "0.1.0"
