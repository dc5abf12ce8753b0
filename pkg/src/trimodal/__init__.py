"""Tri-modal hybrid retrieval: dense semantic, TF-IDF lexical and entity-graph
vectors fused into one normalized index, with LLM-guided reranking and BEIR
evaluation."""

from trimodal.documents import Document
from trimodal.encoders import EncoderProfile, TestEncoderProvider, embed_texts, make_provider
from trimodal.entities import (
    EntityCatalog,
    build_entity_catalog,
    entity_idf,
    extract_entities,
    graph_embedding,
)
from trimodal.fusion import (
    FusionConfig,
    HybridIndex,
    HybridVector,
    TriModalEmbedding,
    TriModalEncoder,
    build_index,
    fuse,
    normalize_block,
    per_modality_scores,
    search,
    search_batch,
)
from trimodal.lexical import SparseVector, Vocabulary, build_vocabulary, term_idf, tfidf_vector, tokenize
from trimodal.rerank import MockLLM, ModalityWeights, Reranker, weighted_rescore
from trimodal.storage import load_index, save_index

__version__ = "0.1.0"

__all__ = [
    "Document",
    "EncoderProfile",
    "EntityCatalog",
    "FusionConfig",
    "HybridIndex",
    "HybridVector",
    "MockLLM",
    "ModalityWeights",
    "Reranker",
    "SparseVector",
    "TestEncoderProvider",
    "TriModalEmbedding",
    "TriModalEncoder",
    "Vocabulary",
    "build_entity_catalog",
    "build_index",
    "build_vocabulary",
    "embed_texts",
    "entity_idf",
    "extract_entities",
    "fuse",
    "graph_embedding",
    "load_index",
    "make_provider",
    "normalize_block",
    "per_modality_scores",
    "save_index",
    "search",
    "search_batch",
    "term_idf",
    "tfidf_vector",
    "tokenize",
    "weighted_rescore",
]
