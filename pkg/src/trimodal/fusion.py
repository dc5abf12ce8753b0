"""Modality fusion, the hybrid document index and exact top-k search."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from trimodal.documents import Document
from trimodal.encoders import EmbeddingProvider, EmbeddingTransportError, embed_texts
from trimodal.entities import (
    EntityCatalog,
    EntityExtractor,
    entity_idf,
    extract_entities,
    graph_embedding,
)
from trimodal.lexical import SparseVector, Vocabulary, tfidf_vector

log = logging.getLogger(__name__)

NORM_FLOOR = 1e-12
MODALITIES = ("semantic", "lexical", "graph")


class FingerprintMismatchError(ValueError):
    def __init__(self, index_fp: str, query_fp: str) -> None:
        super().__init__(
            f"index/query encoder mismatch (index {index_fp[:12]}, query {query_fp[:12]})"
        )


class IndexBuildError(RuntimeError):
    def __init__(self, stage: str, doc_id: str, cause: BaseException) -> None:
        super().__init__(f"{stage} stage failed on doc_id {doc_id!r}: {cause}")
        self.stage = stage
        self.doc_id = doc_id
        self.cause = cause


def normalize_block(v: np.ndarray) -> np.ndarray:
    """L2-normalize; vectors with norm <= 1e-12 come back unchanged."""
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm <= NORM_FLOOR:
        return v.copy()
    return v / norm


@dataclass(frozen=True)
class FusionConfig:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("modality scales must be non-negative")
        if self.alpha + self.beta + self.gamma <= 0:
            raise ValueError("at least one modality scale must be positive")

    @property
    def scales(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)


@dataclass(frozen=True)
class TriModalEmbedding:
    semantic: np.ndarray
    lexical: SparseVector
    graph: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.semantic.shape[0], self.lexical.dim, self.graph.shape[0])

    def blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.semantic, self.lexical.to_dense(), self.graph)


@dataclass(frozen=True)
class HybridVector:
    values: np.ndarray
    is_zero: bool = False
    fingerprint: str | None = None


def fuse(
    tri: TriModalEmbedding,
    cfg: FusionConfig,
    dims: tuple[int, int, int] | None = None,
    fingerprint: str | None = None,
) -> HybridVector:
    """Scale each normalized block, concatenate, and L2-normalize the result."""
    if dims is not None and tri.dims != tuple(dims):
        raise ValueError(f"modality dimensions {tri.dims} do not match configured {tuple(dims)}")
    parts = [
        scale * normalize_block(block) for scale, block in zip(cfg.scales, tri.blocks())
    ]
    concat = np.concatenate(parts)
    norm = float(np.linalg.norm(concat))
    if norm <= NORM_FLOOR:
        return HybridVector(np.zeros_like(concat), is_zero=True, fingerprint=fingerprint)
    return HybridVector(concat / norm, is_zero=False, fingerprint=fingerprint)


def _digest(payload: object) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def encoder_fingerprint(
    profile_fingerprint: str, vocabulary: Vocabulary, catalog: EntityCatalog
) -> str:
    """Hash of everything a query must share with the index to be comparable."""
    return _digest(
        {
            "encoder": profile_fingerprint,
            "vocab": [vocabulary.n_docs, list(vocabulary.terms), list(vocabulary.df)],
            "entities": [catalog.n_docs, list(catalog.entities), list(catalog.df)],
        }
    )


class TriModalEncoder:
    """Embeds texts in all three modalities against a fixed vocabulary and catalog."""

    def __init__(
        self,
        provider: EmbeddingProvider,
        vocabulary: Vocabulary,
        catalog: EntityCatalog,
        extractor: EntityExtractor = extract_entities,
    ) -> None:
        self.provider = provider
        self.vocabulary = vocabulary
        self.catalog = catalog
        self.extractor = extractor
        self.fingerprint = encoder_fingerprint(provider.profile.fingerprint, vocabulary, catalog)
        self._entity_cache: dict[str, np.ndarray] = {}

    @property
    def dims(self) -> tuple[int, int, int]:
        ds = self.provider.profile.dim
        return (ds, self.vocabulary.dim, ds)

    def _prefetch_entities(self, entity_lists: Sequence[Sequence[str]]) -> None:
        missing = sorted(
            {
                e
                for ents in entity_lists
                for e in ents
                if e not in self._entity_cache and entity_idf(self.catalog, e) > 0.0
            }
        )
        if missing:
            for ent, vec in zip(missing, embed_texts(self.provider, missing)):
                self._entity_cache[ent] = vec

    def _encode_entity(self, entity: str) -> np.ndarray:
        vec = self._entity_cache.get(entity)
        if vec is None:
            vec = embed_texts(self.provider, [entity])[0]
            self._entity_cache[entity] = vec
        return vec

    def semantic(self, texts: Sequence[str]) -> list[np.ndarray]:
        return embed_texts(self.provider, texts)

    def lexical(self, text: str) -> SparseVector:
        return tfidf_vector(self.vocabulary, text)

    def graph(self, entities: Sequence[str]) -> np.ndarray:
        return graph_embedding(
            self.catalog, entities, self._encode_entity, self.provider.profile.dim
        )

    def encode(
        self,
        texts: Sequence[str],
        entity_lists: Sequence[Sequence[str]] | None = None,
    ) -> list[TriModalEmbedding]:
        if entity_lists is None:
            entity_lists = [self.extractor(t) for t in texts]
        sem = self.semantic(texts)
        self._prefetch_entities(entity_lists)
        return [
            TriModalEmbedding(s, self.lexical(t), self.graph(ents))
            for s, t, ents in zip(sem, texts, entity_lists)
        ]

    def encode_query(self, text: str, cfg: FusionConfig) -> tuple[TriModalEmbedding, HybridVector]:
        tri = self.encode([text])[0]
        return tri, fuse(tri, cfg, self.dims, self.fingerprint)


@dataclass
class HybridIndex:
    doc_ids: tuple[str, ...]
    matrix: np.ndarray
    config: FusionConfig
    vocabulary: Vocabulary
    catalog: EntityCatalog
    encoder_profile: str
    ds: int
    fingerprints: dict[str, str] = field(default_factory=dict)
    _row_of: dict[str, int] = field(init=False, repr=False)
    _id_rank: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.doc_ids = tuple(self.doc_ids)
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise ValueError("doc_ids must be unique")
        expected = (len(self.doc_ids), 2 * self.ds + self.vocabulary.dim)
        if self.matrix.shape != expected:
            raise ValueError(f"matrix shape {self.matrix.shape} != {expected}")
        self._row_of = {d: i for i, d in enumerate(self.doc_ids)}
        n = len(self.doc_ids)
        self._id_rank = np.empty(n, dtype=np.int64)
        self._id_rank[sorted(range(n), key=self.doc_ids.__getitem__)] = np.arange(n)
        self.matrix.setflags(write=False)

    def __len__(self) -> int:
        return len(self.doc_ids)

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.ds, self.vocabulary.dim, self.ds)

    @property
    def fingerprint(self) -> str:
        return encoder_fingerprint(self.encoder_profile, self.vocabulary, self.catalog)

    @property
    def zero_rows(self) -> np.ndarray:
        return np.nonzero(~self.matrix.any(axis=1))[0]

    def row(self, doc_id: str) -> np.ndarray:
        try:
            return self.matrix[self._row_of[doc_id]]
        except KeyError:
            raise KeyError(f"unknown doc_id {doc_id!r}") from None

    def block_slices(self) -> tuple[slice, slice, slice]:
        ds, v = self.ds, self.vocabulary.dim
        return (slice(0, ds), slice(ds, ds + v), slice(ds + v, 2 * ds + v))


def build_index(
    corpus: Sequence[Document],
    encoder: TriModalEncoder,
    cfg: FusionConfig,
    entity_overrides: Mapping[str, list[str]] | None = None,
    batch_size: int = 256,
    fingerprints: Mapping[str, str] | None = None,
) -> HybridIndex:
    """Embed, fuse and stack every document, in corpus order."""
    if not corpus:
        raise ValueError("empty corpus")
    ids = [d.doc_id for d in corpus]
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise ValueError(f"duplicate doc_id {dup!r} in corpus")
    if encoder.vocabulary.n_docs != len(corpus) or encoder.catalog.n_docs != len(corpus):
        raise ValueError("vocabulary/catalog were not built from this corpus")
    overrides = entity_overrides or {}
    rows = np.zeros((len(corpus), sum(encoder.dims)))
    for start in range(0, len(corpus), batch_size):
        chunk = corpus[start : start + batch_size]
        texts = [d.full_text for d in chunk]
        ents = [
            list(overrides[d.doc_id]) if d.doc_id in overrides else encoder.extractor(t)
            for d, t in zip(chunk, texts)
        ]
        try:
            sem = encoder.semantic(texts)
        except EmbeddingTransportError as exc:
            raise IndexBuildError("semantic", chunk[0].doc_id, exc) from exc
        except Exception as exc:
            raise IndexBuildError("semantic", _first_failing(encoder, chunk), exc) from exc
        try:
            encoder._prefetch_entities(ents)
        except Exception as exc:
            raise IndexBuildError("graph", chunk[0].doc_id, exc) from exc
        for offset, (doc, s, text, doc_ents) in enumerate(zip(chunk, sem, texts, ents)):
            stage = "lexical"
            try:
                t = encoder.lexical(text)
                stage = "graph"
                g = encoder.graph(doc_ents)
                stage = "fuse"
                hv = fuse(TriModalEmbedding(s, t, g), cfg, encoder.dims)
            except Exception as exc:
                raise IndexBuildError(stage, doc.doc_id, exc) from exc
            rows[start + offset] = hv.values
    return HybridIndex(
        doc_ids=tuple(ids),
        matrix=rows,
        config=cfg,
        vocabulary=encoder.vocabulary,
        catalog=encoder.catalog,
        encoder_profile=encoder.provider.profile.fingerprint,
        ds=encoder.provider.profile.dim,
        fingerprints=dict(fingerprints or {}),
    )


def _first_failing(encoder: TriModalEncoder, chunk: Sequence[Document]) -> str:
    for doc in chunk:
        try:
            encoder.semantic([doc.full_text])
        except Exception:
            return doc.doc_id
    return chunk[0].doc_id


def _check_query(index: HybridIndex, q: HybridVector) -> None:
    if q.fingerprint is not None and q.fingerprint != index.fingerprint:
        raise FingerprintMismatchError(index.fingerprint, q.fingerprint)
    if q.values.shape != (index.matrix.shape[1],):
        raise ValueError(
            f"query dimension {q.values.shape} does not match index width {index.matrix.shape[1]}"
        )


def _top_k(index: HybridIndex, scores: np.ndarray, k: int) -> list[tuple[str, float]]:
    n = scores.shape[0]
    if k >= n:
        cand = np.arange(n)
    else:
        threshold = -np.partition(-scores, k - 1)[k - 1]
        cand = np.nonzero(scores >= threshold)[0]
    order = cand[np.lexsort((index._id_rank[cand], -scores[cand]))][:k]
    return [(index.doc_ids[i], float(scores[i])) for i in order]


def search(index: HybridIndex, q: HybridVector, k: int) -> list[tuple[str, float]]:
    """Exact top-k by dot product; ties go to the smaller doc_id."""
    return search_batch(index, [q], k)[0]


def search_batch(
    index: HybridIndex, queries: Sequence[HybridVector], k: int, chunk: int = 256
) -> list[list[tuple[str, float]]]:
    if k < 1:
        raise ValueError("k must be >= 1")
    for q in queries:
        _check_query(index, q)
    results: list[list[tuple[str, float]]] = []
    for start in range(0, len(queries), chunk):
        block = np.stack([q.values for q in queries[start : start + chunk]], axis=1)
        scores = index.matrix @ block
        results.extend(_top_k(index, scores[:, j], k) for j in range(block.shape[1]))
    return results


def _block_cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na <= NORM_FLOOR or nb <= NORM_FLOOR:
        return 0.0
    return float(np.dot(a / na, b / nb))


def per_modality_scores(
    index: HybridIndex, tri_q: TriModalEmbedding, doc_id: str
) -> tuple[float, float, float]:
    """Cosine of query and document within each modality block.

    Document blocks are recovered from the stored hybrid row, so a modality
    whose fusion scale is zero reports cosine 0.
    """
    if tri_q.dims != index.dims:
        raise ValueError(f"query modality dims {tri_q.dims} != index dims {index.dims}")
    row = index.row(doc_id)
    return tuple(  # type: ignore[return-value]
        _block_cosine(qb, row[sl]) for qb, sl in zip(tri_q.blocks(), index.block_slices())
    )
