"""Graph modality: entity extraction, entity IDF and the IDF-weighted entity embedding."""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import numpy as np

from trimodal.documents import Document
from trimodal.lexical import smoothed_idf

log = logging.getLogger(__name__)

GRAPH_EPSILON = 1e-6

_WORD_RE = re.compile(r"\S+")
_RUN_BREAK = ".!?,;:"
_SENTENCE_END = ".!?"
_TRAILING_CLOSERS = "\"')]}”’"


class EntityExtractor(Protocol):
    def __call__(self, text: str) -> list[str]: ...


def _strip_non_alnum(word: str) -> str:
    start, end = 0, len(word)
    while start < end and not word[start].isalnum():
        start += 1
    while end > start and not word[end - 1].isalnum():
        end -= 1
    return word[start:end]


def extract_entities(text: str) -> list[str]:
    """Capitalized-run heuristic.

    A run is a maximal sequence of whitespace-separated tokens whose first
    character is uppercase. Runs end at punctuation (``.!?,;:``) or line
    breaks. A run made of a single token sitting at a sentence start is
    dropped, since sentence-initial capitalization says nothing about
    entity-hood. Occurrences are kept in order, duplicates included.
    """
    found: list[str] = []
    run: list[str] = []
    run_at_sentence_start = False
    sentence_start = True
    prev_end = 0

    def flush() -> None:
        nonlocal run
        if run and not (len(run) == 1 and run_at_sentence_start):
            found.append(" ".join(run))
        run = []

    for m in _WORD_RE.finditer(text):
        if "\n" in text[prev_end : m.start()]:
            flush()
            sentence_start = True
        prev_end = m.end()
        raw = m.group(0)
        core = _strip_non_alnum(raw)
        if core and core[0].isupper():
            if not run:
                run_at_sentence_start = sentence_start
            run.append(core)
        else:
            flush()
        tail = raw.rstrip(_TRAILING_CLOSERS)
        if core:
            sentence_start = tail.endswith(tuple(_SENTENCE_END))
        if tail.endswith(tuple(_RUN_BREAK)):
            flush()
    flush()
    return found


def load_entity_sidecar(path: str | Path) -> dict[str, list[str]]:
    """Read ``{"doc_id": ..., "entities": [...]}`` JSON lines."""
    overrides: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                doc_id = rec["doc_id"]
                ents = rec["entities"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed entity record ({exc})") from exc
            if not isinstance(doc_id, str) or not isinstance(ents, list) or not all(
                isinstance(e, str) for e in ents
            ):
                raise ValueError(f"{path}:{lineno}: expected string doc_id and list of strings")
            overrides[doc_id] = list(ents)
    return overrides


@dataclass(frozen=True)
class EntityCatalog:
    entities: tuple[str, ...]
    df: tuple[int, ...]
    n_docs: int
    _df_map: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.entities) != len(self.df):
            raise ValueError("entities and df differ in length")
        if len(set(self.entities)) != len(self.entities):
            raise ValueError("duplicate entities in catalog")
        if any(d < 1 for d in self.df) or (self.df and max(self.df) > self.n_docs):
            raise ValueError("document frequencies must lie in [1, n_docs]")
        object.__setattr__(self, "_df_map", dict(zip(self.entities, self.df)))

    def __len__(self) -> int:
        return len(self.entities)

    def __contains__(self, entity: object) -> bool:
        return entity in self._df_map

    def df_of(self, entity: str) -> int | None:
        return self._df_map.get(entity)


def build_entity_catalog(
    corpus: Sequence[Document],
    extractor: EntityExtractor = extract_entities,
    overrides: Mapping[str, list[str]] | None = None,
) -> EntityCatalog:
    return catalog_from_entity_lists(corpus_entities(corpus, extractor, overrides))


def catalog_from_entity_lists(entity_lists: Iterable[Sequence[str]]) -> EntityCatalog:
    """Document frequency per entity, given one extracted entity list per document."""
    df: Counter[str] = Counter()
    n_docs = 0
    for ents in entity_lists:
        n_docs += 1
        df.update(set(ents))
    if n_docs == 0:
        raise ValueError("empty corpus")
    items = sorted(df.items())
    return EntityCatalog(
        entities=tuple(e for e, _ in items), df=tuple(d for _, d in items), n_docs=n_docs
    )


def corpus_entities(
    corpus: Sequence[Document],
    extractor: EntityExtractor = extract_entities,
    overrides: Mapping[str, list[str]] | None = None,
) -> list[list[str]]:
    """Entities per document; sidecar overrides win over the extractor."""
    overrides = overrides or {}
    return [
        list(overrides[d.doc_id]) if d.doc_id in overrides else extractor(d.full_text)
        for d in corpus
    ]


def entity_idf(catalog: EntityCatalog, entity: str) -> float:
    df = catalog.df_of(entity)
    if df is None:
        log.debug("unseen entity %r, weight 0", entity)
        return 0.0
    return smoothed_idf(catalog.n_docs, df)


def graph_embedding(
    catalog: EntityCatalog,
    entities: Sequence[str],
    encode: Callable[[str], np.ndarray],
    dim: int,
    epsilon: float = GRAPH_EPSILON,
) -> np.ndarray:
    """IDF-weighted mean of entity embeddings, damped by ``epsilon``.

    Every occurrence in ``entities`` contributes, so repeated mentions weigh
    more. Returns the zero vector when there are no entities or all IDFs
    are zero.
    """
    num = np.zeros(dim)
    den = 0.0
    for ent in entities:
        w = entity_idf(catalog, ent)
        if w <= 0.0:
            continue  # contributes nothing; skip the encoder call
        vec = np.asarray(encode(ent), dtype=np.float64)
        if vec.shape != (dim,):
            raise ValueError(
                f"entity embedding for {ent!r} has shape {vec.shape}, expected ({dim},)"
            )
        num += w * vec
        den += w
    if den == 0.0:
        return num
    return num / (den + epsilon)
