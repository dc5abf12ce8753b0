"""Lexical modality: vocabulary with smoothed IDF and sparse TF-IDF vectors."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from trimodal.documents import Document, text_of

DEFAULT_MAX_TERMS = 1024

# \w minus underscore == Unicode letters and digits
_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercased maximal runs of Unicode alphanumerics, in order."""
    return [m.group(0).lower() for m in _TOKEN_RE.finditer(text)]


def smoothed_idf(n_docs: int, df: int) -> float:
    """``ln(N / (1 + df))`` clamped at zero.

    Shared by terms and entities so the system has a single IDF definition.
    """
    return max(0.0, math.log(n_docs / (1 + df)))


@dataclass(frozen=True)
class SparseVector:
    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-d arrays of equal length")
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly ascending")
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise ValueError("index out of range for dimension %d" % self.dim)
            if np.any(val <= 0):
                raise ValueError("sparse vectors never store non-positive values")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def empty(cls, dim: int) -> SparseVector:
        return cls(np.empty(0, dtype=np.int64), np.empty(0), dim)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    df: tuple[int, ...]
    n_docs: int
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.terms) != len(self.df):
            raise ValueError("terms and df differ in length")
        if list(self.terms) != sorted(set(self.terms)):
            raise ValueError("terms must be unique and sorted")
        if any(d < 1 or d > self.n_docs for d in self.df):
            raise ValueError("document frequencies must lie in [1, n_docs]")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.terms)})

    @property
    def dim(self) -> int:
        return len(self.terms)

    def index_of(self, term: str) -> int | None:
        return self._index.get(term)

    def idf_array(self) -> np.ndarray:
        return np.array([smoothed_idf(self.n_docs, d) for d in self.df])


def build_vocabulary(
    corpus: Iterable[Document | str], max_terms: int = DEFAULT_MAX_TERMS
) -> Vocabulary:
    """Keep the ``max_terms`` highest-df terms; ties go to the lexicographically smaller term."""
    if max_terms < 1:
        raise ValueError("max_terms must be >= 1")
    df: Counter[str] = Counter()
    n_docs = 0
    for item in corpus:
        n_docs += 1
        df.update(set(tokenize(text_of(item))))
    if n_docs == 0:
        raise ValueError("empty corpus")
    kept = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))[:max_terms]
    kept.sort()
    return Vocabulary(
        terms=tuple(t for t, _ in kept), df=tuple(d for _, d in kept), n_docs=n_docs
    )


def term_idf(vocab: Vocabulary, term_index: int) -> float:
    if not 0 <= term_index < vocab.dim:
        raise IndexError(f"term index {term_index} out of range [0, {vocab.dim})")
    return smoothed_idf(vocab.n_docs, vocab.df[term_index])


def tfidf_vector(vocab: Vocabulary, text: str | Sequence[str]) -> SparseVector:
    """Raw-count TF times smoothed IDF; OOV terms and zero weights are dropped.

    ``text`` may also be a pre-tokenized sequence.
    """
    tokens = tokenize(text) if isinstance(text, str) else text
    counts: Counter[int] = Counter()
    for tok in tokens:
        i = vocab.index_of(tok)
        if i is not None:
            counts[i] += 1
    indices, values = [], []
    for i in sorted(counts):
        w = counts[i] * term_idf(vocab, i)
        if w > 0.0:
            indices.append(i)
            values.append(w)
    return SparseVector(np.array(indices, dtype=np.int64), np.array(values), vocab.dim)
