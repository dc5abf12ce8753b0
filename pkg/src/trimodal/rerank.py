"""LLM-guided reranking of the top retrieved candidates.

Two modes share one request/response exchange:

``weights``
    The LLM returns per-query modality weights; candidates are rescored as
    the weighted sum of their per-modality cosines.
``listwise``
    The LLM returns doc_ids, most relevant first; the answer is validated
    and completed into a permutation of the candidates.

Any LLM failure degrades to static weights or the pre-rank order and is
recorded on the :class:`RerankOutcome`; a run never aborts because of it.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import random
import time
from dataclasses import dataclass, field
from typing import Literal, Protocol, Sequence

import httpx

log = logging.getLogger(__name__)

LLM_API_KEY_ENV = "LLM_API_KEY"
DEFAULT_CANDIDATE_CAP = 10
DEFAULT_SNIPPET_CHARS = 300
ELLIPSIS = "..."

RerankMode = Literal["weights", "listwise"]


class UnparseableWeightsError(ValueError):
    pass


class UnparseableOrderError(ValueError):
    pass


class LLMError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModalityWeights:
    semantic: float
    lexical: float
    graph: float

    def __post_init__(self) -> None:
        ws = self.as_tuple()
        if any(not (0.0 <= w <= 1.0) for w in ws):
            raise ValueError(f"modality weights must lie in [0, 1], got {ws}")
        if abs(sum(ws) - 1.0) > 1e-9:
            raise ValueError(f"modality weights must sum to 1, got {sum(ws)!r}")

    @classmethod
    def equal(cls) -> ModalityWeights:
        return cls(1 / 3, 1 / 3, 1 / 3)

    @classmethod
    def from_raw(cls, semantic: float, lexical: float, graph: float) -> ModalityWeights:
        """Clamp each value to [0, 1], then renormalize to sum 1."""
        clamped = [min(1.0, max(0.0, float(w))) for w in (semantic, lexical, graph)]
        total = sum(clamped)
        if total <= 0.0:
            raise UnparseableWeightsError("all modality weights are zero")
        return cls(*(w / total for w in clamped))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.semantic, self.lexical, self.graph)


@dataclass(frozen=True)
class Candidate:
    doc_id: str
    cos_semantic: float
    cos_lexical: float
    cos_graph: float
    score: float = 0.0
    title: str = ""
    snippet: str = ""

    def cosine(self, modality: str) -> float:
        return {
            "semantic": self.cos_semantic,
            "lexical": self.cos_lexical,
            "graph": self.cos_graph,
            "hybrid": self.score,
        }[modality]


@dataclass(frozen=True)
class RerankRequest:
    query: str
    candidates: tuple[Candidate, ...]
    mode: RerankMode


@dataclass
class RerankOutcome:
    ranked: list[tuple[str, float]]
    mode: RerankMode
    weights: ModalityWeights | None = None
    fallback: bool = False
    reason: str = ""
    raw: str = ""


class LLMClient(Protocol):
    def complete(self, prompt: str, request: RerankRequest) -> str: ...


def _truncate(text: str, limit: int) -> str:
    text = " ".join(text.split())
    if len(text) <= limit:
        return text
    return text[:limit] + ELLIPSIS


def _check_candidates(candidates: Sequence[Candidate], cap: int) -> None:
    if not candidates:
        raise ValueError("reranking needs at least one candidate")
    if len(candidates) > cap:
        raise ValueError(f"{len(candidates)} candidates exceed the cap of {cap}")


def _candidate_block(candidates: Sequence[Candidate], snippet_chars: int) -> str:
    lines = []
    for i, c in enumerate(candidates, 1):
        lines.append(
            f"[{i}] id: {c.doc_id}\n"
            f"    similarity: semantic={c.cos_semantic:.3f} lexical={c.cos_lexical:.3f} "
            f"graph={c.cos_graph:.3f}\n"
            f"    title: {_truncate(c.title, snippet_chars)}\n"
            f"    text: {_truncate(c.snippet, snippet_chars)}"
        )
    return "\n".join(lines)


def build_weight_prompt(
    query: str,
    candidates: Sequence[Candidate],
    cap: int = DEFAULT_CANDIDATE_CAP,
    snippet_chars: int = DEFAULT_SNIPPET_CHARS,
) -> str:
    _check_candidates(candidates, cap)
    return (
        "You tune a hybrid document retriever that scores documents with three signals:\n"
        "- semantic: dense-embedding similarity (meaning, paraphrase)\n"
        "- lexical: TF-IDF keyword overlap (exact terms)\n"
        "- graph: overlap of named entities and their relations\n"
        "Given the query and its top candidates, decide how much each signal should count.\n\n"
        f"Query: {' '.join(query.split())}\n\n"
        f"Candidates:\n{_candidate_block(candidates, snippet_chars)}\n\n"
        'Answer with a single JSON object {"semantic": x, "lexical": y, "graph": z} '
        "of non-negative numbers summing to 1, and nothing else."
    )


def build_listwise_prompt(
    query: str,
    candidates: Sequence[Candidate],
    cap: int = DEFAULT_CANDIDATE_CAP,
    snippet_chars: int = DEFAULT_SNIPPET_CHARS,
) -> str:
    _check_candidates(candidates, cap)
    return (
        "Rank the candidate documents by how well they answer the query.\n\n"
        f"Query: {' '.join(query.split())}\n\n"
        f"Candidates:\n{_candidate_block(candidates, snippet_chars)}\n\n"
        "Answer with a single JSON array of the candidate ids, most relevant first, "
        "and nothing else."
    )


def _first_json(raw: str, opener: str, kind: type) -> object | None:
    decoder = json.JSONDecoder()
    pos = raw.find(opener)
    while pos != -1:
        try:
            obj, _ = decoder.raw_decode(raw, pos)
        except json.JSONDecodeError:
            pass
        else:
            if isinstance(obj, kind):
                return obj
        pos = raw.find(opener, pos + 1)
    return None


def parse_weight_response(raw: str) -> ModalityWeights:
    obj = _first_json(raw, "{", dict)
    if obj is None:
        raise UnparseableWeightsError("unparseable weights: no JSON object in response")
    values = []
    for key in ("semantic", "lexical", "graph"):
        v = obj.get(key)  # type: ignore[union-attr]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise UnparseableWeightsError(f"unparseable weights: field {key!r} is {v!r}")
        values.append(float(v))
    try:
        return ModalityWeights.from_raw(*values)
    except UnparseableWeightsError as exc:
        raise UnparseableWeightsError(f"unparseable weights: {exc}") from exc


def parse_listwise_response(raw: str, candidate_ids: Sequence[str]) -> list[str]:
    """Validated permutation: known ids in LLM order, then the rest in pre-rank order."""
    arr = _first_json(raw, "[", list)
    if arr is None:
        raise UnparseableOrderError("no JSON array in listwise response")
    known = set(candidate_ids)
    order: list[str] = []
    for item in arr:  # type: ignore[union-attr]
        doc_id = str(item) if isinstance(item, (str, int)) and not isinstance(item, bool) else None
        if doc_id in known and doc_id not in order:
            order.append(doc_id)
        elif doc_id not in known:
            log.debug("dropping unknown doc_id %r from listwise answer", item)
    seen = set(order)
    order.extend(d for d in candidate_ids if d not in seen)
    return order


def weighted_rescore(
    candidates: Sequence[Candidate], weights: ModalityWeights
) -> list[tuple[str, float]]:
    ws, wt, wg = weights.as_tuple()
    scored = [
        (c.doc_id, ws * c.cos_semantic + wt * c.cos_lexical + wg * c.cos_graph)
        for c in candidates
    ]
    scored.sort(key=lambda x: (-x[1], x[0]))
    return scored


def listwise_rerank(
    query: str,
    candidates: Sequence[Candidate],
    client: LLMClient,
    cap: int = DEFAULT_CANDIDATE_CAP,
    snippet_chars: int = DEFAULT_SNIPPET_CHARS,
) -> RerankOutcome:
    prompt = build_listwise_prompt(query, candidates, cap, snippet_chars)
    request = RerankRequest(query, tuple(candidates), "listwise")
    ids = [c.doc_id for c in candidates]
    raw = ""
    try:
        raw = client.complete(prompt, request)
        order = parse_listwise_response(raw, ids)
    except Exception as exc:
        return RerankOutcome(
            _rank_scores(ids), "listwise", fallback=True,
            reason=f"{type(exc).__name__}: {exc}", raw=raw,
        )
    return RerankOutcome(_rank_scores(order), "listwise", raw=raw)


def weights_rerank(
    query: str,
    candidates: Sequence[Candidate],
    client: LLMClient,
    static_weights: ModalityWeights | None = None,
    cap: int = DEFAULT_CANDIDATE_CAP,
    snippet_chars: int = DEFAULT_SNIPPET_CHARS,
) -> RerankOutcome:
    prompt = build_weight_prompt(query, candidates, cap, snippet_chars)
    request = RerankRequest(query, tuple(candidates), "weights")
    raw = ""
    try:
        raw = client.complete(prompt, request)
        weights = parse_weight_response(raw)
    except Exception as exc:
        weights = static_weights or ModalityWeights.equal()
        return RerankOutcome(
            weighted_rescore(candidates, weights), "weights", weights, fallback=True,
            reason=f"{type(exc).__name__}: {exc}", raw=raw,
        )
    return RerankOutcome(weighted_rescore(candidates, weights), "weights", weights, raw=raw)


def _rank_scores(order: Sequence[str]) -> list[tuple[str, float]]:
    n = len(order)
    return [(d, float(n - i)) for i, d in enumerate(order)]


@dataclass
class Reranker:
    """Binds a client to the rerank settings of one pipeline."""

    client: LLMClient
    mode: RerankMode = "weights"
    cap: int = DEFAULT_CANDIDATE_CAP
    snippet_chars: int = DEFAULT_SNIPPET_CHARS
    static_weights: ModalityWeights = field(default_factory=ModalityWeights.equal)

    def __call__(self, query: str, candidates: Sequence[Candidate]) -> RerankOutcome:
        candidates = list(candidates)[: self.cap]
        if self.mode == "weights":
            out = weights_rerank(
                query, candidates, self.client, self.static_weights, self.cap, self.snippet_chars
            )
        elif self.mode == "listwise":
            out = listwise_rerank(query, candidates, self.client, self.cap, self.snippet_chars)
        else:
            raise ValueError(f"unknown rerank mode {self.mode!r}")
        if out.fallback:
            log.warning("rerank fallback (%s mode) for query %r: %s", out.mode, query[:60], out.reason)
        return out


class HttpLLMClient:
    """OpenAI-style chat completions client, temperature pinned to 0."""

    def __init__(
        self,
        base_url: str,
        model: str = "gpt-4o",
        *,
        timeout: float = 60.0,
        retries: int = 2,
        backoff: float = 1.0,
        temperature: float = 0.0,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.model = model
        self.retries = max(1, retries)
        self.backoff = backoff
        self.temperature = temperature
        headers = {}
        api_key = os.environ.get(LLM_API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._url = base_url.rstrip("/") + "/v1/chat/completions"
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def close(self) -> None:
        self._client.close()

    def complete(self, prompt: str, request: RerankRequest | None = None) -> str:
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": "You are a precise search relevance assistant."},
                {"role": "user", "content": prompt},
            ],
            "temperature": self.temperature,
        }
        last = ""
        for attempt in range(1, self.retries + 1):
            try:
                resp = self._client.post(self._url, json=body)
                if resp.status_code == 200:
                    return resp.json()["choices"][0]["message"]["content"]
                last = f"HTTP {resp.status_code}"
            except (httpx.HTTPError, ValueError, KeyError, IndexError, TypeError) as exc:
                last = f"{type(exc).__name__}: {exc}"
            log.info("LLM request to %s failed (%s), attempt %d", self._url, last, attempt)
            if attempt < self.retries and self.backoff > 0:
                time.sleep(self.backoff * 2 ** (attempt - 1))
        raise LLMError(f"LLM request failed after {self.retries} attempt(s): {last}")


class MockLLM:
    """Deterministic offline stand-in for a chat LLM.

    In weights mode it answers ``weights``; in listwise mode it orders
    candidates by ``listwise_key`` descending (``semantic``, ``lexical``,
    ``graph``, ``hybrid``), or ``reverse`` / ``shuffle`` (seeded) of the
    pre-rank order. ``malformed`` answers prose; ``fail`` raises.
    """

    def __init__(
        self,
        weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3),
        listwise_key: str = "lexical",
        *,
        malformed: bool = False,
        fail: bool = False,
        seed: int = 0,
    ) -> None:
        self.weights = weights
        self.listwise_key = listwise_key
        self.malformed = malformed
        self.fail = fail
        self.seed = seed
        self.calls = 0

    def complete(self, prompt: str, request: RerankRequest) -> str:
        self.calls += 1
        if self.fail:
            raise LLMError("mock LLM configured to fail")
        if self.malformed:
            return "I think semantics matter most"
        if request.mode == "weights":
            s, t, g = self.weights
            return json.dumps({"semantic": s, "lexical": t, "graph": g})
        cands = list(request.candidates)
        if self.listwise_key == "reverse":
            cands.reverse()
        elif self.listwise_key == "shuffle":
            digest = hashlib.sha256(f"{self.seed}\x00{request.query}".encode()).digest()
            random.Random(digest).shuffle(cands)
        else:
            cands.sort(key=lambda c: (-c.cosine(self.listwise_key), c.doc_id))
        return json.dumps([c.doc_id for c in cands])
