"""Dense semantic encoders behind a small provider contract.

Two providers ship with the package:

* :class:`TestEncoderProvider` hashes tokens to seeded random unit vectors,
  so texts that share tokens have higher cosine. No model, fully offline.
* :class:`HttpEmbeddingProvider` talks to any server exposing
  ``POST {endpoint}/embed`` with ``{"texts": [...]}`` and answering
  ``{"embeddings": [[...], ...]}``.
"""

from __future__ import annotations

import hashlib
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol, Sequence

import httpx
import numpy as np

from trimodal.lexical import tokenize

log = logging.getLogger(__name__)

BUILTIN_TEST_ENDPOINT = "builtin:test"
EMBED_API_KEY_ENV = "EMBED_API_KEY"


class EmbeddingError(RuntimeError):
    pass


class EmbeddingTransportError(EmbeddingError):
    """Provider unreachable or answered non-200; retrying may help."""

    retryable = True

    def __init__(self, message: str, attempts: int) -> None:
        super().__init__(f"{message} (after {attempts} attempt(s))")
        self.attempts = attempts


class EmbeddingDimensionError(EmbeddingError):
    retryable = False


@dataclass(frozen=True)
class EncoderProfile:
    name: str
    dim: int
    endpoint: str = BUILTIN_TEST_ENDPOINT
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("encoder profile needs a name")
        if self.dim <= 0:
            raise ValueError("encoder dimension must be positive")

    @property
    def fingerprint(self) -> str:
        return f"{self.name}|dim={self.dim}|{self.endpoint}|seed={self.seed}"


# Deployment dimensions of the two encoders the method was evaluated with.
MINILM_V6 = EncoderProfile("minilm-v6", 384, "http://localhost:8080")
BGE_LARGE = EncoderProfile("bge-large", 1024, "http://localhost:8081")


class EmbeddingProvider(Protocol):
    profile: EncoderProfile

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """Return an ``(len(texts), profile.dim)`` float64 array."""
        ...


@lru_cache(maxsize=1 << 16)
def _token_vector(token: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.blake2b(f"{seed}\x00{token}".encode(), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    vec = rng.standard_normal(dim)
    vec /= np.linalg.norm(vec)
    vec.setflags(write=False)
    return vec


def test_encoder(dim: int, text: str, seed: int = 0) -> np.ndarray:
    """Normalized sum of per-token seeded unit vectors; zero for token-less text."""
    if dim < 2:
        raise ValueError("test encoder needs dim >= 2")
    out = np.zeros(dim)
    for tok in tokenize(text):
        out += _token_vector(tok, dim, seed)
    norm = np.linalg.norm(out)
    if norm > 0.0:
        out /= norm
    return out


test_encoder.__test__ = False  # type: ignore[attr-defined]  # not a pytest test


class TestEncoderProvider:
    __test__ = False

    def __init__(self, profile: EncoderProfile) -> None:
        if profile.endpoint != BUILTIN_TEST_ENDPOINT:
            raise ValueError(f"test provider needs endpoint {BUILTIN_TEST_ENDPOINT!r}")
        self.profile = profile

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([test_encoder(self.profile.dim, t, self.profile.seed) for t in texts])


class HttpEmbeddingProvider:
    def __init__(
        self,
        profile: EncoderProfile,
        *,
        batch_size: int = 32,
        max_in_flight: int = 4,
        timeout: float = 30.0,
        retries: int = 3,
        backoff: float = 0.5,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        if batch_size < 1 or max_in_flight < 1 or retries < 1:
            raise ValueError("batch_size, max_in_flight and retries must be >= 1")
        self.profile = profile
        self.batch_size = batch_size
        self.max_in_flight = max_in_flight
        self.retries = retries
        self.backoff = backoff
        headers = {}
        api_key = os.environ.get(EMBED_API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._url = profile.endpoint.rstrip("/") + "/embed"
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)
        log.info(
            "remote encoder %s assumed deterministic per text; not verified",
            profile.name,
        )

    def close(self) -> None:
        self._client.close()

    def _post(self, batch: Sequence[str]) -> np.ndarray:
        last = ""
        for attempt in range(1, self.retries + 1):
            try:
                resp = self._client.post(self._url, json={"texts": list(batch)})
            except httpx.HTTPError as exc:
                last = f"{type(exc).__name__}: {exc}"
            else:
                if resp.status_code == 200:
                    return self._parse(resp, len(batch))
                last = f"HTTP {resp.status_code}"
            log.warning("embed request to %s failed (%s), attempt %d", self._url, last, attempt)
            if attempt < self.retries and self.backoff > 0:
                time.sleep(self.backoff * 2 ** (attempt - 1))
        raise EmbeddingTransportError(f"embedding request to {self._url} failed: {last}", self.retries)

    def _parse(self, resp: httpx.Response, n: int) -> np.ndarray:
        try:
            rows = resp.json()["embeddings"]
            arr = np.asarray(rows, dtype=np.float64)
        except (ValueError, KeyError, TypeError) as exc:
            raise EmbeddingError(f"malformed embedding response: {exc}") from exc
        if arr.ndim != 2 or arr.shape[0] != n:
            raise EmbeddingError(f"expected {n} embeddings, got array of shape {arr.shape}")
        if arr.shape[1] != self.profile.dim:
            raise EmbeddingDimensionError(
                f"provider returned dim {arr.shape[1]}, profile {self.profile.name} says {self.profile.dim}"
            )
        return arr

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        batches = [texts[i : i + self.batch_size] for i in range(0, len(texts), self.batch_size)]
        if len(batches) == 1:
            return self._post(batches[0])
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return np.concatenate(list(pool.map(self._post, batches)))


def make_provider(profile: EncoderProfile, **http_options) -> EmbeddingProvider:
    if profile.endpoint == BUILTIN_TEST_ENDPOINT:
        return TestEncoderProvider(profile)
    return HttpEmbeddingProvider(profile, **http_options)


def embed_texts(provider: EmbeddingProvider, texts: Sequence[str]) -> list[np.ndarray]:
    """One finite vector of the profile's dimension per text, in input order."""
    if not texts:
        raise ValueError("embed_texts needs at least one text")
    arr = np.asarray(provider.embed(list(texts)), dtype=np.float64)
    dim = provider.profile.dim
    if arr.shape != (len(texts), dim):
        raise EmbeddingDimensionError(
            f"expected embeddings of shape ({len(texts)}, {dim}), got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise EmbeddingError("provider returned non-finite embedding components")
    return list(arr)
