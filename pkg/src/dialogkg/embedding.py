"""Sentence-embedding providers, cosine similarity and a shared cache.

Every provider exposes ``name``, ``dimension`` and ``embed(text)``. Vectors are
read-only float64 numpy arrays so a cached vector can be handed to many
sessions without copying.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import httpx
import numpy as np

from .errors import ConfigError, ProviderError

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class EmbeddingProvider(Protocol):
    name: str
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


def _freeze(vec) -> np.ndarray:
    arr = np.array(vec, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"embedding must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("embedding contains NaN or Inf")
    arr.setflags(write=False)
    return arr


def cosine_with_flag(a: np.ndarray, b: np.ndarray) -> tuple[float, bool]:
    """Cosine similarity plus a flag that is True when an operand had zero norm."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0, True
    value = float(np.dot(a, b)) / (na * nb)
    return min(1.0, max(-1.0, value)), False


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity clamped to [-1, 1]; 0.0 when either vector is zero."""
    value, degenerate = cosine_with_flag(a, b)
    if degenerate:
        logger.debug("cosine against a zero-norm vector; returning 0")
    return value


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class HashEmbedder:
    """Signed feature hashing of lowercase unigrams, L2-normalised.

    Stable across processes and platforms: buckets come from keyed BLAKE2b,
    never from Python's randomised ``hash``.
    """

    SEED = b"dialogkg-hash-v1"

    def __init__(self, dimension: int = 256):
        if dimension < 8:
            raise ConfigError("hash embedder dimension must be >= 8")
        self.dimension = dimension
        self.name = f"hash-{dimension}"

    def _bucket(self, token: str) -> tuple[int, float]:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self.SEED).digest()
        h = int.from_bytes(digest, "little")
        sign = 1.0 if (h >> 63) == 0 else -1.0
        return h % self.dimension, sign

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension)
        for token in tokenize(text):
            idx, sign = self._bucket(token)
            vec[idx] += sign
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return _freeze(vec)


def hash_embedder(dimension: int = 256) -> HashEmbedder:
    return HashEmbedder(dimension)


class TableEmbedder:
    """Exact-match lookup table in front of a fallback provider."""

    def __init__(self, table: Mapping[str, Sequence[float]], fallback: EmbeddingProvider):
        self.fallback = fallback
        self.dimension = fallback.dimension
        self.table: dict[str, np.ndarray] = {}
        for text, vec in table.items():
            arr = _freeze(vec)
            if arr.shape != (self.dimension,):
                raise ConfigError(
                    f"table vector for {text!r} has dimension {arr.shape[0]}, expected {self.dimension}"
                )
            self.table[text] = arr
        digest = hashlib.sha256(
            json.dumps({k: v.tolist() for k, v in sorted(self.table.items())}).encode()
        ).hexdigest()[:12]
        self.name = f"table-{digest}+{fallback.name}"

    def embed(self, text: str) -> np.ndarray:
        hit = self.table.get(text)
        if hit is not None:
            return hit
        return self.fallback.embed(text)


def table_embedder(table: Mapping[str, Sequence[float]], fallback: EmbeddingProvider) -> TableEmbedder:
    return TableEmbedder(table, fallback)


def vectors_from_similarities(
    texts: Sequence[str],
    similarities: Iterable[tuple[str, str, float]],
    dimension: int,
) -> dict[str, np.ndarray]:
    """Build unit vectors whose pairwise cosines hit the requested values.

    Vectors are placed one at a time in ``texts`` order. Each new vector takes
    the minimum-norm component inside the span of earlier vectors that meets
    its constraints, plus a fresh orthogonal axis to reach unit length.
    Pairs that are not listed end up with whatever cosine that construction
    implies (0 for texts with no shared constraints).
    """
    order = list(dict.fromkeys(texts))
    if len(order) > dimension:
        raise ConfigError(f"{len(order)} texts do not fit in dimension {dimension}")
    index = {t: i for i, t in enumerate(order)}
    wanted: dict[int, dict[int, float]] = {i: {} for i in range(len(order))}
    for a, b, sim in similarities:
        if a not in index or b not in index:
            raise ConfigError(f"similarity references unknown text: {a!r} / {b!r}")
        if not -1.0 <= sim <= 1.0:
            raise ConfigError(f"similarity {sim} outside [-1, 1]")
        ia, ib = index[a], index[b]
        if ia == ib:
            continue
        lo, hi = sorted((ia, ib))
        wanted[hi][lo] = float(sim)

    vecs = np.zeros((len(order), dimension))
    for i in range(len(order)):
        cons = wanted[i]
        if cons:
            prior = sorted(cons)
            basis = vecs[prior]
            target = np.array([cons[j] for j in prior])
            coef, *_ = np.linalg.lstsq(basis @ basis.T, target, rcond=None)
            head = coef @ basis
            if not np.allclose(basis @ head, target, atol=1e-9):
                raise ConfigError(f"inconsistent similarity constraints for {order[i]!r}")
        else:
            head = np.zeros(dimension)
        rest = 1.0 - float(head @ head)
        if rest < -1e-12:
            raise ConfigError(f"similarity constraints for {order[i]!r} are not realisable")
        head = head.copy()
        head[i] += np.sqrt(max(rest, 0.0))
        vecs[i] = head
    return {t: _freeze(vecs[index[t]]) for t in order}


def load_table_file(path: str | os.PathLike, fallback: EmbeddingProvider) -> TableEmbedder:
    """Load a table provider from JSON.

    The file holds ``{"vectors": {text: [...]}}`` and/or
    ``{"texts": [...], "similarities": [[a, b, cos], ...]}``; the latter is
    expanded with :func:`vectors_from_similarities`.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read embedding table {path}: {exc}") from exc
    return table_from_document(doc, fallback)


def table_from_document(doc: Mapping, fallback: EmbeddingProvider) -> TableEmbedder:
    table: dict[str, Sequence[float]] = dict(doc.get("vectors", {}))
    if "similarities" in doc:
        sims = [tuple(s) for s in doc["similarities"]]
        texts = list(doc.get("texts", []))
        for a, b, _ in sims:
            for t in (a, b):
                if t not in texts:
                    texts.append(t)
        table.update(vectors_from_similarities(texts, sims, fallback.dimension))
    return TableEmbedder(table, fallback)


class EmbeddingCache:
    """Memoising wrapper; safe for concurrent readers and insert-if-absent.

    The cache key is the raw input string. ``calls`` counts provider
    invocations, which the tests use to check the memoisation contract.
    """

    def __init__(self, provider: EmbeddingProvider, store: dict[str, np.ndarray] | None = None):
        self.provider = provider
        self.name = provider.name
        self.dimension = provider.dimension
        self._store: dict[str, np.ndarray] = dict(store or {})
        self._lock = threading.Lock()
        self.calls = 0

    def __contains__(self, text: str) -> bool:
        return text in self._store

    def __len__(self) -> int:
        return len(self._store)

    def embed(self, text: str) -> np.ndarray:
        hit = self._store.get(text)
        if hit is not None:
            return hit
        try:
            vec = self.provider.embed(text)
        except ProviderError:
            raise
        except Exception as exc:
            raise ProviderError(f"embedding provider {self.provider.name} failed: {exc}", text=text) from exc
        vec = _freeze(vec)
        if vec.shape != (self.dimension,):
            raise ProviderError(
                f"provider returned dimension {vec.shape[0]}, expected {self.dimension}", text=text
            )
        with self._lock:
            self.calls += 1
            return self._store.setdefault(text, vec)

    def embed_many(self, texts: Sequence[str]) -> list[np.ndarray]:
        missing = [t for t in dict.fromkeys(texts) if t not in self._store]
        batch = getattr(self.provider, "embed_batch", None)
        if missing and batch is not None:
            try:
                vectors = batch(missing)
            except ProviderError:
                raise
            except Exception as exc:
                raise ProviderError(f"batch embedding failed: {exc}", text=missing[0]) from exc
            with self._lock:
                self.calls += len(missing)
                for t, v in zip(missing, vectors):
                    self._store.setdefault(t, _freeze(v))
        return [self.embed(t) for t in texts]

    def save(self, path: str | os.PathLike) -> None:
        with self._lock:
            doc = {k: v.tolist() for k, v in sorted(self._store.items())}
        Path(path).write_text(json.dumps(doc), encoding="utf-8")

    def load(self, path: str | os.PathLike) -> int:
        """Merge a persisted cache file; returns the number of entries added."""
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        added = 0
        with self._lock:
            for k, v in doc.items():
                vec = _freeze(v)
                if vec.shape != (self.dimension,):
                    raise ConfigError(f"cached vector for {k!r} has wrong dimension")
                if k not in self._store:
                    self._store[k] = vec
                    added += 1
        return added


def embed_cached(provider: EmbeddingProvider, cache: EmbeddingCache, text: str) -> np.ndarray:
    if cache.provider is not provider:
        raise ValueError("cache is bound to a different provider")
    return cache.embed(text)


class HttpEmbedder:
    """Client for a remote embedding service.

    Request: ``POST {"input": [texts], "model": name}``.
    Response: ``{"embeddings": [[...], ...]}`` in request order.
    """

    def __init__(
        self,
        url: str,
        dimension: int,
        model: str = "",
        api_key: str | None = None,
        timeout: float = 30.0,
        batch_size: int = 64,
        max_retries: int = 4,
        backoff: float = 0.5,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not url:
            raise ConfigError("embedding endpoint URL is required")
        self.url = url
        self.dimension = dimension
        self.model = model
        self.batch_size = batch_size
        self.max_retries = max_retries
        self.backoff = backoff
        self._sleep = sleep
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=timeout, headers=headers)
        if client is not None and api_key:
            self._client.headers.update(headers)
        self.name = f"http:{model or url}"

    @classmethod
    def from_env(cls, dimension: int | None = None, **kwargs) -> "HttpEmbedder":
        url = os.environ.get("DIALOGKG_EMBED_URL", "")
        if not url:
            raise ConfigError("DIALOGKG_EMBED_URL is not set")
        dim = dimension or int(os.environ.get("DIALOGKG_EMBED_DIM", "768"))
        return cls(
            url=url,
            dimension=dim,
            model=os.environ.get("DIALOGKG_EMBED_MODEL", ""),
            api_key=os.environ.get("DIALOGKG_EMBED_API_KEY"),
            timeout=float(os.environ.get("DIALOGKG_EMBED_TIMEOUT", "30")),
            max_retries=int(os.environ.get("DIALOGKG_EMBED_RETRIES", "4")),
            **kwargs,
        )

    def _post(self, texts: list[str]) -> list[list[float]]:
        body = {"input": texts}
        if self.model:
            body["model"] = self.model
        last: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = self._client.post(self.url, json=body)
                if resp.status_code >= 500 or resp.status_code == 429:
                    raise httpx.HTTPStatusError(f"status {resp.status_code}", request=resp.request, response=resp)
                resp.raise_for_status()
                vectors = resp.json()["embeddings"]
                if len(vectors) != len(texts):
                    raise ProviderError(
                        f"service returned {len(vectors)} vectors for {len(texts)} inputs", text=texts[0]
                    )
                return vectors
            except httpx.HTTPStatusError as exc:
                last = exc
                if exc.response is not None and 400 <= exc.response.status_code < 500 and exc.response.status_code != 429:
                    break
            except (httpx.TransportError, KeyError, ValueError) as exc:
                last = exc
            if attempt < self.max_retries:
                self._sleep(self.backoff * (2**attempt))
        raise ProviderError(f"embedding request failed: {last}", text=texts[0])

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for start in range(0, len(texts), self.batch_size):
            chunk = list(texts[start : start + self.batch_size])
            out.extend(_freeze(v) for v in self._post(chunk))
        return out

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]
