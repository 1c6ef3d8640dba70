"""Text embedding providers, an on-disk embedding cache, and cosine similarity."""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import math
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import (DimensionMismatch, EmptyText, ProviderUnavailable, VersionMismatch,
                     ZeroVector)

log = logging.getLogger(__name__)

DEFAULT_DIM = 384
CACHE_FORMAT = "founderfit-embedding-cache"
CACHE_VERSION = 1

_TOKEN_RE = re.compile(r"\w+")


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors, clamped into [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector shapes differ: {a.shape} vs {b.shape}")
    na = float(np.dot(a, a))
    nb = float(np.dot(b, b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity of a zero vector is undefined")
    # sqrt(na * nb) keeps cos(v, v) == 1 exactly
    c = float(np.dot(a, b)) / math.sqrt(na * nb)
    return min(1.0, max(-1.0, c))


@dataclass(frozen=True)
class EmbeddingProviderConfig:
    kind: str = "deterministic"          # "deterministic" | "remote"
    endpoint: str | None = None
    model_name: str = "all-MiniLM-L6-v2"
    dim: int = DEFAULT_DIM
    timeout: float = 30.0
    max_retries: int = 3
    seed: int = 0
    batch_size: int = 64
    parallelism: int = 4
    api_key: str | None = None

    def __post_init__(self):
        if self.kind not in ("deterministic", "remote"):
            raise ValueError(f"unknown embedding provider kind {self.kind!r}")
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote embedding provider needs an endpoint")

    @classmethod
    def from_env(cls, **overrides) -> "EmbeddingProviderConfig":
        env = {}
        if os.environ.get("EMBED_ENDPOINT"):
            env["kind"] = "remote"
            env["endpoint"] = os.environ["EMBED_ENDPOINT"]
        if os.environ.get("EMBED_MODEL"):
            env["model_name"] = os.environ["EMBED_MODEL"]
        if os.environ.get("EMBED_API_KEY"):
            env["api_key"] = os.environ["EMBED_API_KEY"]
        env.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**env)

    def public_dict(self) -> dict:
        """Config fields that identify the embedding space (no secrets)."""
        return {"kind": self.kind, "endpoint": self.endpoint, "model_name": self.model_name,
                "dim": self.dim, "seed": self.seed if self.kind == "deterministic" else None}


class EmbeddingProvider(Protocol):
    dim: int
    provider_id: str

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...


def _check_texts(texts: Sequence[str]) -> None:
    for i, t in enumerate(texts):
        if not isinstance(t, str) or not t.strip():
            raise EmptyText(f"text #{i} is empty")


class DeterministicEmbedder:
    """Offline provider: signed token hashing into ``dim`` buckets, L2-normalized.

    Texts sharing tokens get positively correlated vectors, which is all the
    retrieval tests need; the output is a pure function of (text, dim, seed).
    """

    def __init__(self, dim: int = DEFAULT_DIM, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.provider_id = f"deterministic:seed={seed}"
        self.model_name = "token-hash"

    def _hash(self, token: str) -> int:
        h = hashlib.blake2b(f"{self.seed}\x00{token}".encode(), digest_size=8).digest()
        return int.from_bytes(h, "little")

    def embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        tokens = _TOKEN_RE.findall(text.lower()) or [text]
        for tok in tokens:
            h = self._hash(tok)
            vec[h % self.dim] += 1.0 if (h >> 40) & 1 else -1.0
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            vec[self._hash(text) % self.dim] = 1.0
            norm = 1.0
        return (vec / norm).astype(np.float32)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        _check_texts(texts)
        return [self.embed_one(t) for t in texts]


class RemoteEmbedder:
    """Minimal JSON-over-HTTP client.

    Request: ``{"model": ..., "input": [...]}``. Response: either
    ``{"data": [{"embedding": [...], "index": i}, ...]}`` or
    ``{"embeddings": [[...], ...]}``.
    """

    def __init__(self, config: EmbeddingProviderConfig, client=None, sleep=time.sleep):
        import httpx

        self.config = config
        self._sleep = sleep
        self.dim = config.dim
        self.model_name = config.model_name
        self.provider_id = f"remote:{config.endpoint}"
        headers = {"Authorization": f"Bearer {config.api_key}"} if config.api_key else {}
        self._client = client or httpx.Client(timeout=config.timeout, headers=headers)
        self._httpx = httpx

    def _post(self, batch: list[str]) -> list[np.ndarray]:
        httpx = self._httpx
        delay = 0.5
        last: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            try:
                resp = self._client.post(self.config.endpoint,
                                         json={"model": self.model_name, "input": batch})
                if resp.status_code == 429 or resp.status_code >= 500:
                    raise ProviderUnavailable(f"embedding endpoint returned HTTP {resp.status_code}")
                resp.raise_for_status()
                return self._decode(resp.json(), len(batch))
            except (httpx.TransportError, ProviderUnavailable) as exc:
                last = exc
                if attempt < self.config.max_retries:
                    self._sleep(delay)
                    delay *= 2
            except httpx.HTTPStatusError as exc:
                raise ProviderUnavailable(f"embedding request rejected: {exc}", batch) from exc
        raise ProviderUnavailable(
            f"embedding endpoint unavailable after {self.config.max_retries + 1} attempts: {last}", batch)

    def _decode(self, payload: dict, n: int) -> list[np.ndarray]:
        if "data" in payload:
            items = sorted(payload["data"], key=lambda d: d.get("index", 0))
            raw = [d["embedding"] for d in items]
        else:
            raw = payload["embeddings"]
        if len(raw) != n:
            raise ProviderUnavailable(f"expected {n} embeddings, got {len(raw)}")
        out = []
        for v in raw:
            arr = np.asarray(v, dtype=np.float32)
            if arr.shape != (self.dim,):
                raise DimensionMismatch(f"provider returned dim {arr.shape}, expected {self.dim}")
            if not np.all(np.isfinite(arr)):
                raise ProviderUnavailable("provider returned non-finite embedding values")
            out.append(arr)
        return out

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        _check_texts(texts)
        texts = list(texts)
        bs = self.config.batch_size
        batches = [texts[i:i + bs] for i in range(0, len(texts), bs)]
        if len(batches) <= 1 or self.config.parallelism <= 1:
            results = [self._post(b) for b in batches]
        else:
            with ThreadPoolExecutor(self.config.parallelism) as pool:
                results = list(pool.map(self._post, batches))
        return [v for batch in results for v in batch]


def make_provider(config: EmbeddingProviderConfig, client=None) -> EmbeddingProvider:
    if config.kind == "deterministic":
        return DeterministicEmbedder(config.dim, config.seed)
    return RemoteEmbedder(config, client=client)


class EmbeddingCache:
    """Append-only JSON-lines file mapping a key to a float32 vector."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self._entries: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            self._load()

    def _load(self) -> None:
        with self.path.open(encoding="utf-8") as fh:
            header = fh.readline()
            try:
                meta = json.loads(header)
            except json.JSONDecodeError:
                raise VersionMismatch(f"{self.path}: not an embedding cache file")
            if meta.get("format") != CACHE_FORMAT or meta.get("version") != CACHE_VERSION:
                raise VersionMismatch(f"{self.path}: cache header {meta!r} not supported")
            for line in fh:
                try:
                    rec = json.loads(line)
                    vec = np.frombuffer(base64.b64decode(rec["vector"]), dtype="<f4").copy()
                except (json.JSONDecodeError, KeyError, ValueError):
                    log.warning("skipping damaged cache line in %s", self.path)
                    continue
                if vec.shape != (rec["dim"],):
                    continue
                self._entries[rec["key"]] = vec

    @staticmethod
    def key(provider_id: str, model: str, dim: int, text: str) -> str:
        h = hashlib.sha256()
        h.update(f"{provider_id}\x00{model}\x00{dim}\x00".encode())
        h.update(text.encode("utf-8"))
        return h.hexdigest()

    def get(self, key: str) -> np.ndarray | None:
        return self._entries.get(key)

    def put_many(self, items: list[tuple[str, np.ndarray]]) -> None:
        with self._lock:
            new = [(k, v) for k, v in items if k not in self._entries]
            for k, v in new:
                self._entries[k] = np.asarray(v, dtype=np.float32)
            if not self.path or not new:
                return
            fresh = not self.path.exists()
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                if fresh:
                    fh.write(json.dumps({"format": CACHE_FORMAT, "version": CACHE_VERSION}) + "\n")
                for k, v in new:
                    vec = np.asarray(v, dtype="<f4")
                    fh.write(json.dumps({"key": k, "dim": int(vec.shape[0]),
                                         "vector": base64.b64encode(vec.tobytes()).decode()}) + "\n")

    def __len__(self) -> int:
        return len(self._entries)


class CachedEmbedder:
    """Wraps a provider with an ``EmbeddingCache``; only misses hit the provider."""

    def __init__(self, provider: EmbeddingProvider, cache: EmbeddingCache | None = None):
        self.provider = provider
        self.cache = cache if cache is not None else EmbeddingCache()
        self.dim = provider.dim
        self.provider_id = provider.provider_id

    def _key(self, text: str) -> str:
        return EmbeddingCache.key(self.provider.provider_id, getattr(self.provider, "model_name", ""),
                                  self.provider.dim, text)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        _check_texts(texts)
        keys = [self._key(t) for t in texts]
        missing: dict[str, str] = {}
        for k, t in zip(keys, texts):
            if self.cache.get(k) is None:
                missing.setdefault(k, t)
        if missing:
            try:
                vecs = self.provider.embed(list(missing.values()))
            except ProviderUnavailable as exc:
                raise ProviderUnavailable(
                    f"{exc}; {len(missing)} text(s) not in cache", list(missing.values())) from exc
            self.cache.put_many(list(zip(missing.keys(), vecs)))
        return [self.cache.get(k) for k in keys]
