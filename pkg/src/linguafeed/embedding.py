"""Text embeddings: a deterministic local hash provider and a remote
HTTP provider client with disk caching.

The local provider needs no network or model weights: it feature-hashes
character n-grams (sizes 3..5) of the lowercased text into ``dim`` signed
buckets and L2-normalizes. It is the default provider and the one the test
suite trains against.

Remote vectors are rounded to float32 precision at the trust boundary so a
cache round-trip returns bit-identical values. Local hash vectors are exact
float64 and are never disk-cached.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import struct
import threading
import zlib
from dataclasses import dataclass

import numpy as np

from ._kernels import fnv_state, ngram_hash_accumulate

logger = logging.getLogger(__name__)

LOCAL_PROVIDER_ID = "local-hash"
MIN_DIM = 8


class ProviderUnavailableError(RuntimeError):
    """Remote provider kept failing after the configured retries."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class ProviderContractError(RuntimeError):
    """Remote provider answered with a malformed or invalid payload."""


@dataclass(frozen=True)
class EmbeddingVector:
    """A finite 1-D float64 vector stamped with the provider that made it."""

    values: np.ndarray
    provider_id: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("vector must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValueError("vector contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class ProviderConfig:
    """Which provider to call and how.

    ``endpoint`` set to ``"local-hash"`` (or empty) selects the in-process
    hash provider; anything else is treated as an HTTP URL. ``max_words``
    truncates long documents before embedding.
    """

    provider_id: str = LOCAL_PROVIDER_ID
    endpoint: str = LOCAL_PROVIDER_ID
    dim: int = 256
    batch_size: int = 16
    timeout: float = 10.0
    retry_limit: int = 2
    max_words: int = 2000

    def __post_init__(self):
        if not self.provider_id.strip():
            raise ValueError("provider_id must be non-blank")
        if self.dim < MIN_DIM:
            raise ValueError(f"dim must be at least {MIN_DIM}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be non-negative")
        if self.max_words < 1:
            raise ValueError("max_words must be positive")

    @property
    def is_local(self) -> bool:
        return self.endpoint in ("", LOCAL_PROVIDER_ID)


def local_hash_seed(provider_id: str) -> int:
    """Stable per-provider hash seed (CRC-32 of the provider id)."""
    return zlib.crc32(provider_id.encode("utf-8"))


def hash_embed(text: str, dim: int, seed: int, provider_id: str = LOCAL_PROVIDER_ID) -> EmbeddingVector:
    """Feature-hash character n-grams of ``text`` into a unit vector.

    Codepoints of the lowercased text are hashed per n-gram (FNV-1a 64-bit,
    seed folded into the initial state); the hash picks a bucket and its top
    bit the sign. The accumulator is L2-normalized; a text with no n-gram at
    all (shorter than 3 codepoints) maps to the fixed unit vector e0.
    """
    if dim < MIN_DIM:
        raise ValueError(f"dim must be at least {MIN_DIM}")
    codes = np.frombuffer(text.lower().encode("utf-32-le"), dtype=np.uint32)
    acc = ngram_hash_accumulate(codes, dim, fnv_state(seed))
    norm = float(np.linalg.norm(acc))
    if norm == 0.0:
        acc = np.zeros(dim, dtype=np.float64)
        acc[0] = 1.0
    else:
        acc = acc / norm
    return EmbeddingVector(values=acc, provider_id=provider_id)


def _truncate_words(text: str, max_words: int) -> str:
    parts = text.split()
    if len(parts) <= max_words:
        return text
    return " ".join(parts[:max_words])


class EmbeddingCache:
    """Append-only disk cache keyed by (provider_id, sha256(text)).

    One small binary file per vector: little-endian uint32 dim followed by
    the float32 values. Writes go through a temp file and ``os.replace`` so
    a crash never leaves a truncated entry behind.
    """

    def __init__(self, cache_dir: str):
        self._dir = cache_dir
        os.makedirs(cache_dir, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, provider_id: str, text: str) -> str:
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        safe = hashlib.sha256(provider_id.encode("utf-8")).hexdigest()[:16]
        return os.path.join(self._dir, f"{safe}-{digest}.vec")

    def get(self, provider_id: str, text: str) -> np.ndarray | None:
        path = self._path(provider_id, text)
        try:
            with open(path, "rb") as fh:
                blob = fh.read()
        except FileNotFoundError:
            return None
        if len(blob) < 4:
            return None
        (dim,) = struct.unpack("<I", blob[:4])
        values = np.frombuffer(blob[4:], dtype="<f4")
        if values.shape[0] != dim:
            return None
        return values.astype(np.float64)

    def put(self, provider_id: str, text: str, values: np.ndarray) -> None:
        path = self._path(provider_id, text)
        blob = struct.pack("<I", values.shape[0]) + values.astype("<f4").tobytes()
        tmp = path + ".tmp"
        with self._lock:
            with open(tmp, "wb") as fh:
                fh.write(blob)
            os.replace(tmp, path)


class EmbeddingClient:
    """Embeds batches of texts through one provider.

    Local provider calls are pure computation. Remote calls are batched to
    ``cfg.batch_size``, retried up to ``cfg.retry_limit`` times per batch,
    capped to ``max_in_flight`` concurrent requests, and served from the
    cache when possible.
    """

    def __init__(
        self,
        cfg: ProviderConfig,
        *,
        cache: EmbeddingCache | None = None,
        transport=None,
        api_key_env: str = "LINGUAFEED_EMBED_API_KEY",
        max_in_flight: int = 4,
    ):
        self._cfg = cfg
        self._cache = cache
        self._transport = transport
        self._api_key_env = api_key_env
        self._semaphore = threading.Semaphore(max_in_flight)
        self._http = None
        self._http_lock = threading.Lock()

    @property
    def config(self) -> ProviderConfig:
        return self._cfg

    def close(self) -> None:
        if self._http is not None:
            self._http.close()
            self._http = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ValueError("texts must be non-empty")
        for text in texts:
            if not isinstance(text, str) or not text.strip():
                raise ValueError("texts must be non-blank strings")
        prepared = [_truncate_words(t, self._cfg.max_words) for t in texts]
        if self._cfg.is_local:
            seed = local_hash_seed(self._cfg.provider_id)
            return [
                hash_embed(t, self._cfg.dim, seed, self._cfg.provider_id)
                for t in prepared
            ]
        return self._embed_remote(prepared)

    def _embed_remote(self, texts: list[str]) -> list[EmbeddingVector]:
        out: list[np.ndarray | None] = [None] * len(texts)
        misses: list[int] = []
        if self._cache is not None:
            for i, text in enumerate(texts):
                hit = self._cache.get(self._cfg.provider_id, text)
                if hit is not None and hit.shape[0] == self._cfg.dim:
                    out[i] = hit
                else:
                    misses.append(i)
        else:
            misses = list(range(len(texts)))
        for start in range(0, len(misses), self._cfg.batch_size):
            chunk = misses[start : start + self._cfg.batch_size]
            vectors = self._request_batch([texts[i] for i in chunk])
            for i, vec in zip(chunk, vectors):
                out[i] = vec
                if self._cache is not None:
                    self._cache.put(self._cfg.provider_id, texts[i], vec)
        return [
            EmbeddingVector(values=vec, provider_id=self._cfg.provider_id)
            for vec in out
        ]

    def _client(self):
        import httpx

        with self._http_lock:
            if self._http is None:
                self._http = httpx.Client(
                    transport=self._transport, timeout=self._cfg.timeout
                )
        return self._http

    def _request_batch(self, texts: list[str]) -> list[np.ndarray]:
        import httpx

        headers = {}
        api_key = os.environ.get(self._api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {"model": self._cfg.provider_id, "input": texts}
        last_status: int | None = None
        last_error = "request failed"
        for attempt in range(self._cfg.retry_limit + 1):
            if attempt:
                logger.warning(
                    "embedding request retry %d/%d: %s",
                    attempt,
                    self._cfg.retry_limit,
                    last_error,
                )
            try:
                with self._semaphore:
                    response = self._client().post(
                        self._cfg.endpoint, json=payload, headers=headers
                    )
            except httpx.HTTPError as exc:
                last_error = str(exc) or exc.__class__.__name__
                continue
            if response.status_code != 200:
                last_status = response.status_code
                last_error = f"status {response.status_code}"
                continue
            return self._parse_response(response, len(texts))
        raise ProviderUnavailableError(
            f"embedding provider unavailable: {last_error}", status=last_status
        )

    def _parse_response(self, response, expected: int) -> list[np.ndarray]:
        try:
            body = response.json()
        except (ValueError, json.JSONDecodeError) as exc:
            raise ProviderContractError("provider returned non-JSON body") from exc
        rows = body.get("data") if isinstance(body, dict) else None
        if not isinstance(rows, list) or len(rows) != expected:
            raise ProviderContractError("provider returned wrong row count")
        vectors = []
        for row in rows:
            values = row.get("embedding") if isinstance(row, dict) else None
            if not isinstance(values, list) or len(values) != self._cfg.dim:
                raise ProviderContractError(
                    f"provider returned wrong dimensionality (want {self._cfg.dim})"
                )
            arr = np.asarray(values, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ProviderContractError("provider returned non-finite values")
            # Round-trip through float32 so cached and fresh vectors match.
            vectors.append(arr.astype(np.float32).astype(np.float64))
        return vectors


def embed_batch(
    texts: list[str],
    cfg: ProviderConfig,
    *,
    cache: EmbeddingCache | None = None,
    transport=None,
) -> list[EmbeddingVector]:
    """One-shot convenience wrapper around ``EmbeddingClient``."""
    with EmbeddingClient(cfg, cache=cache, transport=transport) as client:
        return client.embed_batch(texts)


def encode_vector(values: np.ndarray) -> str:
    """Base64 of the little-endian float64 bytes, for JSON payloads."""
    return base64.b64encode(np.asarray(values, dtype="<f8").tobytes()).decode("ascii")


def decode_vector(blob: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(blob), dtype="<f8").copy()
