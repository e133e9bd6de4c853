"""Client for OpenAI-compatible embedding endpoints, with a local cache.

Vectors are fetched in batches and cached by (endpoint, model, text hash) so
repeated schema comparisons and grounding runs do not re-embed identical
texts. Any backend speaking POST {base_url}/embeddings works.
"""

from __future__ import annotations

import hashlib
from typing import Optional

import numpy as np
import requests

from schemaloom import SchemaloomError


class EmbeddingError(SchemaloomError):
    pass


class EmbedderUnreachable(EmbeddingError):
    pass


class DimensionMismatch(EmbeddingError):
    pass


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity clamped to [-1, 1]; zero vectors compare as 0.0."""
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return max(-1.0, min(1.0, float(np.dot(u, v) / (nu * nv))))


class EmbeddingClient:
    """Fetch embeddings over HTTP; results are memoized per client."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str = "",
        timeout: float = 60.0,
        batch_size: int = 64,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.batch_size = batch_size
        self._cache: dict[tuple[str, str, str], np.ndarray] = {}
        self._dim: Optional[int] = None

    def _key(self, text: str) -> tuple[str, str, str]:
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return (self.base_url, self.model, digest)

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        """Embed each text, serving repeats from the cache."""
        missing = [t for t in dict.fromkeys(texts) if self._key(t) not in self._cache]
        for start in range(0, len(missing), self.batch_size):
            batch = missing[start:start + self.batch_size]
            for text, vector in zip(batch, self._fetch(batch)):
                if self._dim is None:
                    self._dim = len(vector)
                elif len(vector) != self._dim:
                    raise DimensionMismatch(
                        f"endpoint returned a {len(vector)}-dim vector, expected {self._dim}"
                    )
                self._cache[self._key(text)] = np.asarray(vector, dtype=np.float64)
        return [self._cache[self._key(t)] for t in texts]

    def embed_one(self, text: str) -> np.ndarray:
        return self.embed([text])[0]

    def _fetch(self, batch: list[str]) -> list[list[float]]:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = requests.post(
                f"{self.base_url}/embeddings",
                json={"model": self.model, "input": batch},
                headers=headers,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise EmbedderUnreachable(f"embedding endpoint failed: {exc}") from exc
        if resp.status_code != 200:
            raise EmbedderUnreachable(f"embedding endpoint returned HTTP {resp.status_code}")
        try:
            data = resp.json()["data"]
            vectors = [entry["embedding"] for entry in data]
        except (ValueError, LookupError, TypeError) as exc:
            raise EmbedderUnreachable(f"malformed embedding response: {exc}") from exc
        if len(vectors) != len(batch):
            raise EmbedderUnreachable(
                f"asked for {len(batch)} embeddings, got {len(vectors)}"
            )
        return vectors
