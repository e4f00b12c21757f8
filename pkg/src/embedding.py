"""
Text embedding providers

The default provider is a deterministic signed feature-hashing embedder:

- tokens are maximal runs of ASCII letters and digits, lower-cased
- each token is hashed with BLAKE2b (8-byte digest, key ``tradmem-embed-v1``)
- bucket = digest (little-endian int) mod dimension; sign = +1 if bit 63 is 0, else -1
- the summed vector is L2-normalized

The same text therefore maps to the same vector on every platform and in
every process. An HTTP provider with the same interface can be selected
from the run config.
"""

import hashlib
import logging
import re
from abc import ABC, abstractmethod
from typing import List, Optional, Sequence

import httpx
import numpy as np
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

try:
    from .errors import CoreUnavailable, DegenerateEmbedding, DimensionMismatch
except ImportError:
    from errors import CoreUnavailable, DegenerateEmbedding, DimensionMismatch

logger = logging.getLogger(__name__)

DEFAULT_DIMENSION = 256
HASH_KEY = b"tradmem-embed-v1"
# Rehash key for texts whose tokens cancel out under HASH_KEY
FALLBACK_HASH_KEY = b"tradmem-embed-v1-fallback"

_TOKEN_PATTERN = re.compile(r"[A-Za-z0-9]+")

# Unit-norm float64 array of the configured dimension
EmbeddingVector = np.ndarray


def tokenize(text: str) -> List[str]:
    """Split on whitespace and punctuation, ASCII case-folded"""
    return [token.lower() for token in _TOKEN_PATTERN.findall(text or "")]


def normalize_vector(values: Sequence[float], dimension: Optional[int] = None) -> EmbeddingVector:
    """
    Convert values to a unit-norm float64 vector

    Args:
        values: Raw vector values
        dimension: Expected dimension (optional)

    Returns:
        L2-normalized numpy array

    Raises:
        DimensionMismatch: If dimension is given and differs
        DegenerateEmbedding: If the vector has zero norm
    """
    vector = np.asarray(values, dtype=np.float64)
    if dimension is not None and vector.shape != (dimension,):
        raise DimensionMismatch(
            f"Expected dimension {dimension}, got {vector.shape}",
            {"expected": dimension, "actual": list(vector.shape)}
        )
    norm = float(np.linalg.norm(vector))
    if norm == 0.0 or not np.isfinite(norm):
        raise DegenerateEmbedding("Cannot normalize a zero-norm vector")
    return vector / norm


class EmbeddingProvider(ABC):
    """Base interface for text-to-vector providers"""

    dimension: int

    @abstractmethod
    def embed_text(self, text: str) -> EmbeddingVector:
        """
        Embed one text

        Args:
            text: Text containing at least one token

        Returns:
            Unit-norm vector of ``self.dimension``
        """
        pass

    def embed_many(self, texts: Sequence[str]) -> List[EmbeddingVector]:
        """Embed several texts"""
        return [self.embed_text(text) for text in texts]


class HashingEmbedder(EmbeddingProvider):
    """Deterministic signed feature-hashing embedder"""

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 1:
            raise ValueError("Embedding dimension must be positive")
        self.dimension = dimension

    def _bucket(self, token: str, key: bytes = HASH_KEY) -> tuple:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=key).digest()
        value = int.from_bytes(digest, "little")
        sign = -1.0 if (value >> 63) & 1 else 1.0
        return value % self.dimension, sign

    def embed_text(self, text: str) -> EmbeddingVector:
        tokens = tokenize(text)
        if not tokens:
            raise DegenerateEmbedding(
                "Text has no alphanumeric tokens",
                {"text": (text or "")[:80]}
            )

        for key in (HASH_KEY, FALLBACK_HASH_KEY):
            vector = np.zeros(self.dimension, dtype=np.float64)
            for token in tokens:
                index, sign = self._bucket(token, key)
                vector[index] += sign
            if np.any(vector):
                break
            # Colliding tokens with opposite signs cancelled out
            logger.debug(f"Tokens of {text[:40]!r} cancel under key {key!r}, rehashing")

        return normalize_vector(vector)


class HttpEmbedder(EmbeddingProvider):
    """
    External embedding service

    Contract: POST ``{"texts": [...]}`` returns ``{"vectors": [[...], ...]}``.
    """

    def __init__(self, endpoint: str, dimension: int = DEFAULT_DIMENSION,
                 timeout: float = 30.0, client: Optional[httpx.Client] = None):
        """
        Initialize HTTP embedder

        Args:
            endpoint: Service URL
            dimension: Expected vector dimension
            timeout: Request timeout in seconds
            client: Optional preconfigured httpx client (tests)
        """
        self.endpoint = endpoint
        self.dimension = dimension
        self.timeout = httpx.Timeout(timeout, connect=min(timeout, 10.0))
        self._client = client
        logger.info(f"HTTP embedder configured for {endpoint} (dim={dimension})")

    @retry(
        stop=stop_after_attempt(3),
        wait=wait_exponential(multiplier=1, min=1, max=8),
        retry=retry_if_exception_type((httpx.TimeoutException, httpx.ConnectError)),
        reraise=True
    )
    def _post(self, texts: Sequence[str]) -> httpx.Response:
        client = self._client or httpx.Client(timeout=self.timeout)
        try:
            return client.post(self.endpoint, json={"texts": list(texts)})
        finally:
            if self._client is None:
                client.close()

    def embed_many(self, texts: Sequence[str]) -> List[EmbeddingVector]:
        for text in texts:
            if not tokenize(text):
                raise DegenerateEmbedding("Text has no alphanumeric tokens")

        try:
            response = self._post(texts)
        except httpx.HTTPError as e:
            logger.error(f"Embedding service unreachable: {e}")
            raise CoreUnavailable(f"Embedding service unreachable: {e}")

        if response.status_code != 200:
            raise CoreUnavailable(
                f"Embedding service returned {response.status_code}",
                {"body": response.text[:200]}
            )

        vectors = response.json().get("vectors", [])
        if len(vectors) != len(texts):
            raise CoreUnavailable(
                f"Embedding service returned {len(vectors)} vectors for {len(texts)} texts"
            )
        return [normalize_vector(v, self.dimension) for v in vectors]

    def embed_text(self, text: str) -> EmbeddingVector:
        return self.embed_many([text])[0]


def create_embedder(kind: str = "hashing", dimension: int = DEFAULT_DIMENSION,
                    endpoint: Optional[str] = None, timeout: float = 30.0) -> EmbeddingProvider:
    """
    Build the configured embedding provider

    Args:
        kind: "hashing" or "http"
        dimension: Vector dimension
        endpoint: Service URL (http only)
        timeout: Request timeout (http only)

    Returns:
        EmbeddingProvider instance
    """
    if kind == "hashing":
        return HashingEmbedder(dimension)
    if kind == "http":
        if not endpoint:
            raise ValueError("HTTP embedder requires an endpoint")
        return HttpEmbedder(endpoint, dimension=dimension, timeout=timeout)
    raise ValueError(f"Unknown embedding provider: {kind}")
