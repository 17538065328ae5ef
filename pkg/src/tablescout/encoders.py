"""Text encoders behind a single deterministic contract.

Any object with ``dim``, ``id``, and ``encode(texts) -> (len(texts), dim)``
float32 array works as an encoder. The local hash encoder needs no model
assets and is fully deterministic; the remote adapter speaks a minimal
HTTP protocol so a real embedding server can be plugged in unchanged.
"""

import logging
import zlib
from typing import List, Protocol, Sequence

import httpx
import numpy as np

from .errors import EncoderFailure

log = logging.getLogger(__name__)


class Encoder(Protocol):
    dim: int
    id: str

    def encode(self, texts: Sequence[str]) -> np.ndarray: ...


class LocalHashEncoder:
    """Character-trigram hashing into ``dim`` buckets, L2-normalized.

    Texts are casefolded and padded with ``#`` boundary markers, so the
    same string always maps to the same vector regardless of process or
    platform. Strings too short to yield a trigram fall back to a single
    whole-string feature, keeping every vector nonzero.
    """

    def __init__(self, dim: int = 256):
        if dim < 8:
            raise ValueError("hash encoder dimension must be >= 8")
        self.dim = dim
        self.id = f"hash-trigram-v1-d{dim}"

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for row, text in enumerate(texts):
            padded = f"#{text.casefold()}#"
            grams = [padded[i:i + 3] for i in range(len(padded) - 2)] or [padded]
            for gram in grams:
                out[row, zlib.crc32(gram.encode("utf-8")) % self.dim] += 1.0
            norm = float(np.linalg.norm(out[row]))
            if norm > 0.0:
                out[row] /= norm
        return out


class RemoteHttpEncoder:
    """Adapter for an embedding HTTP endpoint.

    Wire format: POST ``{"texts": [...]}``, response ``{"vectors": [[...], ...]}``.
    Requests are chunked to ``batch_size`` texts; any transport error or a
    shape mismatch raises EncoderFailure naming the offending batch.
    """

    def __init__(self, endpoint: str, dim: int, batch_size: int = 64,
                 timeout: float = 30.0, client: httpx.Client = None):
        self.endpoint = endpoint
        self.dim = dim
        self.batch_size = batch_size
        self.id = f"remote:{endpoint}:d{dim}"
        self._client = client or httpx.Client(timeout=timeout)

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        chunks: List[np.ndarray] = []
        for start in range(0, len(texts), self.batch_size):
            batch = list(texts[start:start + self.batch_size])
            chunks.append(self._encode_batch(batch, start))
        if not chunks:
            return np.zeros((0, self.dim), dtype=np.float32)
        return np.vstack(chunks)

    def _encode_batch(self, batch: List[str], start: int) -> np.ndarray:
        label = f"batch at offset {start} ({len(batch)} texts)"
        try:
            resp = self._client.post(self.endpoint, json={"texts": batch})
            resp.raise_for_status()
            vectors = resp.json().get("vectors")
        except (httpx.HTTPError, ValueError) as exc:
            raise EncoderFailure(f"{label}: {exc}") from exc
        arr = np.asarray(vectors, dtype=np.float32)
        if arr.ndim != 2 or arr.shape != (len(batch), self.dim):
            raise EncoderFailure(f"{label}: expected shape {(len(batch), self.dim)}, got {getattr(arr, 'shape', None)}")
        if not np.isfinite(arr).all():
            raise EncoderFailure(f"{label}: non-finite values in response")
        return arr
