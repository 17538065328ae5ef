"""Dense index over distinct header names with exact top-k lookup.

The index holds one unit-norm vector per distinct normalized header name
(names, not columns: a name shared by many tables appears once). Lookup
is an exact linear scan, which at repository scale (thousands of distinct
names) is faster and simpler than an ANN structure.
"""

import struct
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .corpus import Corpus
from .encoders import Encoder
from .errors import DimensionMismatch, EncoderFailure, IndexFormatError

_MAGIC = b"TSHX"
_VERSION = 1


class HeaderIndex:
    """Distinct header names with row-aligned unit-norm float32 vectors."""

    def __init__(self, names: Sequence[str], vectors: np.ndarray, encoder_id: str):
        if vectors.ndim != 2 or vectors.shape[0] != len(names):
            raise ValueError("vectors must be one row per name")
        self.names: List[str] = list(names)
        self.vectors: np.ndarray = np.ascontiguousarray(vectors, dtype=np.float32)
        self.encoder_id = encoder_id

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.names)


def build_header_index(corpus: Corpus, encoder: Encoder, batch_size: int = 256) -> HeaderIndex:
    """Encode every distinct normalized header name, in sorted order.

    Rows are renormalized to unit length; a zero-norm embedding is a
    contract violation and raises EncoderFailure.
    """
    names = corpus.distinct_headers()
    blocks = []
    for start in range(0, len(names), batch_size):
        blocks.append(encoder.encode(names[start:start + batch_size]))
    if blocks:
        matrix = np.vstack(blocks).astype(np.float32, copy=False)
    else:
        matrix = np.zeros((0, encoder.dim), dtype=np.float32)
    if matrix.shape != (len(names), encoder.dim):
        raise EncoderFailure(f"encoder returned shape {matrix.shape}, expected {(len(names), encoder.dim)}")
    norms = np.linalg.norm(matrix, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise EncoderFailure(f"zero-norm embedding for header {names[int(zero[0])]!r}")
    matrix = matrix / norms[:, None]
    return HeaderIndex(names, matrix.astype(np.float32, copy=False), encoder.id)


def top_k_names(index: HeaderIndex, query_vec: np.ndarray, k: int) -> List[Tuple[str, float]]:
    """Exact top-k by cosine, descending; ties broken by name ascending."""
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(query_vec, dtype=np.float32).reshape(-1)
    if q.shape[0] != index.dim:
        raise DimensionMismatch(f"query has dim {q.shape[0]}, index has dim {index.dim}")
    if len(index) == 0:
        return []
    norm = float(np.linalg.norm(q))
    scores = index.vectors @ (q / norm) if norm > 0.0 else np.zeros(len(index), dtype=np.float32)
    scores = np.clip(scores, -1.0, 1.0)
    order = sorted(range(len(index)), key=lambda i: (-float(scores[i]), index.names[i]))
    return [(index.names[i], float(scores[i])) for i in order[:k]]


def save_index(index: HeaderIndex, path: Path) -> None:
    """Write the versioned little-endian binary format."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", _MAGIC, _VERSION, index.dim, len(index)))
        enc = index.encoder_id.encode("utf-8")
        fh.write(struct.pack("<I", len(enc)))
        fh.write(enc)
        for name in index.names:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        fh.write(np.ascontiguousarray(index.vectors, dtype="<f4").tobytes())


def load_index(path: Path) -> HeaderIndex:
    """Read a file written by ``save_index``; round-trips bit-exactly."""
    data = Path(path).read_bytes()
    try:
        magic, version, dim, count = struct.unpack_from("<4sIII", data, 0)
        if magic != _MAGIC:
            raise IndexFormatError(f"{path}: bad magic {magic!r}")
        if version != _VERSION:
            raise IndexFormatError(f"{path}: unsupported version {version}")
        offset = struct.calcsize("<4sIII")
        enc_id, offset = _read_str(data, offset)
        names = []
        for _ in range(count):
            name, offset = _read_str(data, offset)
            names.append(name)
        need = count * dim * 4
        if len(data) - offset != need:
            raise IndexFormatError(f"{path}: matrix payload is {len(data) - offset} bytes, expected {need}")
        matrix = np.frombuffer(data, dtype="<f4", count=count * dim, offset=offset).reshape(count, dim)
    except struct.error as exc:
        raise IndexFormatError(f"{path}: truncated index file") from exc
    return HeaderIndex(names, matrix.copy(), enc_id)


def _read_str(data: bytes, offset: int) -> Tuple[str, int]:
    (length,) = struct.unpack_from("<I", data, offset)
    offset += 4
    raw = data[offset:offset + length]
    if len(raw) != length:
        raise struct.error("string field extends past end of file")
    return raw.decode("utf-8"), offset + length
