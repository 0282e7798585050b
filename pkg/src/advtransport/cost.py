"""Cross-class distance matrices and the thresholded indistinguishability graph."""
from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import BinaryTask, DatasetError
from .numerics import BALL_KINDS, BallSpec, ball_norms

CACHE_MAGIC = b"ADVD"
_CACHE_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Perturbation set ``N(x) = x + beta * B``."""

    ball: BallSpec
    beta: float

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")


class IndistGraph:
    """Bipartite graph on (class_pos, class_neg) samples, stored as packed bits.

    Bit ``(i, j)`` is set when the two samples can be moved to a common point,
    i.e. the adversarial cost between them is zero.
    """

    __slots__ = ("k", "_bits")

    def __init__(self, adjacency):
        adj = np.asarray(adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {adj.shape}")
        self.k = adj.shape[0]
        self._bits = np.packbits(adj, axis=1)
        self._bits.setflags(write=False)

    @classmethod
    def empty(cls, k: int) -> "IndistGraph":
        return cls(np.zeros((k, k), dtype=bool))

    @classmethod
    def complete(cls, k: int) -> "IndistGraph":
        return cls(np.ones((k, k), dtype=bool))

    def to_dense(self) -> np.ndarray:
        return np.unpackbits(self._bits, axis=1, count=self.k).astype(bool)

    def row(self, i: int) -> np.ndarray:
        return np.unpackbits(self._bits[i], count=self.k).astype(bool)

    def neighbors(self, i: int) -> list[int]:
        return np.flatnonzero(self.row(i)).tolist()

    def adjacency_lists(self) -> list[list[int]]:
        dense = self.to_dense()
        return [np.flatnonzero(r).tolist() for r in dense]

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self._bits[i, j >> 3] & (0x80 >> (j & 7)))

    @property
    def num_edges(self) -> int:
        return int(np.unpackbits(self._bits, axis=1, count=self.k).sum())

    @property
    def nbytes(self) -> int:
        return self._bits.nbytes

    def transpose(self) -> "IndistGraph":
        return IndistGraph(self.to_dense().T)

    def issubset(self, other: "IndistGraph") -> bool:
        return self.k == other.k and not np.any(self._bits & ~other._bits)

    def __eq__(self, other) -> bool:
        return isinstance(other, IndistGraph) and self.k == other.k and np.array_equal(self._bits, other._bits)

    def __repr__(self) -> str:
        return f"IndistGraph(k={self.k}, edges={self.num_edges})"


def pairwise_distances(task: BinaryTask, ball: BallSpec, workers: int = 1) -> np.ndarray:
    """``D[i, j] = |x_i - x'_j|_B`` for ``x_i`` in class_pos and ``x'_j`` in class_neg.

    Each row is computed independently with the same kernel as a single-pair
    evaluation, so the result does not depend on ``workers``.
    """
    pos, neg = task.class_pos, task.class_neg
    if pos.shape[1] != neg.shape[1]:
        raise DatasetError(f"dimension mismatch between classes: {pos.shape[1]} vs {neg.shape[1]}")
    out = np.empty((len(pos), len(neg)))

    def fill(i):
        out[i] = ball_norms(pos[i] - neg, ball)

    if workers <= 1:
        for i in range(len(pos)):
            fill(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, range(len(pos))))
    return out


def threshold(distances, beta: float) -> IndistGraph:
    """Edge ``(i, j)`` iff ``D[i, j] <= 2 beta`` (closed balls touching counts)."""
    if not beta >= 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    return IndistGraph(np.asarray(distances) <= 2.0 * beta)


def save_distances(path, distances, dim: int, ball: BallSpec) -> None:
    """Cache ``D``: header (``ADVD``, k, d, ball code) then little-endian float64, row-major."""
    d = np.ascontiguousarray(distances, dtype="<f8")
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("distance matrix must be square")
    with open(path, "wb") as fh:
        fh.write(_CACHE_HEADER.pack(CACHE_MAGIC, d.shape[0], dim, BALL_KINDS.index(ball.kind)))
        fh.write(d.tobytes())


def load_distances(path) -> tuple[np.ndarray, int, str]:
    """Inverse of :func:`save_distances`; returns ``(D, d, ball_kind)``."""
    raw = Path(path).read_bytes()
    if len(raw) < _CACHE_HEADER.size:
        raise DatasetError(f"{path}: truncated distance cache header")
    magic, k, dim, code = _CACHE_HEADER.unpack_from(raw)
    if magic != CACHE_MAGIC:
        raise DatasetError(f"{path}: not a distance cache (magic {magic!r})")
    if code >= len(BALL_KINDS):
        raise DatasetError(f"{path}: unknown ball code {code}")
    body = raw[_CACHE_HEADER.size:]
    if len(body) != 8 * k * k:
        raise DatasetError(f"{path}: expected {8 * k * k} payload bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(k, k).astype(float), dim, BALL_KINDS[code]
