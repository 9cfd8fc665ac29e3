"""Brute-force linear scan: the ground truth every index result is checked against.

Deliberately unoptimized beyond jitting the loop.  It calls the same
float64 distance kernel as the index, so distances agree bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import ArgumentError, DimensionError, EmptyStoreError
from .geometry import _sq_dist, _sq_dist_rows, as_vector

__all__ = ["FlatStore", "Neighbor", "scan_nn", "scan_knn"]


@dataclass(frozen=True)
class Neighbor:
    index: int
    sq_distance: float


class FlatStore:
    """An ordered, uniform-dimension collection of float32 vectors."""

    def __init__(self, vectors, dim: int | None = None):
        arr = np.ascontiguousarray(vectors, dtype=np.float32)
        if arr.ndim == 1 and arr.shape[0] == 0:
            arr = arr.reshape(0, dim or 0)
        if arr.ndim != 2:
            raise DimensionError(f"expected a 2-D array of vectors, got shape {arr.shape}")
        if dim is not None and arr.shape[1] != dim:
            raise DimensionError(f"expected dimension {dim}, got {arr.shape[1]}")
        self.vectors = arr
        self.dim = int(arr.shape[1])

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def __getitem__(self, i):
        return self.vectors[i]

    def __repr__(self):
        return f"FlatStore(n={len(self)}, dim={self.dim})"


@numba.njit(nogil=True, cache=True)
def _scan(x, q):
    best = -1
    best_d = np.inf
    for i in range(x.shape[0]):
        d = _sq_dist(x[i], q)
        if d < best_d:
            best_d = d
            best = i
    return best, best_d


@numba.njit(nogil=True, cache=True)
def _scan_many(x, queries, out_idx, out_dist):
    for j in range(queries.shape[0]):
        b, d = _scan(x, queries[j])
        out_idx[j] = b
        out_dist[j] = d


def _check(store: FlatStore, q) -> np.ndarray:
    if len(store) == 0:
        raise EmptyStoreError("store is empty")
    return as_vector(q, store.dim)


def scan_nn(store: FlatStore, q) -> Neighbor:
    """Nearest stored vector to ``q``; ties go to the lowest position."""
    q = _check(store, q)
    i, d = _scan(store.vectors, q)
    return Neighbor(int(i), float(d))


def scan_nn_many(store: FlatStore, queries) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`scan_nn`; returns (positions, sq distances)."""
    if len(store) == 0:
        raise EmptyStoreError("store is empty")
    Q = np.ascontiguousarray(queries, dtype=np.float32)
    if Q.ndim != 2 or Q.shape[1] != store.dim:
        raise DimensionError(f"expected queries of shape (m, {store.dim}), got {Q.shape}")
    idx = np.empty(Q.shape[0], np.int64)
    dist = np.empty(Q.shape[0], np.float64)
    _scan_many(store.vectors, Q, idx, dist)
    return idx, dist


def scan_knn(store: FlatStore, q, k: int) -> list[Neighbor]:
    """The ``k`` nearest stored vectors, ascending, ties by lower position."""
    if k < 1 or k > len(store):
        raise ArgumentError(f"k must be in [1, {len(store)}], got {k}")
    q = _check(store, q)
    d = np.empty(len(store), np.float64)
    _sq_dist_rows(store.vectors, q, d)
    order = np.argsort(d, kind="stable")[:k]
    return [Neighbor(int(i), float(d[i])) for i in order]
