"""Distance and bisector-margin primitives.

Vectors are stored as float32 but every distance is accumulated in float64,
component by component, in index order.  The jitted kernels (``_sq_dist`` and
friends) are the single source of that accumulation order: the index, the
brute-force oracle and the diagnostics all call them, so exactness checks can
compare results bit for bit.
"""
from __future__ import annotations

import math

import numba
import numpy as np

from .errors import DegenerateHyperplane, DimensionError, NonFiniteError, ZeroVectorError

__all__ = [
    "as_vector",
    "sq_dist",
    "margin",
    "prefers_left",
    "normalize",
]


@numba.njit(nogil=True, cache=True, inline="always")
def _sq_dist(a, b):
    s = 0.0
    for i in range(a.shape[0]):
        t = np.float64(a[i]) - np.float64(b[i])
        s += t * t
    return s


@numba.njit(nogil=True, cache=True)
def _sq_dist_rows(x, q, out):
    for i in range(x.shape[0]):
        out[i] = _sq_dist(x[i], q)


@numba.njit(nogil=True, cache=True)
def _normalize_into(v, out):
    s = 0.0
    for i in range(v.shape[0]):
        s += np.float64(v[i]) * np.float64(v[i])
    if s == 0.0:
        return False
    norm = math.sqrt(s)
    for i in range(v.shape[0]):
        out[i] = np.float32(np.float64(v[i]) / norm)
    return True


@numba.njit(nogil=True, cache=True)
def _normalize_rows(x, out):
    """Normalize every row; returns the first zero row index or -1."""
    for i in range(x.shape[0]):
        if not _normalize_into(x[i], out[i]):
            return i
    return -1


def as_vector(v, dim: int | None = None) -> np.ndarray:
    """Coerce ``v`` to a contiguous 1-D float32 array and validate it."""
    arr = np.ascontiguousarray(v, dtype=np.float32)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise DimensionError(f"expected a non-empty 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise NonFiniteError("vector has NaN or infinite components")
    return arr


def _pair(a, b):
    a = as_vector(a)
    b = as_vector(b, a.shape[0])
    return a, b


def sq_dist(a, b) -> float:
    """Squared Euclidean distance, accumulated in float64."""
    a, b = _pair(a, b)
    return float(_sq_dist(a, b))


def margin(q, left, right) -> float:
    """Signed distance from ``q`` to the bisector of ``left`` and ``right``.

    Positive when ``q`` lies strictly on the ``left`` side.
    """
    q = as_vector(q)
    left = as_vector(left, q.shape[0])
    right = as_vector(right, q.shape[0])
    sep = _sq_dist(left, right)
    if sep == 0.0:
        raise DegenerateHyperplane("left and right support vectors are identical")
    return float((_sq_dist(q, right) - _sq_dist(q, left)) / (2.0 * math.sqrt(sep)))


def prefers_left(q, left, right) -> bool:
    """Routing comparator: True when ``q`` is at least as close to ``left``.

    Exact ties route left.  Insertion, lookup and search all route through
    this rule (the jitted index kernels inline the same comparison).
    """
    q = as_vector(q)
    left = as_vector(left, q.shape[0])
    right = as_vector(right, q.shape[0])
    return bool(_sq_dist(q, left) <= _sq_dist(q, right))


def normalize(v) -> np.ndarray:
    """Scale ``v`` to unit Euclidean norm (float64 arithmetic, float32 result)."""
    v = as_vector(v)
    out = np.empty_like(v)
    if not _normalize_into(v, out):
        raise ZeroVectorError("cannot normalize the zero vector")
    return out


def normalize_rows(x: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float32)
    out = np.empty_like(x)
    bad = _normalize_rows(x, out)
    if bad >= 0:
        raise ZeroVectorError(f"row {bad} is the zero vector and cannot be normalized")
    return out
