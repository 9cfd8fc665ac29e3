"""Binary vector tree routed by the bisector of each node's two children.

Nodes live in flat arrays (struct-of-arrays) so the hot loops can be jitted:

* ``_vecs[i]``   float32 vector of node ``i``
* ``_left[i]``, ``_right[i]``, ``_parent[i]``  node ids, ``-1`` when absent
* ``_sep[i]``    squared distance between node ``i``'s two children (cached)

Node ids are assigned in insertion order, so the root is always node 0.
Payloads are kept in a plain dict keyed by node id.
"""
from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable

import numba
import numpy as np

from .errors import (
    ArgumentError,
    DimensionError,
    EmptyIndexError,
    FormatError,
    NonFiniteError,
    ZeroVectorError,
)
from .geometry import _normalize_into, _normalize_rows, _sq_dist, as_vector

__all__ = [
    "EUCLIDEAN",
    "COSINE",
    "BoundaryPredicate",
    "QueryResult",
    "Node",
    "FernIndex",
    "Violation",
    "LeftFillViolation",
    "ParentLinkViolation",
    "SizeViolation",
    "RoutingViolation",
    "LinkRangeViolation",
    "NormViolation",
    "new_index",
]

EUCLIDEAN = "euclidean"
COSINE = "cosine"
_METRIC_CODES = {EUCLIDEAN: 0, COSINE: 1}

_NEVER, _SAFE, _EPSILON = 0, 1, 2

MAGIC = b"FERN"
FORMAT_VERSION = 1
MAX_DIM = 100_000
_HEADER = struct.Struct("<4sIBIQ")
_HAS_LEFT, _HAS_RIGHT, _HAS_PAYLOAD = 1, 2, 4


# ---------------------------------------------------------------------------
# jitted kernels
# ---------------------------------------------------------------------------

@numba.njit(nogil=True, cache=True)
def _insert_rows(vecs, left, right, parent, sep, start, rows, depths):
    for k in range(rows.shape[0]):
        i = start + k
        v = vecs[i]
        v[:] = rows[k]
        left[i] = -1
        right[i] = -1
        parent[i] = -1
        sep[i] = 0.0
        if i == 0:
            depths[k] = 0
            continue
        cur = 0
        depth = 1
        while True:
            if left[cur] < 0:
                left[cur] = i
                break
            if right[cur] < 0:
                right[cur] = i
                sep[cur] = _sq_dist(vecs[left[cur]], v)
                break
            if _sq_dist(v, vecs[left[cur]]) <= _sq_dist(v, vecs[right[cur]]):
                cur = left[cur]
            else:
                cur = right[cur]
            depth += 1
        parent[i] = cur
        depths[k] = depth


@numba.njit(nogil=True, cache=True)
def _search(vecs, left, right, sep, q, mode, eps2, use_stack):
    """Queue (level-order) or stack (depth-first) traversal.

    Each pending entry carries the query's distance to the node (NaN when not
    yet computed) and a lower bound on the squared distance from the query to
    anything in the node's subtree, taken from the bisectors crossed to reach
    it.  Returns ``(best_node, best_sq_dist, visited)``.
    """
    cap = 64
    nodes = np.empty(cap, np.int64)
    dists = np.empty(cap, np.float64)
    bounds = np.empty(cap, np.float64)
    head = 0
    tail = 1
    nodes[0] = 0
    dists[0] = _sq_dist(q, vecs[0])
    bounds[0] = 0.0

    mip = np.inf
    best = -1
    visited = 0
    while head < tail:
        if use_stack:
            tail -= 1
            idx = tail
        else:
            idx = head
            head += 1
        node = nodes[idx]
        dn = dists[idx]
        bound = bounds[idx]
        if mode == _SAFE and bound >= mip:
            continue
        if dn != dn:
            dn = _sq_dist(q, vecs[node])
        visited += 1
        if dn < mip:
            mip = dn
            best = node
            if mip == 0.0:
                break

        lc = left[node]
        rc = right[node]
        if lc < 0 and rc < 0:
            continue

        # make room for two more entries
        if tail + 2 > cap:
            if head > 0:
                n_live = tail - head
                nodes[:n_live] = nodes[head:tail]
                dists[:n_live] = dists[head:tail]
                bounds[:n_live] = bounds[head:tail]
                head = 0
                tail = n_live
            if tail + 2 > cap:
                cap *= 2
                nn = np.empty(cap, np.int64)
                nd = np.empty(cap, np.float64)
                nb = np.empty(cap, np.float64)
                nn[:tail] = nodes[:tail]
                nd[:tail] = dists[:tail]
                nb[:tail] = bounds[:tail]
                nodes = nn
                dists = nd
                bounds = nb

        if lc >= 0 and rc >= 0:
            dl = _sq_dist(q, vecs[lc])
            dr = _sq_dist(q, vecs[rc])
            if dl <= dr:
                pref, other, dp, do = lc, rc, dl, dr
            else:
                pref, other, dp, do = rc, lc, dr, dl
            fire = False
            other_bound = bound
            if mode != _NEVER:
                delta = dr - dl
                d2 = delta * delta
                s = sep[node]
                if mode == _SAFE:
                    fire = d2 < 4.0 * s * mip
                else:
                    fire = d2 < 4.0 * s * eps2
                if fire:
                    b = d2 / (4.0 * s)
                    if b > other_bound:
                        other_bound = b
            if use_stack:
                if fire:
                    nodes[tail] = other
                    dists[tail] = do
                    bounds[tail] = other_bound
                    tail += 1
                nodes[tail] = pref
                dists[tail] = dp
                bounds[tail] = bound
                tail += 1
            else:
                nodes[tail] = pref
                dists[tail] = dp
                bounds[tail] = bound
                tail += 1
                if fire:
                    nodes[tail] = other
                    dists[tail] = do
                    bounds[tail] = other_bound
                    tail += 1
        else:
            # single child; a lone right child only exists in corrupted trees
            nodes[tail] = lc if lc >= 0 else rc
            dists[tail] = np.nan
            bounds[tail] = bound
            tail += 1
    return best, mip, visited


@numba.njit(nogil=True, cache=True)
def _search_batch(vecs, left, right, sep, queries, mode, eps2, use_stack, out_node, out_dist, out_visited):
    for i in range(queries.shape[0]):
        b, d, v = _search(vecs, left, right, sep, queries[i], mode, eps2, use_stack)
        out_node[i] = b
        out_dist[i] = d
        out_visited[i] = v


@numba.njit(nogil=True, cache=True)
def _depths(left, right, size):
    """Depth of every node reachable from the root; -1 elsewhere."""
    depth = np.full(size, -1, np.int64)
    if size == 0:
        return depth
    stack = np.empty(size, np.int64)
    stack[0] = 0
    top = 1
    depth[0] = 0
    while top > 0:
        top -= 1
        n = stack[top]
        for c in (left[n], right[n]):
            if 0 <= c < size and depth[c] < 0:
                depth[c] = depth[n] + 1
                stack[top] = c
                top += 1
    return depth


@numba.njit(nogil=True, cache=True)
def _preorder(left, right, size):
    order = np.empty(size, np.int64)
    seen = np.zeros(size, np.bool_)
    stack = np.empty(size, np.int64)
    stack[0] = 0
    seen[0] = True
    top = 1
    k = 0
    while top > 0:
        top -= 1
        n = stack[top]
        order[k] = n
        k += 1
        for c in (right[n], left[n]):
            if 0 <= c < size and not seen[c]:
                seen[c] = True
                stack[top] = c
                top += 1
    return order[:k]


@numba.njit(nogil=True, cache=True)
def _ancestor_scan(vecs, left, right, size, routing):
    """Walk every root-to-node path once.

    With ``routing`` true, returns (node, ancestor) pairs where the node sits
    on the wrong side of the ancestor's bisector.  Otherwise returns, per
    two-child node, [candidates, in_between] counts over strict descendants
    of its children, where in-between means closer to the bisector than the
    support vectors are.
    """
    counts = np.zeros((size, 2), np.int64)
    bad = np.empty((16, 2), np.int64)
    n_bad = 0
    if size == 0:
        return bad[:0], counts
    seen = np.zeros(size, np.bool_)
    stack_node = np.empty(size, np.int64)
    stack_depth = np.empty(size, np.int64)
    path = np.empty(size + 1, np.int64)
    stack_node[0] = 0
    stack_depth[0] = 0
    top = 1
    seen[0] = True
    while top > 0:
        top -= 1
        v = stack_node[top]
        k = stack_depth[top]
        path[k] = v
        for j in range(k - 1):
            a = path[j]
            la = left[a]
            ra = right[a]
            if la < 0 or ra < 0:
                continue
            dl = _sq_dist(vecs[v], vecs[la])
            dr = _sq_dist(vecs[v], vecs[ra])
            if routing:
                if (dl <= dr) != (path[j + 1] == la):
                    if n_bad == bad.shape[0]:
                        grown = np.empty((2 * n_bad, 2), np.int64)
                        grown[:n_bad] = bad
                        bad = grown
                    bad[n_bad, 0] = v
                    bad[n_bad, 1] = a
                    n_bad += 1
            else:
                counts[a, 0] += 1
                if abs(dr - dl) < _sq_dist(vecs[la], vecs[ra]):
                    counts[a, 1] += 1
        for c in (right[v], left[v]):
            if 0 <= c < size and not seen[c]:
                seen[c] = True
                stack_node[top] = c
                stack_depth[top] = k + 1
                top += 1
    return bad[:n_bad], counts


@numba.njit(nogil=True, cache=True)
def _links_from_preorder(flags, left, right, parent):
    """Rebuild child/parent links from preorder flags; False if inconsistent."""
    n = flags.shape[0]
    stack = np.empty(n, np.int64)
    top = 0
    for i in range(n):
        left[i] = -1
        right[i] = -1
        parent[i] = -1
        if i > 0:
            while top > 0:
                p = stack[top - 1]
                if (flags[p] & 1) and left[p] < 0:
                    left[p] = i
                    break
                if (flags[p] & 2) and right[p] < 0:
                    right[p] = i
                    break
                top -= 1
            if top == 0:
                return False
            parent[i] = stack[top - 1]
        stack[top] = i
        top += 1
    for i in range(n):
        if (flags[i] & 1) and left[i] < 0:
            return False
        if (flags[i] & 2) and right[i] < 0:
            return False
    return True


@numba.njit(nogil=True, cache=True)
def _fill_sep(vecs, left, right, sep, size):
    for i in range(size):
        if left[i] >= 0 and right[i] >= 0:
            sep[i] = _sq_dist(vecs[left[i]], vecs[right[i]])
        else:
            sep[i] = 0.0


# ---------------------------------------------------------------------------
# public types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryPredicate:
    """Decides when a search also explores the non-preferred child.

    ``never`` gives single-path lookup, ``safe`` prunes only subtrees that
    cannot hold anything closer than the current best, and ``epsilon`` fires
    inside a fixed-width band around each bisector.
    """

    mode: str = "safe"
    epsilon: float = 0.0

    def __post_init__(self):
        if self.mode not in ("never", "safe", "epsilon"):
            raise ArgumentError(f"unknown predicate mode {self.mode!r}")
        if not (self.epsilon >= 0.0 and math.isfinite(self.epsilon)):
            raise ArgumentError("epsilon must be a finite non-negative number")

    @classmethod
    def parse(cls, text: str) -> "BoundaryPredicate":
        """Parse ``never``, ``safe`` or ``eps:<float>``."""
        text = text.strip()
        if text in ("never", "safe"):
            return cls(text)
        if text.startswith("eps:"):
            try:
                eps = float(text[4:])
            except ValueError:
                raise ArgumentError(f"bad epsilon in {text!r}") from None
            return cls("epsilon", eps)
        raise ArgumentError(f"unknown predicate {text!r}; expected never, safe or eps:<float>")

    def fires(self, signed_margin: float, best_sq_dist: float) -> bool:
        if self.mode == "never":
            return False
        if self.mode == "safe":
            return abs(signed_margin) < math.sqrt(best_sq_dist)
        return abs(signed_margin) < self.epsilon

    @property
    def _code(self) -> int:
        return {"never": _NEVER, "safe": _SAFE, "epsilon": _EPSILON}[self.mode]


NEVER = BoundaryPredicate("never")
SAFE = BoundaryPredicate("safe")


@dataclass(eq=False)
class QueryResult:
    vector: np.ndarray
    sq_distance: float
    visited: int
    payload: bytes | None = None
    node: int = -1

    def same_as(self, other: "QueryResult") -> bool:
        """Equal vector bits, distance, visit count and payload (node ids may differ)."""
        return (
            self.vector.tobytes() == other.vector.tobytes()
            and self.sq_distance == other.sq_distance
            and self.visited == other.visited
            and self.payload == other.payload
        )


class Node:
    """Read-only view of one node of a :class:`FernIndex`."""

    __slots__ = ("_index", "id")

    def __init__(self, index: "FernIndex", node_id: int):
        self._index = index
        self.id = node_id

    def _link(self, arr) -> "Node | None":
        j = int(arr[self.id])
        return None if j < 0 else Node(self._index, j)

    @property
    def vector(self) -> np.ndarray:
        return self._index._vecs[self.id].copy()

    @property
    def left(self) -> "Node | None":
        return self._link(self._index._left)

    @property
    def right(self) -> "Node | None":
        return self._link(self._index._right)

    @property
    def parent(self) -> "Node | None":
        return self._link(self._index._parent)

    @property
    def payload(self) -> bytes | None:
        return self._index._payloads.get(self.id)

    def __eq__(self, other):
        return isinstance(other, Node) and other._index is self._index and other.id == self.id

    def __hash__(self):
        return hash((id(self._index), self.id))

    def __repr__(self):
        return f"Node(id={self.id}, vector={self._index._vecs[self.id][:4]}...)"


@dataclass(frozen=True)
class Violation:
    node: int

    @property
    def kind(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class LeftFillViolation(Violation):
    """Node has a right child but no left child."""


@dataclass(frozen=True)
class ParentLinkViolation(Violation):
    expected_parent: int = -1
    actual_parent: int = -1


@dataclass(frozen=True)
class SizeViolation(Violation):
    reachable: int = 0
    size: int = 0


@dataclass(frozen=True)
class RoutingViolation(Violation):
    ancestor: int = -1


@dataclass(frozen=True)
class LinkRangeViolation(Violation):
    child: int = -1


@dataclass(frozen=True)
class NormViolation(Violation):
    """Cosine-mode vector whose norm drifted away from 1."""

    norm: float = 0.0


# ---------------------------------------------------------------------------
# the index
# ---------------------------------------------------------------------------

class FernIndex:
    """Exact-lookup vector tree.

    Single writer, many readers: ``insert``/``insert_many`` mutate, every
    query method only reads the arrays and allocates its own scratch space.
    """

    def __init__(self, dim: int, metric: str = EUCLIDEAN, capacity: int = 16):
        if not isinstance(dim, (int, np.integer)) or dim < 1:
            raise DimensionError(f"dimension must be a positive integer, got {dim!r}")
        if metric not in _METRIC_CODES:
            raise ArgumentError(f"unknown metric {metric!r}")
        self.dim = int(dim)
        self.metric = metric
        self._size = 0
        self._payloads: dict[int, bytes] = {}
        self._alloc(max(int(capacity), 1))

    def _alloc(self, cap: int):
        self._vecs = np.empty((cap, self.dim), np.float32)
        self._left = np.full(cap, -1, np.int64)
        self._right = np.full(cap, -1, np.int64)
        self._parent = np.full(cap, -1, np.int64)
        self._sep = np.zeros(cap, np.float64)

    def reserve(self, cap: int):
        if cap <= self._vecs.shape[0]:
            return
        n = self._size
        old = (self._vecs, self._left, self._right, self._parent, self._sep)
        self._alloc(cap)
        for new, prev in zip((self._vecs, self._left, self._right, self._parent, self._sep), old):
            new[:n] = prev[:n]

    def _grow_for(self, extra: int):
        need = self._size + extra
        cap = self._vecs.shape[0]
        if need > cap:
            self.reserve(max(need, 2 * cap))

    # -- basic properties --------------------------------------------------

    @property
    def size(self) -> int:
        return self._size

    def __len__(self) -> int:
        return self._size

    @property
    def root(self) -> Node | None:
        return Node(self, 0) if self._size else None

    def node(self, node_id: int) -> Node:
        if not 0 <= node_id < self._size:
            raise IndexError(node_id)
        return Node(self, int(node_id))

    @property
    def vectors(self) -> np.ndarray:
        """Stored vectors in node-id order (a read-only view)."""
        v = self._vecs[: self._size]
        v = v.view()
        v.flags.writeable = False
        return v

    def __repr__(self):
        return f"FernIndex(dim={self.dim}, metric={self.metric!r}, size={self._size})"

    # -- insertion ---------------------------------------------------------

    def _prepare(self, v) -> np.ndarray:
        v = as_vector(v, self.dim)
        if self.metric == COSINE:
            out = np.empty_like(v)
            if not _normalize_into(v, out):
                raise ZeroVectorError("cannot insert the zero vector in cosine mode")
            v = out
        return v

    def insert(self, v, payload: bytes | None = None) -> int:
        """Store ``v`` at the first vacant slot on its routing path; returns its depth."""
        row = self._prepare(v)
        if payload is not None:
            payload = bytes(payload)
        self._grow_for(1)
        depths = np.empty(1, np.int64)
        node_id = self._size
        _insert_rows(self._vecs, self._left, self._right, self._parent, self._sep,
                     node_id, row[None, :], depths)
        self._size += 1
        if payload is not None:
            self._payloads[node_id] = payload
        return int(depths[0])

    def insert_many(self, rows, payloads: Iterable[bytes | None] | None = None) -> np.ndarray:
        """Insert the rows of a 2-D array in order; returns their depths."""
        rows = np.ascontiguousarray(rows, dtype=np.float32)
        if rows.ndim != 2 or rows.shape[1] != self.dim:
            raise DimensionError(f"expected shape (n, {self.dim}), got {rows.shape}")
        if not np.isfinite(rows).all():
            raise NonFiniteError("input contains NaN or infinite components")
        if self.metric == COSINE:
            out = np.empty_like(rows)
            bad = _normalize_rows(rows, out)
            if bad >= 0:
                raise ZeroVectorError(f"row {bad} is the zero vector; cannot insert in cosine mode")
            rows = out
        plist = None
        if payloads is not None:
            plist = [None if p is None else bytes(p) for p in payloads]
            if len(plist) != rows.shape[0]:
                raise ArgumentError("payloads must match the number of rows")
        self._grow_for(rows.shape[0])
        depths = np.empty(rows.shape[0], np.int64)
        start = self._size
        _insert_rows(self._vecs, self._left, self._right, self._parent, self._sep,
                     start, rows, depths)
        self._size += rows.shape[0]
        if plist is not None:
            for k, p in enumerate(plist):
                if p is not None:
                    self._payloads[start + k] = p
        return depths

    # -- queries -----------------------------------------------------------

    def _query_vector(self, q) -> np.ndarray:
        if self._size == 0:
            raise EmptyIndexError("index is empty")
        q = as_vector(q, self.dim)
        if self.metric == COSINE:
            out = np.empty_like(q)
            if not _normalize_into(q, out):
                raise ZeroVectorError("cannot query with the zero vector in cosine mode")
            q = out
        return q

    def _result(self, node: int, dist: float, visited: int) -> QueryResult:
        return QueryResult(
            vector=self._vecs[node].copy(),
            sq_distance=float(dist),
            visited=int(visited),
            payload=self._payloads.get(node),
            node=int(node),
        )

    def _run(self, q: np.ndarray, predicate: BoundaryPredicate, traversal: str):
        if traversal not in ("queue", "stack"):
            raise ArgumentError(f"traversal must be 'queue' or 'stack', got {traversal!r}")
        return _search(self._vecs, self._left, self._right, self._sep, q,
                       predicate._code, predicate.epsilon ** 2, traversal == "stack")

    def lookup(self, q) -> QueryResult:
        """Single-path retrieval of a stored vector.

        For a stored ``q`` the result has ``sq_distance == 0`` and
        ``visited == depth + 1``.  For anything else it is the best vector on
        the routing path, with no nearest-neighbor guarantee.
        """
        q = self._query_vector(q)
        return self._result(*self._run(q, NEVER, "queue"))

    def search(self, q, predicate: BoundaryPredicate = SAFE, traversal: str = "queue") -> QueryResult:
        """Nearest-neighbor search; exact when ``predicate`` is safe."""
        q = self._query_vector(q)
        return self._result(*self._run(q, predicate, traversal))

    def search_many(self, queries, predicate: BoundaryPredicate = SAFE, traversal: str = "queue"):
        """Batch form of :meth:`search`; returns (node ids, sq distances, visited)."""
        if self._size == 0:
            raise EmptyIndexError("index is empty")
        if traversal not in ("queue", "stack"):
            raise ArgumentError(f"traversal must be 'queue' or 'stack', got {traversal!r}")
        Q = np.ascontiguousarray(queries, dtype=np.float32)
        if Q.ndim != 2 or Q.shape[1] != self.dim:
            raise DimensionError(f"expected shape (m, {self.dim}), got {Q.shape}")
        if not np.isfinite(Q).all():
            raise NonFiniteError("queries contain NaN or infinite components")
        if self.metric == COSINE:
            out = np.empty_like(Q)
            bad = _normalize_rows(Q, out)
            if bad >= 0:
                raise ZeroVectorError(f"query {bad} is the zero vector")
            Q = out
        m = Q.shape[0]
        nodes = np.empty(m, np.int64)
        dists = np.empty(m, np.float64)
        visited = np.empty(m, np.int64)
        _search_batch(self._vecs, self._left, self._right, self._sep, Q,
                      predicate._code, predicate.epsilon ** 2, traversal == "stack",
                      nodes, dists, visited)
        return nodes, dists, visited

    # -- diagnostics -------------------------------------------------------

    def depths(self) -> np.ndarray:
        """Depth of every node by id (root = 0)."""
        return _depths(self._left, self._right, self._size)

    def depth_stats(self) -> dict:
        if self._size == 0:
            raise EmptyIndexError("index is empty")
        d = self.depths()
        d = d[d >= 0]
        hist = np.bincount(d)
        return {
            "mean_depth": float(d.mean()),
            "max_depth": int(d.max()),
            "histogram": {k: int(c) for k, c in enumerate(hist) if c},
        }

    def in_between_fraction(self) -> dict:
        """Share of each subtree lying closer to its bisector than the support vectors.

        ``per_node`` maps every two-child node id to its fraction (0.0 when
        its children have no descendants).  ``aggregate`` averages over the
        nodes that have at least one descendant below their children; it is
        0.0 when there are none.
        """
        if self._size == 0:
            raise EmptyIndexError("index is empty")
        _, counts = _ancestor_scan(self._vecs, self._left, self._right, self._size, False)
        n = self._size
        two = np.flatnonzero((self._left[:n] >= 0) & (self._right[:n] >= 0))
        per_node = {}
        fracs = []
        for a in two:
            total, inb = counts[a]
            f = inb / total if total else 0.0
            per_node[int(a)] = float(f)
            if total:
                fracs.append(f)
        return {"per_node": per_node, "aggregate": float(np.mean(fracs)) if fracs else 0.0}

    def validate(self) -> list[Violation]:
        """Full structural check; returns an empty list for a well-formed tree."""
        n = self._size
        out: list[Violation] = []
        if n == 0:
            return out
        left, right, parent = self._left[:n], self._right[:n], self._parent[:n]

        for arr in (left, right):
            for i in np.flatnonzero((arr < -1) | (arr >= n)):
                out.append(LinkRangeViolation(int(i), int(arr[i])))
        if out:
            return out

        for i in np.flatnonzero((right >= 0) & (left < 0)):
            out.append(LeftFillViolation(int(i)))
        if parent[0] != -1:
            out.append(ParentLinkViolation(0, -1, int(parent[0])))
        for arr in (left, right):
            has = np.flatnonzero(arr >= 0)
            wrong = has[parent[arr[has]] != has]
            for i in wrong:
                c = int(arr[i])
                out.append(ParentLinkViolation(c, int(i), int(parent[c])))

        reachable = int((self.depths() >= 0).sum())
        child_refs = int((left >= 0).sum() + (right >= 0).sum())
        if reachable != n or child_refs != n - 1:
            out.append(SizeViolation(0, reachable, n))

        if self.metric == COSINE:
            norms = np.sqrt(np.einsum("ij,ij->i", self._vecs[:n].astype(np.float64),
                                      self._vecs[:n].astype(np.float64)))
            for i in np.flatnonzero(np.abs(norms - 1.0) > 1e-6):
                out.append(NormViolation(int(i), float(norms[i])))

        bad, _ = _ancestor_scan(self._vecs, left, right, n, True)
        for v, a in bad:
            out.append(RoutingViolation(int(v), int(a)))
        return out

    # -- serialization -----------------------------------------------------

    def serialize(self, sink: BinaryIO) -> None:
        """Write the little-endian index format to a binary stream."""
        if self._size == 0:
            raise EmptyIndexError("refusing to serialize an empty index")
        n = self._size
        order = _preorder(self._left, self._right, n)
        if order.shape[0] != n:
            raise FormatError("index is not a single tree; run validate()")
        flags = (
            (self._left[order] >= 0).astype(np.uint8) * _HAS_LEFT
            | (self._right[order] >= 0).astype(np.uint8) * _HAS_RIGHT
        )
        sink.write(_HEADER.pack(MAGIC, FORMAT_VERSION, _METRIC_CODES[self.metric], self.dim, n))
        rec = np.dtype([("flags", "u1"), ("vec", "<f4", (self.dim,))])
        if not self._payloads:
            buf = np.empty(n, rec)
            buf["flags"] = flags
            buf["vec"] = self._vecs[order]
            sink.write(buf.tobytes())
            return
        for k, node in enumerate(order):
            payload = self._payloads.get(int(node))
            f = int(flags[k]) | (_HAS_PAYLOAD if payload is not None else 0)
            sink.write(bytes((f,)))
            sink.write(self._vecs[node].astype("<f4").tobytes())
            if payload is not None:
                sink.write(struct.pack("<I", len(payload)))
                sink.write(payload)

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        self.serialize(buf)
        return buf.getvalue()

    def save(self, path) -> None:
        with open(path, "wb") as f:
            self.serialize(f)

    @classmethod
    def deserialize(cls, source: BinaryIO) -> "FernIndex":
        data = source.read()
        return cls.from_bytes(data)

    @classmethod
    def load(cls, path) -> "FernIndex":
        with open(path, "rb") as f:
            return cls.deserialize(f)

    @classmethod
    def from_bytes(cls, data: bytes) -> "FernIndex":
        if len(data) < _HEADER.size:
            raise FormatError("truncated header")
        magic, version, metric_code, dim, n = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported format version {version}")
        metrics = {v: k for k, v in _METRIC_CODES.items()}
        if metric_code not in metrics:
            raise FormatError(f"unknown metric code {metric_code}")
        if not 1 <= dim <= MAX_DIM:
            raise FormatError(f"dimension {dim} out of range")
        if n == 0:
            raise FormatError("index file holds no nodes")
        rec_size = 1 + 4 * dim
        body = memoryview(data)[_HEADER.size:]
        if len(body) < n * rec_size:
            raise FormatError("truncated node records")

        index = cls(dim, metrics[metric_code], capacity=n)
        rec = np.dtype([("flags", "u1"), ("vec", "<f4", (dim,))])
        payloads: dict[int, bytes] = {}
        fast = np.frombuffer(body, rec, count=n)
        if len(body) == n * rec_size and not (fast["flags"] & _HAS_PAYLOAD).any():
            flags = fast["flags"].copy()
            index._vecs[:n] = fast["vec"]
        else:
            flags = np.empty(n, np.uint8)
            pos = 0
            for i in range(n):
                if pos + rec_size > len(body):
                    raise FormatError(f"truncated at node {i}")
                f = body[pos]
                flags[i] = f
                index._vecs[i] = np.frombuffer(body, "<f4", count=dim, offset=pos + 1)
                pos += rec_size
                if f & _HAS_PAYLOAD:
                    if pos + 4 > len(body):
                        raise FormatError(f"truncated payload length at node {i}")
                    (length,) = struct.unpack_from("<I", body, pos)
                    pos += 4
                    if pos + length > len(body):
                        raise FormatError(f"truncated payload at node {i}")
                    payloads[i] = bytes(body[pos:pos + length])
                    pos += length
            if pos != len(body):
                raise FormatError(f"{len(body) - pos} trailing bytes after the last node")
        if flags.max(initial=0) > 7:
            raise FormatError("unknown node flag bits")
        if not np.isfinite(index._vecs[:n]).all():
            raise FormatError("non-finite vector component")
        if not _links_from_preorder(flags, index._left, index._right, index._parent):
            raise FormatError("node flags do not describe a single preorder tree")
        _fill_sep(index._vecs, index._left, index._right, index._sep, n)
        index._size = n
        index._payloads = payloads
        return index


def new_index(dim: int, metric: str = EUCLIDEAN) -> FernIndex:
    return FernIndex(dim, metric)
