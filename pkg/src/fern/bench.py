"""Scaling sweeps: build over growing prefixes of a dataset and time queries.

One :class:`BenchRecord` per index size.  Visited-node counts and recall
are hardware independent and deterministic for a fixed seed; the latency
fields are wall-clock and are not.
"""
from __future__ import annotations

import configparser
import csv
import json
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from .datasets import DatasetSpec, load_any
from .errors import ArgumentError, IoError
from .geometry import normalize_rows
from .index import COSINE, EUCLIDEAN, BoundaryPredicate, FernIndex, _search
from .oracle import FlatStore, scan_nn_many

__all__ = [
    "SweepConfig",
    "BenchRecord",
    "CSV_FIELDS",
    "run_sweep",
    "emit_csv",
    "emit_json",
    "read_csv",
    "load_config",
    "parse_count",
]

MODES = ("lookup", "search_safe", "search_epsilon")
QUERY_SOURCES = ("sampled_from_db", "external_file")


@dataclass
class SweepConfig:
    dataset: DatasetSpec
    sizes: list[int]
    queries_per_size: int = 1000
    query_source: str = "sampled_from_db"
    query_path: str | None = None
    mode: str = "lookup"
    epsilon: float = 0.0
    seed: int = 0
    threads: int = 1
    traversal: str = "queue"
    metric: str = EUCLIDEAN
    # oracle recall is computed on a seeded subsample above this size
    oracle_threshold: int = 100_000
    oracle_cap: int = 200

    def __post_init__(self):
        if not self.sizes:
            raise ArgumentError("sizes must not be empty")
        if any(s < 1 for s in self.sizes) or any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ArgumentError(f"sizes must be positive and strictly ascending, got {self.sizes}")
        if self.queries_per_size < 1:
            raise ArgumentError("queries_per_size must be at least 1")
        if self.mode not in MODES:
            raise ArgumentError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.query_source not in QUERY_SOURCES:
            raise ArgumentError(f"query_source must be one of {QUERY_SOURCES}")
        if self.query_source == "external_file" and not self.query_path:
            raise ArgumentError("external_file queries need query_path")
        if self.threads < 1:
            raise ArgumentError("threads must be at least 1")
        if self.traversal not in ("queue", "stack"):
            raise ArgumentError(f"traversal must be queue or stack, got {self.traversal!r}")
        if self.metric not in (EUCLIDEAN, COSINE):
            raise ArgumentError(f"unknown metric {self.metric!r}")

    @property
    def predicate(self) -> BoundaryPredicate:
        if self.mode == "lookup":
            return BoundaryPredicate("never")
        if self.mode == "search_safe":
            return BoundaryPredicate("safe")
        return BoundaryPredicate("epsilon", self.epsilon)


@dataclass
class BenchRecord:
    n: int
    d: int
    mode: str
    mean_ns: float
    p50_ns: float
    p99_ns: float
    mean_visited: float
    max_visited: int
    recall: float
    build_ms: float
    throughput_qps: float


CSV_FIELDS = [f.name for f in fields(BenchRecord)]


def _run_queries(index: FernIndex, Q: np.ndarray, predicate: BoundaryPredicate, traversal: str, threads: int):
    """Execute every query; returns latencies (ns), distances, visited, wall seconds."""
    code = predicate._code
    eps2 = predicate.epsilon ** 2
    use_stack = traversal == "stack"
    vecs, left, right, sep = index._vecs, index._left, index._right, index._sep

    def work(rows: np.ndarray):
        m = rows.shape[0]
        lat = np.empty(m, np.int64)
        dist = np.empty(m, np.float64)
        vis = np.empty(m, np.int64)
        clock = time.perf_counter_ns
        t0 = clock()
        for i in range(m):
            _, d, v = _search(vecs, left, right, sep, rows[i], code, eps2, use_stack)
            t1 = clock()
            lat[i] = t1 - t0
            t0 = t1
            dist[i] = d
            vis[i] = v
        return lat, dist, vis

    # warm the dispatcher so the first timed query is not a compile
    _search(vecs, left, right, sep, Q[0], code, eps2, use_stack)
    chunks = np.array_split(Q, min(threads, Q.shape[0]))
    start = time.perf_counter()
    if len(chunks) == 1:
        parts = [work(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(work, chunks))
    wall = time.perf_counter() - start
    lat, dist, vis = (np.concatenate(p) for p in zip(*parts))
    return lat, dist, vis, wall


def _query_rng(seed: int, n: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, n])))


def run_sweep(config: SweepConfig, store: FlatStore | None = None) -> list[BenchRecord]:
    """Build over each prefix size in turn and measure ``queries_per_size`` queries.

    Sizes are reached incrementally; since insertion is sequential, the tree
    after inserting the first ``n`` rows is the tree built from them alone,
    and ``build_ms`` is the cumulative insertion time.
    """
    if store is None:
        store = config.dataset.load()
    X = store.vectors
    if config.sizes[-1] > X.shape[0]:
        raise ArgumentError(f"size {config.sizes[-1]} exceeds the dataset's {X.shape[0]} vectors")
    d = X.shape[1]

    external = None
    if config.query_source == "external_file":
        external = load_any(config.query_path).vectors[: config.queries_per_size]
        if external.shape[0] == 0 or external.shape[1] != d:
            raise ArgumentError(f"query file must hold vectors of dimension {d}")
        if config.metric == COSINE:
            external = normalize_rows(external)

    index = FernIndex(d, config.metric)
    index.reserve(config.sizes[-1])
    predicate = config.predicate
    records = []
    built = 0
    build_s = 0.0
    for n in config.sizes:
        t = time.perf_counter()
        index.insert_many(X[built:n])
        build_s += time.perf_counter() - t
        built = n

        rng = _query_rng(config.seed, n)
        if external is None:
            # stored vectors, sampled with replacement
            picks = rng.integers(0, n, size=config.queries_per_size)
            Q = np.ascontiguousarray(index._vecs[picks])
        else:
            Q = external

        lat, dist, vis, wall = _run_queries(index, Q, predicate, config.traversal, config.threads)

        if n > config.oracle_threshold and Q.shape[0] > config.oracle_cap:
            check = np.sort(rng.choice(Q.shape[0], size=config.oracle_cap, replace=False))
        else:
            check = np.arange(Q.shape[0])
        _, truth = scan_nn_many(FlatStore(index.vectors), Q[check])
        recall = float(np.mean(dist[check] == truth))

        records.append(BenchRecord(
            n=n,
            d=d,
            mode=config.mode,
            mean_ns=float(lat.mean()),
            p50_ns=float(np.percentile(lat, 50)),
            p99_ns=float(np.percentile(lat, 99)),
            mean_visited=float(vis.mean()),
            max_visited=int(vis.max()),
            recall=recall,
            build_ms=build_s * 1e3,
            throughput_qps=Q.shape[0] / wall if wall > 0 else math.inf,
        ))
    return records


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _open_text(sink, mode="w"):
    if hasattr(sink, "write"):
        return sink, False
    try:
        return open(sink, mode, newline=""), True
    except OSError as e:
        raise IoError(str(e)) from e


def emit_csv(records: Sequence[BenchRecord], sink: TextIO | str | Path) -> None:
    if not records:
        raise ArgumentError("no records to write")
    f, owned = _open_text(sink)
    try:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in records:
            w.writerow([repr(v) if isinstance(v, float) else v for v in asdict(r).values()])
    except OSError as e:
        raise IoError(str(e)) from e
    finally:
        if owned:
            f.close()


def emit_json(records: Sequence[BenchRecord], sink: TextIO | str | Path) -> None:
    if not records:
        raise ArgumentError("no records to write")
    f, owned = _open_text(sink)
    try:
        json.dump([asdict(r) for r in records], f, indent=2)
        f.write("\n")
    except OSError as e:
        raise IoError(str(e)) from e
    finally:
        if owned:
            f.close()


def read_csv(source: TextIO | str | Path) -> list[BenchRecord]:
    f, owned = _open_text(source, "r")
    try:
        rows = list(csv.DictReader(f))
    finally:
        if owned:
            f.close()
    types = {f.name: f.type for f in fields(BenchRecord)}
    conv = {"int": int, "float": float, "str": str}
    return [BenchRecord(**{k: conv[types[k]](v) for k, v in row.items()}) for row in rows]


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

_POW = re.compile(r"^(?:(\d+(?:\.\d+)?)\s*\*\s*)?(\d+)\s*\^\s*(\d+)$")


def parse_count(text: str) -> int:
    """Parse ``10000``, ``1e4``, ``10^4``, ``5*10^4`` or ``1_000`` into an int."""
    t = text.strip().replace("_", "")
    m = _POW.match(t)
    if m:
        mult = float(m.group(1)) if m.group(1) else 1.0
        value = mult * int(m.group(2)) ** int(m.group(3))
    else:
        try:
            value = float(t)
        except ValueError:
            raise ArgumentError(f"not a count: {text!r}") from None
    if value != int(value):
        raise ArgumentError(f"not a whole number: {text!r}")
    return int(value)


_KEYS = {
    "source", "n", "dim", "seed", "path", "split", "sizes", "queries", "query_source",
    "query_path", "mode", "epsilon", "threads", "traversal", "metric", "out",
}


def load_config(path) -> tuple[SweepConfig, str | None]:
    """Read a ``key = value`` sweep file; returns the config and its ``out`` prefix.

    Relative paths inside the file resolve against the file's directory.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise IoError(str(e)) from e
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string("[sweep]\n" + text, source=str(path))
    except configparser.Error as e:
        raise ArgumentError(f"{path}: {e}") from None
    kv = dict(parser["sweep"])
    unknown = set(kv) - _KEYS
    if unknown:
        raise ArgumentError(f"{path}: unknown keys {sorted(unknown)}")

    def rel(p):
        if p is None:
            return None
        p = Path(p)
        return str(p if p.is_absolute() else path.parent / p)

    try:
        sizes = [parse_count(s) for s in kv["sizes"].split(",") if s.strip()]
    except KeyError:
        raise ArgumentError(f"{path}: 'sizes' is required") from None
    source = kv.get("source", "uniform_synthetic")
    try:
        dataset = DatasetSpec(
            source=source,
            n=parse_count(kv.get("n", str(max(sizes) if sizes else 0))),
            dim=parse_count(kv.get("dim", "128")),
            seed=parse_count(kv.get("seed", "0")),
            path=rel(kv.get("path")),
            split=kv.get("split", "train"),
        )
        config = SweepConfig(
            dataset=dataset,
            sizes=sizes,
            queries_per_size=parse_count(kv.get("queries", "1000")),
            query_source=kv.get("query_source", "sampled_from_db"),
            query_path=rel(kv.get("query_path")),
            mode=kv.get("mode", "lookup"),
            epsilon=float(kv.get("epsilon", "0")),
            seed=parse_count(kv.get("seed", "0")),
            threads=parse_count(kv.get("threads", "1")),
            traversal=kv.get("traversal", "queue"),
            metric=kv.get("metric", EUCLIDEAN),
        )
    except ValueError as e:
        raise ArgumentError(f"{path}: {e}") from None
    return config, rel(kv.get("out"))
