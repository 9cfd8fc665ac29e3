"""Command-line entry point: ``fern <command> [flags]``.

Exit status is 0 on success, 1 for runtime and data errors, 2 for usage
errors.  Results go to stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import bench, datasets
from .errors import ArgumentError, FernError
from .geometry import normalize_rows
from .index import COSINE, EUCLIDEAN, BoundaryPredicate, FernIndex
from .oracle import FlatStore, scan_nn_many


def _positive_int(text: str) -> int:
    try:
        value = bench.parse_count(text)
    except ArgumentError as e:
        raise argparse.ArgumentTypeError(str(e)) from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _predicate(text: str) -> BoundaryPredicate:
    try:
        return BoundaryPredicate.parse(text)
    except ArgumentError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    store = datasets.gen_uniform(args.n, args.d, args.seed)
    data_path, meta_path = datasets.write_raw(args.out, store)
    print(f"wrote {data_path} ({data_path.stat().st_size} bytes) and {meta_path}")
    return 0


def cmd_build(args) -> int:
    store = datasets.load_any(args.input, args.split)
    if len(store) == 0:
        raise ArgumentError(f"{args.input} holds no vectors")
    index = FernIndex(store.dim, args.metric)
    index.reserve(len(store))
    t = time.perf_counter()
    depths = index.insert_many(store.vectors)
    build_ms = (time.perf_counter() - t) * 1e3
    index.save(args.out)
    print(f"n={len(index)} d={index.dim} metric={index.metric} build_ms={build_ms:.1f} max_depth={int(depths.max())}")
    return 0


def _queries(args, index: FernIndex) -> np.ndarray:
    if args.query_file:
        Q = datasets.load_any(args.query_file).vectors
        if Q.shape[0] == 0:
            raise ArgumentError(f"{args.query_file} holds no vectors")
        if Q.shape[1] != index.dim:
            raise ArgumentError(f"queries have dimension {Q.shape[1]}, index has {index.dim}")
        return normalize_rows(Q) if index.metric == COSINE else Q
    rng = np.random.Generator(np.random.Philox(args.seed))
    picks = rng.integers(0, len(index), size=args.sample)
    return np.ascontiguousarray(index.vectors[picks])


def _run(args, predicate: BoundaryPredicate, traversal: str) -> int:
    index = FernIndex.load(args.index)
    Q = _queries(args, index)
    lat, dist, vis, wall = bench._run_queries(index, Q, predicate, traversal, 1)
    _, truth = scan_nn_many(FlatStore(index.vectors), Q)
    out = sys.stdout
    out.write("qid,sq_distance,visited\n")
    for i in range(Q.shape[0]):
        out.write(f"{i},{float(dist[i])!r},{int(vis[i])}\n")
    recall = float(np.mean(dist == truth))
    out.write(
        f"# summary queries={Q.shape[0]} recall={recall} mean_ns={lat.mean():.0f} "
        f"p50_ns={np.percentile(lat, 50):.0f} p99_ns={np.percentile(lat, 99):.0f} "
        f"mean_visited={vis.mean():.3f} max_visited={vis.max()} throughput_qps={Q.shape[0] / wall:.0f}\n"
    )
    return 0


def cmd_lookup(args) -> int:
    return _run(args, BoundaryPredicate("never"), "queue")


def cmd_search(args) -> int:
    return _run(args, args.mode, args.traversal)


def cmd_stats(args) -> int:
    index = FernIndex.load(args.index)
    ds = index.depth_stats()
    ib = index.in_between_fraction()
    print(f"n={len(index)} d={index.dim} metric={index.metric}")
    print(f"mean_depth={ds['mean_depth']:.4f} max_depth={ds['max_depth']}")
    print("depth_histogram=" + ",".join(f"{k}:{v}" for k, v in ds["histogram"].items()))
    print(f"in_between_aggregate={ib['aggregate']:.6f}")
    return 0


def cmd_sweep(args) -> int:
    config, out = bench.load_config(args.config)
    out = args.out or out
    if args.threads:
        config.threads = args.threads
    records = bench.run_sweep(config)
    bench.emit_csv(records, sys.stdout)
    if out:
        from .report import emit_svg_plot, render_figure

        prefix = Path(out)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        written = [prefix.with_name(prefix.name + ext) for ext in (".csv", ".json")]
        bench.emit_csv(records, written[0])
        bench.emit_json(records, written[1])
        if len(records) >= 2:
            svg = prefix.with_name(prefix.name + ".svg")
            emit_svg_plot(records, svg)
            written.append(svg)
        if not args.no_figure:
            written.append(render_figure(records, prefix.with_name(prefix.name + ".png")))
        print("wrote " + " ".join(str(p) for p in written), file=sys.stderr)
    return 0


def cmd_convert(args) -> int:
    if args.from_ == "hdf5":
        store = datasets.load_hdf5_annbench(args.input, args.split)
    elif args.from_ == "fvecs":
        store = datasets.load_fvecs(args.input)
    else:
        store = datasets.load_raw(args.input)
    if args.to == "raw":
        datasets.write_raw(args.output, store)
    else:
        datasets.write_fvecs(args.output, store)
    print(f"converted {len(store)} vectors of dimension {store.dim} to {args.to}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fern", description="Bisector-routed binary tree vector index.")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    g = sub.add_parser("gen", help="generate a uniform [-1, 1) dataset in raw format")
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--d", type=_positive_int, required=True)
    g.add_argument("--seed", type=_seed, default=0)
    g.add_argument("--out", required=True, help="output stem; writes <out>.f32 and <out>.json")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("build", help="insert a dataset in file order and save the index")
    b.add_argument("--input", required=True, help=".fvecs, .hdf5/.h5, or raw stem/.f32/.json")
    b.add_argument("--metric", choices=(EUCLIDEAN, COSINE), default=EUCLIDEAN)
    b.add_argument("--split", choices=("train", "test"), default="train", help="HDF5 split")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build)

    for name, func, helptext in (
        ("lookup", cmd_lookup, "single-path lookup of queries"),
        ("search", cmd_search, "nearest-neighbor search with a boundary predicate"),
    ):
        q = sub.add_parser(name, help=helptext)
        q.add_argument("--index", required=True)
        src = q.add_mutually_exclusive_group(required=True)
        src.add_argument("--query-file")
        src.add_argument("--sample", type=_positive_int, help="sample k stored vectors with replacement")
        q.add_argument("--seed", type=_seed, default=0)
        if name == "search":
            q.add_argument("--mode", type=_predicate, default=BoundaryPredicate("safe"),
                           help="safe | never | eps:<float>")
            q.add_argument("--traversal", choices=("queue", "stack"), default="queue")
        q.set_defaults(func=func)

    s = sub.add_parser("stats", help="depth statistics and in-between fraction")
    s.add_argument("--index", required=True)
    s.set_defaults(func=cmd_stats)

    w = sub.add_parser("sweep", help="run a scaling sweep described by a config file")
    w.add_argument("--config", required=True)
    w.add_argument("--out", help="output prefix (overrides the config's out key)")
    w.add_argument("--threads", type=_positive_int)
    w.add_argument("--no-figure", action="store_true", help="skip the matplotlib PNG")
    w.set_defaults(func=cmd_sweep)

    c = sub.add_parser("convert", help="rewrite a dataset in another format")
    c.add_argument("--from", dest="from_", choices=("hdf5", "fvecs", "raw"), required=True)
    c.add_argument("--to", choices=("raw", "fvecs"), required=True)
    c.add_argument("--input", required=True)
    c.add_argument("--output", required=True)
    c.add_argument("--split", choices=("train", "test"), default="train")
    c.set_defaults(func=cmd_convert)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FernError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
