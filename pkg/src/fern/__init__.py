"""Exact vector lookup and nearest-neighbor search with a bisector-routed binary tree."""
from .errors import (
    ArgumentError,
    DegenerateHyperplane,
    DimensionError,
    EmptyIndexError,
    EmptyStoreError,
    FernError,
    FormatError,
    IoError,
    NonFiniteError,
    ZeroVectorError,
)
from .geometry import margin, normalize, prefers_left, sq_dist
from .index import (
    COSINE,
    EUCLIDEAN,
    BoundaryPredicate,
    FernIndex,
    Node,
    QueryResult,
    new_index,
)
from .oracle import FlatStore, scan_knn, scan_nn
from .datasets import DatasetSpec, gen_uniform, load_fvecs, load_hdf5_annbench, load_raw, write_fvecs, write_raw
from .bench import BenchRecord, SweepConfig, emit_csv, emit_json, run_sweep
from .report import emit_svg_plot, render_figure

__version__ = "0.1.0"
