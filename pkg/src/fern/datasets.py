"""Synthetic workloads and benchmark vector files.

Formats
-------
fvecs
    Repeated records of ``[int32 dim][dim x float32]``, little-endian.
raw
    ``<name>.f32`` holds a row-major little-endian float32 matrix; the
    sidecar ``<name>.json`` holds ``{"n": ..., "d": ..., "dtype": "f32le"}``.
hdf5
    ann-benchmarks layout: float datasets ``train`` and ``test`` of shape
    (n, d).  Needs the optional ``h5py`` dependency.

The synthetic generator is numpy's Philox4x64 counter-based bit generator,
seeded directly with the 64-bit seed; components are uniform on [-1, 1).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArgumentError, FormatError, IoError
from .oracle import FlatStore

__all__ = [
    "DatasetSpec",
    "gen_uniform",
    "load_fvecs",
    "write_fvecs",
    "load_raw",
    "write_raw",
    "load_hdf5_annbench",
    "load_any",
]

MAX_FVECS_DIM = 100_000
SOURCES = ("uniform_synthetic", "fvecs_file", "raw_file", "hdf5_file")


def _check_finite(x: np.ndarray, path) -> None:
    if not np.isfinite(x).all():
        raise FormatError(f"{path}: NaN or infinite component")


def gen_uniform(n: int, dim: int, seed: int) -> FlatStore:
    """``n`` vectors with i.i.d. components uniform on [-1, 1).

    Rows are drawn in order from one stream, so a smaller ``n`` with the same
    seed and ``dim`` yields a prefix of a larger draw.
    """
    if n < 1 or dim < 1:
        raise ArgumentError(f"n and dim must be positive, got n={n}, dim={dim}")
    if not 0 <= seed < 2**64:
        raise ArgumentError("seed must be an unsigned 64-bit integer")
    rng = np.random.Generator(np.random.Philox(seed))
    x = rng.random((n, dim), dtype=np.float32)
    # exact in float32: u is a multiple of 2**-24 in [0, 1)
    x *= 2.0
    x -= 1.0
    return FlatStore(x)


def load_fvecs(path) -> FlatStore:
    try:
        raw = np.fromfile(path, dtype="<i4")
    except OSError as e:
        raise IoError(str(e)) from e
    if raw.size == 0:
        if os.path.getsize(path) != 0:
            raise FormatError(f"{path}: truncated record")
        return FlatStore(np.empty((0, 0), np.float32))
    if os.path.getsize(path) % 4:
        raise FormatError(f"{path}: size is not a multiple of 4 bytes")
    dim = int(raw[0])
    if not 0 < dim <= MAX_FVECS_DIM:
        raise FormatError(f"{path}: invalid dimension {dim}")
    if raw.size % (dim + 1):
        raise FormatError(f"{path}: truncated record")
    rows = raw.reshape(-1, dim + 1)
    if (rows[:, 0] != dim).any():
        bad = int(np.flatnonzero(rows[:, 0] != dim)[0])
        raise FormatError(f"{path}: record {bad} has dimension {int(rows[bad, 0])}, expected {dim}")
    x = rows[:, 1:].copy().view("<f4").astype(np.float32, copy=False)
    _check_finite(x, path)
    return FlatStore(x)


def write_fvecs(path, store: FlatStore | np.ndarray) -> None:
    x = np.ascontiguousarray(getattr(store, "vectors", store), dtype="<f4")
    n, d = x.shape
    out = np.empty((n, d + 1), "<i4")
    out[:, 0] = d
    out[:, 1:] = x.view("<i4")
    try:
        out.tofile(path)
    except OSError as e:
        raise IoError(str(e)) from e


def _raw_paths(path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix in (".f32", ".json"):
        p = p.with_suffix("")
    return p.with_name(p.name + ".f32"), p.with_name(p.name + ".json")


def load_raw(path) -> FlatStore:
    """Load ``<name>.f32`` + ``<name>.json``; ``path`` may name either file or the stem."""
    data_path, meta_path = _raw_paths(path)
    try:
        meta = json.loads(meta_path.read_text())
        size = data_path.stat().st_size
    except OSError as e:
        raise IoError(str(e)) from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{meta_path}: {e}") from e
    try:
        n, d = int(meta["n"]), int(meta["d"])
    except (KeyError, TypeError, ValueError):
        raise FormatError(f"{meta_path}: sidecar needs integer 'n' and 'd'") from None
    if meta.get("dtype", "f32le") != "f32le":
        raise FormatError(f"{meta_path}: unsupported dtype {meta['dtype']!r}")
    if n < 0 or d < 1:
        raise FormatError(f"{meta_path}: invalid shape n={n}, d={d}")
    if size != n * d * 4:
        raise FormatError(f"{data_path}: expected {n * d * 4} bytes for n={n}, d={d}, found {size}")
    x = np.fromfile(data_path, dtype="<f4").reshape(n, d).astype(np.float32, copy=False)
    _check_finite(x, data_path)
    return FlatStore(x)


def write_raw(path, store: FlatStore | np.ndarray) -> tuple[Path, Path]:
    x = np.ascontiguousarray(getattr(store, "vectors", store), dtype="<f4")
    data_path, meta_path = _raw_paths(path)
    try:
        x.tofile(data_path)
        meta_path.write_text(json.dumps({"n": int(x.shape[0]), "d": int(x.shape[1]), "dtype": "f32le"}))
    except OSError as e:
        raise IoError(str(e)) from e
    return data_path, meta_path


def load_hdf5_annbench(path, split: str = "train") -> FlatStore:
    if split not in ("train", "test"):
        raise ArgumentError(f"split must be 'train' or 'test', got {split!r}")
    try:
        import h5py
    except ImportError:  # pragma: no cover - depends on the environment
        raise FormatError("reading HDF5 needs the optional h5py dependency (pip install artifact[hdf5])") from None
    try:
        f = h5py.File(path, "r")
    except OSError as e:
        raise IoError(str(e)) from e
    with f:
        if split not in f or not isinstance(f[split], h5py.Dataset):
            raise FormatError(f"{path}: no dataset named {split!r}")
        ds = f[split]
        if ds.dtype.kind != "f":
            raise FormatError(f"{path}: dataset {split!r} has non-float dtype {ds.dtype}")
        if ds.ndim != 2:
            raise FormatError(f"{path}: dataset {split!r} has shape {ds.shape}, expected (n, d)")
        x = np.ascontiguousarray(ds[()], dtype=np.float32)
    _check_finite(x, path)
    return FlatStore(x)


def load_any(path, split: str = "train") -> FlatStore:
    """Pick a loader from the file extension (raw is the fallback)."""
    suffix = Path(path).suffix.lower()
    if suffix in (".fvecs", ".fvec"):
        return load_fvecs(path)
    if suffix in (".hdf5", ".h5"):
        return load_hdf5_annbench(path, split)
    return load_raw(path)


@dataclass
class DatasetSpec:
    source: str = "uniform_synthetic"
    n: int = 0
    dim: int = 0
    seed: int = 0
    path: str | None = None
    split: str = "train"

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ArgumentError(f"unknown dataset source {self.source!r}")
        if self.source == "uniform_synthetic":
            if self.n < 1 or self.dim < 1:
                raise ArgumentError("synthetic datasets need n >= 1 and dim >= 1")
        else:
            probe = _raw_paths(self.path)[0] if self.source == "raw_file" and self.path else self.path
            if not probe or not os.path.isfile(probe):
                raise ArgumentError(f"dataset file {self.path!r} does not exist")

    @property
    def name(self) -> str:
        if self.source == "uniform_synthetic":
            return f"uniform-d{self.dim}"
        return Path(self.path).stem

    def load(self) -> FlatStore:
        if self.source == "uniform_synthetic":
            return gen_uniform(self.n, self.dim, self.seed)
        if self.source == "fvecs_file":
            return load_fvecs(self.path)
        if self.source == "raw_file":
            return load_raw(self.path)
        return load_hdf5_annbench(self.path, self.split)
