import json
import struct

import numpy as np
import pytest

from fern import ArgumentError, FormatError
from fern.datasets import (
    DatasetSpec,
    gen_uniform,
    load_any,
    load_fvecs,
    load_hdf5_annbench,
    load_raw,
    write_fvecs,
    write_raw,
)


# -- gen_uniform -----------------------------------------------------------

def test_single_component_in_range():
    for seed in range(20):
        v = gen_uniform(1, 1, seed).vectors
        assert v.shape == (1, 1) and -1 <= v[0, 0] < 1


def test_deterministic():
    a = gen_uniform(100, 16, 7).vectors
    b = gen_uniform(100, 16, 7).vectors
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() != gen_uniform(100, 16, 8).vectors.tobytes()


def test_prefix_property():
    big = gen_uniform(1000, 32, 3).vectors
    small = gen_uniform(10, 32, 3).vectors
    assert big[:10].tobytes() == small.tobytes()


def test_frozen_stream():
    # pins the generator algorithm (Philox, float32 draws) against silent changes
    v = gen_uniform(2, 2, 42).vectors
    np.testing.assert_array_equal(v, np.float32([[0.8504249, -0.82784474], [-0.71868706, -0.71688545]]))


def test_statistics_1e5():
    x = gen_uniform(100_000, 128, 42).vectors
    assert abs(float(x.mean(dtype=np.float64))) < 0.01
    assert x.min() >= -1.0 and x.max() < 1.0
    assert x.dtype == np.float32


@pytest.mark.parametrize("n, d, seed", [(0, 3, 1), (3, 0, 1), (1, 1, -1), (1, 1, 2**64)])
def test_gen_rejects(n, d, seed):
    with pytest.raises(ArgumentError):
        gen_uniform(n, d, seed)


# -- fvecs -----------------------------------------------------------------

def test_fvecs_hand_crafted(tmp_path):
    p = tmp_path / "one.fvecs"
    p.write_bytes(struct.pack("<iff", 2, 1.5, -2.5))
    np.testing.assert_array_equal(load_fvecs(p).vectors, [[1.5, -2.5]])


def test_fvecs_empty(tmp_path):
    p = tmp_path / "empty.fvecs"
    p.write_bytes(b"")
    assert len(load_fvecs(p)) == 0


def test_fvecs_roundtrip(tmp_path, rng):
    x = rng.normal(size=(257, 13)).astype(np.float32)
    p = tmp_path / "r.fvecs"
    write_fvecs(p, x)
    assert load_fvecs(p).vectors.tobytes() == x.tobytes()
    assert p.stat().st_size == 257 * (4 + 13 * 4)


@pytest.mark.parametrize("payload", [
    struct.pack("<iff", 2, 1.0, 2.0) + struct.pack("<ifff", 3, 1.0, 2.0, 3.0),  # inconsistent dims
    struct.pack("<iff", 2, 1.0, 2.0) + struct.pack("<if", 2, 1.0),  # truncated
    struct.pack("<i", 0),
    struct.pack("<i", -4),
    struct.pack("<i", 200_000),
    struct.pack("<iff", 2, float("nan"), 1.0),
    b"\x01\x00",
])
def test_fvecs_malformed(tmp_path, payload):
    p = tmp_path / "bad.fvecs"
    p.write_bytes(payload)
    with pytest.raises(FormatError):
        load_fvecs(p)


# -- raw -------------------------------------------------------------------

def test_raw_two_by_three(tmp_path):
    (tmp_path / "a.f32").write_bytes(np.arange(6, dtype="<f4").tobytes())
    (tmp_path / "a.json").write_text(json.dumps({"n": 2, "d": 3, "dtype": "f32le"}))
    x = load_raw(tmp_path / "a").vectors
    np.testing.assert_array_equal(x, [[0, 1, 2], [3, 4, 5]])
    assert load_raw(tmp_path / "a.f32").vectors.tobytes() == x.tobytes()
    assert load_raw(tmp_path / "a.json").vectors.tobytes() == x.tobytes()


def test_raw_size_mismatch(tmp_path):
    (tmp_path / "a.f32").write_bytes(b"\x00" * 20)
    (tmp_path / "a.json").write_text(json.dumps({"n": 2, "d": 3, "dtype": "f32le"}))
    with pytest.raises(FormatError):
        load_raw(tmp_path / "a")


def test_raw_nan_rejected(tmp_path):
    write_raw(tmp_path / "a", np.float32([[1, np.nan]]))
    with pytest.raises(FormatError):
        load_raw(tmp_path / "a")


def test_raw_roundtrip(tmp_path):
    store = gen_uniform(1000, 128, 7)
    write_raw(tmp_path / "u", store)
    assert load_raw(tmp_path / "u").vectors.tobytes() == store.vectors.tobytes()


def test_raw_bad_sidecar(tmp_path):
    (tmp_path / "a.f32").write_bytes(b"")
    (tmp_path / "a.json").write_text("{not json")
    with pytest.raises(FormatError):
        load_raw(tmp_path / "a")
    (tmp_path / "a.json").write_text(json.dumps({"n": 0, "d": 3, "dtype": "f64le"}))
    with pytest.raises(FormatError):
        load_raw(tmp_path / "a")


# -- hdf5 ------------------------------------------------------------------

@pytest.fixture
def h5py():
    return pytest.importorskip("h5py")


def make_annbench(path, train, test):
    import h5py

    with h5py.File(path, "w") as f:
        f.create_dataset("train", data=train)
        f.create_dataset("test", data=test)


def test_hdf5_splits(tmp_path, rng, h5py):
    train = rng.normal(size=(60, 784)).astype(np.float32)
    test = rng.normal(size=(10, 784)).astype(np.float64)
    make_annbench(tmp_path / "mini.hdf5", train, test)
    tr = load_hdf5_annbench(tmp_path / "mini.hdf5", "train")
    te = load_hdf5_annbench(tmp_path / "mini.hdf5", "test")
    assert (len(tr), tr.dim) == (60, 784)
    assert (len(te), te.dim) == (10, 784)
    assert tr.vectors.tobytes() == train.tobytes()


def test_hdf5_errors(tmp_path, h5py):
    with h5py.File(tmp_path / "a.hdf5", "w") as f:
        f.create_dataset("train", data=np.zeros((3, 2), np.int32))
    with pytest.raises(FormatError, match="non-float"):
        load_hdf5_annbench(tmp_path / "a.hdf5", "train")
    with pytest.raises(FormatError, match="no dataset"):
        load_hdf5_annbench(tmp_path / "a.hdf5", "test")


def test_load_any_dispatch(tmp_path, rng, h5py):
    x = rng.normal(size=(5, 3)).astype(np.float32)
    write_fvecs(tmp_path / "x.fvecs", x)
    write_raw(tmp_path / "x", x)
    make_annbench(tmp_path / "x.hdf5", x, x)
    for name in ("x.fvecs", "x", "x.hdf5"):
        assert load_any(tmp_path / name).vectors.tobytes() == x.tobytes()


# -- DatasetSpec -----------------------------------------------------------

def test_dataset_spec(tmp_path):
    assert len(DatasetSpec("uniform_synthetic", n=10, dim=4, seed=1).load()) == 10
    with pytest.raises(ArgumentError):
        DatasetSpec("uniform_synthetic", n=0, dim=4)
    with pytest.raises(ArgumentError):
        DatasetSpec("fvecs_file", path=str(tmp_path / "missing.fvecs"))
    write_raw(tmp_path / "r", np.ones((2, 2), np.float32))
    assert len(DatasetSpec("raw_file", path=str(tmp_path / "r")).load()) == 2
