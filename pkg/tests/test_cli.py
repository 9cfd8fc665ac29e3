import subprocess
import sys

import numpy as np
import pytest

from fern import FernIndex
from fern.cli import main
from fern.datasets import load_fvecs, write_fvecs, write_raw


def run(*argv):
    """Run the CLI in a subprocess; returns (exit code, stdout, stderr)."""
    p = subprocess.run([sys.executable, "-m", "fern", *map(str, argv)], capture_output=True, text=True)
    return p.returncode, p.stdout, p.stderr


def call(capsys, *argv):
    try:
        code = main([str(a) for a in argv])
    except SystemExit as e:
        code = e.code
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(out):
    return [line.split(",") for line in out.splitlines()[1:] if not line.startswith("#")]


def summary(out):
    line = [l for l in out.splitlines() if l.startswith("# summary")][0]
    return dict(kv.split("=") for kv in line.split()[2:])


def test_gen(tmp_path, capsys):
    out = tmp_path / "u128"
    assert call(capsys, "gen", "--n", 1000, "--d", 128, "--seed", 42, "--out", out)[0] == 0
    assert (tmp_path / "u128.f32").stat().st_size == 512_000
    assert (tmp_path / "u128.json").exists()
    first = (tmp_path / "u128.f32").read_bytes()
    call(capsys, "gen", "--n", 1000, "--d", 128, "--seed", 42, "--out", out)
    assert (tmp_path / "u128.f32").read_bytes() == first


def test_gen_zero_is_usage_error(tmp_path):
    code, _, err = run("gen", "--n", 0, "--d", 4, "--out", tmp_path / "x")
    assert code == 2
    assert "usage" in err


def test_unknown_flag_is_usage_error(tmp_path):
    code, _, err = run("gen", "--n", 3, "--d", 4, "--out", tmp_path / "x", "--fast")
    assert code == 2


def test_build_three_vectors(tmp_path, capsys):
    write_raw(tmp_path / "three", np.float32([[0, 0], [1, 0], [-1, 0]]))
    code, out, _ = call(capsys, "build", "--input", tmp_path / "three", "--out", tmp_path / "a.fern")
    assert code == 0
    assert "n=3" in out and "max_depth=1" in out
    call(capsys, "build", "--input", tmp_path / "three.f32", "--out", tmp_path / "b.fern")
    assert (tmp_path / "a.fern").read_bytes() == (tmp_path / "b.fern").read_bytes()


def test_build_cosine_zero_vector(tmp_path):
    write_raw(tmp_path / "z", np.float32([[1, 0], [0, 0]]))
    code, _, err = run("build", "--input", tmp_path / "z", "--metric", "cosine", "--out", tmp_path / "z.fern")
    assert code == 1
    assert "ZeroVectorError" in err


def test_build_missing_input(tmp_path, capsys):
    code, _, err = call(capsys, "build", "--input", tmp_path / "nope", "--out", tmp_path / "x.fern")
    assert code == 1 and "error" in err


@pytest.fixture
def built(tmp_path, capsys):
    call(capsys, "gen", "--n", 3000, "--d", 16, "--seed", 5, "--out", tmp_path / "data")
    call(capsys, "build", "--input", tmp_path / "data", "--out", tmp_path / "data.fern")
    return tmp_path / "data.fern"


def test_lookup_sample_recall(built, capsys):
    code, out, _ = call(capsys, "lookup", "--index", built, "--sample", 1000, "--seed", 7)
    assert code == 0
    assert out.splitlines()[0] == "qid,sq_distance,visited"
    assert len(rows(out)) == 1000
    assert summary(out)["recall"] == "1.0"


def test_search_safe_matches_lookup_on_stored(built, capsys):
    _, a, _ = call(capsys, "lookup", "--index", built, "--sample", 200, "--seed", 3)
    _, b, _ = call(capsys, "search", "--index", built, "--sample", 200, "--seed", 3, "--mode", "safe")
    assert [r[:2] for r in rows(a)] == [r[:2] for r in rows(b)]


def test_search_eps_zero_equals_never(built, tmp_path, capsys):
    write_raw(tmp_path / "q", np.random.default_rng(0).uniform(-1, 1, (50, 16)).astype(np.float32))
    for traversal in ("queue", "stack"):
        _, a, _ = call(capsys, "search", "--index", built, "--query-file", tmp_path / "q",
                       "--mode", "eps:0.0", "--traversal", traversal)
        _, b, _ = call(capsys, "search", "--index", built, "--query-file", tmp_path / "q",
                       "--mode", "never", "--traversal", traversal)
        assert rows(a) == rows(b)


def test_search_safe_query_file_is_exact(built, tmp_path, capsys):
    write_fvecs(tmp_path / "q.fvecs", np.random.default_rng(1).uniform(-1, 1, (40, 16)).astype(np.float32))
    code, out, _ = call(capsys, "search", "--index", built, "--query-file", tmp_path / "q.fvecs",
                        "--traversal", "stack")
    assert code == 0 and summary(out)["recall"] == "1.0"


def test_search_bad_mode(built):
    assert run("search", "--index", built, "--sample", 3, "--mode", "sometimes")[0] == 2


def test_lookup_dimension_mismatch(built, tmp_path, capsys):
    write_raw(tmp_path / "q3", np.ones((2, 3), np.float32))
    code, _, err = call(capsys, "lookup", "--index", built, "--query-file", tmp_path / "q3")
    assert code == 1


def test_lookup_bad_index_file(tmp_path, capsys):
    (tmp_path / "junk.fern").write_bytes(b"JUNKJUNKJUNK")
    code, _, err = call(capsys, "lookup", "--index", tmp_path / "junk.fern", "--sample", 1)
    assert code == 1 and "FormatError" in err


def test_stats_single_node(tmp_path, capsys):
    ix = FernIndex(4)
    ix.insert([1, 2, 3, 4])
    ix.save(tmp_path / "one.fern")
    code, out, _ = call(capsys, "stats", "--index", tmp_path / "one.fern")
    assert code == 0
    assert "mean_depth=0.0000" in out and "max_depth=0" in out
    assert "in_between_aggregate=0.000000" in out


def test_sweep(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("dim = 32\nseed = 42\nsizes = 10^3, 10^4, 10^5\nqueries = 50\nout = out/s\n")
    code, out, _ = call(capsys, "sweep", "--config", cfg)
    assert code == 0
    lines = (tmp_path / "out" / "s.csv").read_text().splitlines()
    assert len(lines) == 4
    assert [l.split(",")[0] for l in lines[1:]] == ["1000", "10000", "100000"]
    for ext in ("json", "svg", "png"):
        assert (tmp_path / "out" / f"s.{ext}").stat().st_size > 0
    assert out.splitlines()[0].startswith("n,d,mode")


def test_sweep_bad_config(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("sizes = 100, 10\n")
    assert call(capsys, "sweep", "--config", cfg)[0] == 1


def test_convert_roundtrip(tmp_path, capsys):
    x = np.random.default_rng(3).normal(size=(77, 9)).astype(np.float32)
    write_fvecs(tmp_path / "a.fvecs", x)
    assert call(capsys, "convert", "--from", "fvecs", "--to", "raw",
                "--input", tmp_path / "a.fvecs", "--output", tmp_path / "mid")[0] == 0
    assert call(capsys, "convert", "--from", "raw", "--to", "fvecs",
                "--input", tmp_path / "mid", "--output", tmp_path / "b.fvecs")[0] == 0
    assert (tmp_path / "a.fvecs").read_bytes() == (tmp_path / "b.fvecs").read_bytes()


def test_convert_hdf5(tmp_path, capsys):
    h5py = pytest.importorskip("h5py")
    x = np.random.default_rng(4).normal(size=(20, 6)).astype(np.float32)
    with h5py.File(tmp_path / "d.hdf5", "w") as f:
        f["train"] = x
        f["test"] = x[:5]
    call(capsys, "convert", "--from", "hdf5", "--to", "fvecs", "--split", "test",
         "--input", tmp_path / "d.hdf5", "--output", tmp_path / "t.fvecs")
    assert load_fvecs(tmp_path / "t.fvecs").vectors.tobytes() == x[:5].tobytes()
