import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "tools" / "python"))
import lemwave_io  # noqa: E402

SIM_CLI = os.environ.get("SIM_CLI", "sim_cli")

TINY = """seed = 5
plate.n_particles = 300
newmark.dt = 2.5e-8
newmark.n_steps = 40
dataset.train.N = 3
dataset.train.R = 1
dataset.train.S = 2
dataset.train.C = 2
dataset.test.N = 2
dataset.test.R = 1
dataset.test.S = 0
dataset.test.C = 2
dataset.type_c_group = 2
dataset.type_s_group = 2
dataset.special_cases = 1
"""


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    (root / "tiny.cfg").write_text(TINY)
    subprocess.run([SIM_CLI, "gen-dataset", "--config", str(root / "tiny.cfg"), "--out", str(root / "out")],
                   check=True, capture_output=True)
    return lemwave_io.Dataset(root / "out" / "manifest.json")


def any_hit_downsample(fine, k=16):
    # coarse cell lit iff it overlaps a lit fine pixel with positive area
    n = fine.shape[0]
    out = np.zeros((k, k), np.uint8)
    for r, c in zip(*np.nonzero(fine)):
        rows = [R for R in range(k) if R * n < (r + 1) * k and r * k < (R + 1) * n]
        cols = [C for C in range(k) if C * n < (c + 1) * k and c * k < (C + 1) * n]
        for R in rows:
            out[R, cols] = 1
    return out


def test_manifest_counts_and_checksum(dataset):
    assert len(dataset) == 13
    assert len(dataset.ids("test")) == 5
    assert dataset.dataset_checksum() == int(dataset.manifest["dataset_checksum"], 16)


def test_tensors_and_labels_load_through_offsets(dataset):
    for i in range(len(dataset)):
        s = dataset.load(i)
        assert s.tensor.shape == (81, 40, 2)
        assert s.tensor.dtype == np.float32
        assert s.tensor.max() == 1.0 and s.tensor.min() == -1.0
        assert s.label100.shape == (100, 100) and s.label16.shape == (16, 16)
        np.testing.assert_array_equal(s.label16, any_hit_downsample(s.label100))
        assert (s.label100.sum() == 0) == (s.type == "R")
        assert s.crack_size == pytest.approx(s.label100.sum() / s.label100.size, abs=1e-12)


def test_checksum_catches_a_flipped_byte(dataset, tmp_path):
    e = dataset.entries[0]
    raw = bytearray((dataset.root / e["file"]).read_bytes())
    raw[e["tensor"]["offset"]] ^= 1
    copy = tmp_path / "copy"
    (copy / "samples").mkdir(parents=True)
    (copy / e["file"]).write_bytes(bytes(raw))
    (copy / "manifest.json").write_text(dataset.path.read_text())
    with pytest.raises(ValueError, match=e["id"]):
        lemwave_io.Dataset(copy / "manifest.json").load(0)


def test_prediction_round_trip(tmp_path):
    grid = np.linspace(0, 1, 256, dtype=np.float32).reshape(16, 16)
    lemwave_io.write_prediction(tmp_path / "a.wprd", "test-00003", grid)
    ident, back = lemwave_io.read_prediction(tmp_path / "a.wprd")
    assert ident == "test-00003"
    np.testing.assert_array_equal(back, grid)
    with pytest.raises(ValueError):
        lemwave_io.write_prediction(tmp_path / "b.wprd", "x", grid + 1)


def run_eval(dataset, preds, out):
    subprocess.run([SIM_CLI, "eval", "--manifest", str(dataset.path), "--predictions", str(preds), "--out", str(out)],
                   check=True, capture_output=True)
    lines = (out / "report.txt").read_text().splitlines()
    row = lines[2].split("|")
    return [float(v) for v in row[2:]]


def test_exported_predictions_score_in_eval(dataset, tmp_path):
    perfect, zeros = tmp_path / "perfect", tmp_path / "zeros"
    perfect.mkdir()
    zeros.mkdir()
    n_test = n_r = 0
    for i, e in enumerate(dataset.entries):
        if e["split"] != "test":
            continue
        s = dataset.load(i)
        n_test += 1
        n_r += s.type == "R"
        lemwave_io.write_prediction(perfect / f"{s.id}.wprd", s.id, s.label16.astype(np.float32))
        lemwave_io.write_prediction(zeros / f"{s.id}.wprd", s.id, np.zeros((16, 16), np.float32))
    assert run_eval(dataset, perfect, tmp_path / "e1") == [1.0] * 5
    assert run_eval(dataset, zeros, tmp_path / "e2")[-1] == pytest.approx(n_r / n_test, abs=5e-4)
