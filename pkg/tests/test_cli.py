import hashlib
import subprocess
import sys

import numpy as np
import pytest

from pathpdf import cli
from pathpdf.integrator import NumericError, gaussian_closed_form
from pathpdf.io import read_histogram, read_manifest, read_tsv, write_tsv

FAST = ["--points", "512", "--replicas", "4"]


def run(*args):
    return cli.main([str(a) for a in args])


def _sheet(path, n=3000, seed=0, sd=1e-3):
    rng = np.random.default_rng(seed)
    prices = 50 * np.exp(np.cumsum(rng.normal(0, sd, n)))
    with open(path, "w") as fh:
        fh.write("timestamp,price\n")
        for i, p in enumerate(prices):
            fh.write(f"{1_600_000_000 + 60 * i},{p:.8f}\n")
    return path


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_pdf_gaussian(tmp_path):
    assert run("pdf", "--gamma", 1, "--p", 2, "--sigma", 0.1, "--T", 1, *FAST, "--out-dir", tmp_path) == 0
    t = read_tsv(tmp_path / "curve.tsv")
    assert t["grid"].size == 40
    ref = gaussian_closed_form(0.0, t["grid"], 0.1, 0.0, 1.0)
    core = np.abs(t["grid"]) <= 0.3
    np.testing.assert_allclose(t["density"][core], ref[core], rtol=0.02)
    m = read_manifest(tmp_path / "manifest.txt")
    assert m["seed"] == "0" and m["sigma"] == "0.1" and m["command"] == "pdf"
    assert "threads" not in m


def test_pdf_is_byte_reproducible(tmp_path):
    args = ["pdf", "--gamma", 0.5, "--p", 1.5, "--sigma", 0.05, "--span", 0.3, *FAST]
    assert run(*args, "--out-dir", tmp_path / "a") == 0
    assert run(*args, "--out-dir", tmp_path / "b", "--threads", 3) == 0
    assert run("pdf", "--manifest", tmp_path / "a" / "manifest.txt", "--out-dir", tmp_path / "c") == 0
    for name in ("curve.tsv", "manifest.txt"):
        assert _digest(tmp_path / "a" / name) == _digest(tmp_path / "b" / name) == _digest(tmp_path / "c" / name)


def test_manifest_flags_can_be_overridden(tmp_path):
    assert run("pdf", "--gamma", 1, "--p", 2, "--sigma", 0.1, *FAST, "--out-dir", tmp_path / "a") == 0
    assert run("pdf", "--manifest", tmp_path / "a" / "manifest.txt", "--seed", 5, "--out-dir", tmp_path / "b") == 0
    assert read_manifest(tmp_path / "b" / "manifest.txt")["seed"] == "5"
    assert run("hist", "--manifest", tmp_path / "a" / "manifest.txt", "--out-dir", tmp_path / "c") == 1


def test_beta_flag_records_sigma(tmp_path):
    assert run("pdf", "--gamma", 1, "--p", 2, "--beta", 50, "--label", "1m", *FAST, "--out-dir", tmp_path) == 0
    m = read_manifest(tmp_path / "manifest.txt")
    assert float(m["sigma"]) == pytest.approx(0.1)
    assert m["label"] == "1m" and "beta" not in m


@pytest.mark.parametrize("argv", [
    ["pdf", "--gamma", "1", "--p", "2"],
    ["pdf", "--gamma", "1", "--p", "3", "--sigma", "0.1"],
    ["pdf", "--gamma", "1", "--p", "2", "--sigma", "0.1", "--beta", "2"],
    ["pdf", "--gamma", "1", "--p", "2", "--sigma", "0.1", "--replicas", "1"],
    ["pdf", "--gamma", "x"],
    ["converge", "--gamma", "1", "--p", "2", "--sigma", "0.1"],
    ["frobnicate"],
    [],
])
def test_config_errors_exit_1(argv, tmp_path):
    assert cli.main(argv + ["--out-dir", str(tmp_path)] if argv and argv[0] in cli.COMMANDS else argv) == 1


def test_numeric_failure_exits_2(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise NumericError("every weight underflowed")

    monkeypatch.setattr(cli, "pdf_curve", boom)
    assert run("pdf", "--gamma", 1, "--p", 2, "--sigma", 0.1, "--out-dir", tmp_path) == 2


def test_io_failure_exits_3(tmp_path):
    assert run("hist", "--file", tmp_path / "missing.csv", "--range", 0.01, "--out-dir", tmp_path) == 3
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run("pdf", "--gamma", 1, "--p", 2, "--sigma", 0.1, *FAST, "--out-dir", blocker / "sub") == 3


def test_hist_and_strides(tmp_path):
    sheet = _sheet(tmp_path / "sheet.csv")
    before = _digest(sheet)
    assert run("hist", "--file", sheet, "--bins", 120, "--range", 0.011, "--out-dir", tmp_path / "h1") == 0
    assert run("hist", "--file", sheet, "--bins", 75, "--range", 0.016, "--stride", 5, "--out-dir", tmp_path / "h5") == 0
    h1 = read_histogram(tmp_path / "h1" / "histogram.tsv")
    assert h1.bins == 120
    assert np.sum(h1.density) * h1.width == pytest.approx(1.0, abs=1e-9)
    m5 = read_manifest(tmp_path / "h5" / "manifest.txt")
    assert m5["returns"] == "2995" and m5["skipped_gaps"] == "0" and m5["stride"] == "5"
    assert _digest(sheet) == before


def test_hist_empty_file_is_a_config_error(tmp_path):
    (tmp_path / "empty.csv").write_text("")
    assert run("hist", "--file", tmp_path / "empty.csv", "--range", 0.01, "--out-dir", tmp_path) == 1


def test_compare_identical(tmp_path):
    sheet = _sheet(tmp_path / "sheet.csv")
    assert run("hist", "--file", sheet, "--bins", 40, "--range", 0.008, "--out-dir", tmp_path) == 0
    h = read_tsv(tmp_path / "histogram.tsv")
    write_tsv(tmp_path / "curve.tsv", {"grid": h["bin_center"], "density": h["density"], "stderr": 0 * h["density"]})
    assert run("compare", "--hist", tmp_path / "histogram.tsv", "--curve", tmp_path / "curve.tsv",
               "--out-dir", tmp_path / "cmp") == 0
    m = read_manifest(tmp_path / "cmp" / "manifest.txt")
    assert float(m["log_rmse"]) == 0.0 and float(m["within_fraction"]) == 1.0


def test_ck_gaussian(tmp_path):
    assert run("ck", "--gamma", 1, "--p", 2, "--sigma", 0.1, "--split", 0.5, "--mesh", 41, *FAST,
               "--out-dir", tmp_path) == 0
    m = read_manifest(tmp_path / "manifest.txt")
    assert m["compatible_with_zero"] == "true"
    assert read_tsv(tmp_path / "ck.tsv")["residual"].size == 40


def test_converge_outputs(tmp_path):
    assert run("converge", "--dims", "4,6", "--gamma", 1, "--p", 1.5, "--sigma", 0.0037, "--span", 0.16,
               "--grid-points", 12, *FAST, "--out-dir", tmp_path) == 0
    curves = read_tsv(tmp_path / "converge_curves.tsv")
    assert set(curves) == {"grid", "density_D4", "stderr_D4", "density_D6", "stderr_D6"}
    metrics = read_tsv(tmp_path / "converge_metrics.tsv")
    assert metrics["D1"].tolist() == [4] and metrics["D2"].tolist() == [6]


def test_sweep_ranks(tmp_path):
    sheet = _sheet(tmp_path / "sheet.csv", n=20000, sd=0.002)
    assert run("hist", "--file", sheet, "--bins", 30, "--range", 0.016, "--out-dir", tmp_path) == 0
    assert run("sweep", "--hist", tmp_path / "histogram.tsv", "--gammas", "1", "--ps", "2",
               "--sigmas", "0.001,0.002,0.004", *FAST, "--out-dir", tmp_path / "s") == 0
    t = read_tsv(tmp_path / "s" / "sweep.tsv")
    assert t["rank"].tolist() == [1, 2, 3]
    assert t["sigma"][0] == 0.002
    assert np.all(np.diff(t["log_rmse"]) >= 0)


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "pathpdf.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "pathpdf" in out.stdout
