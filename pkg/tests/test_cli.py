import json
import math

import numpy as np
import pytest
from pytest import approx

from vbdeblur.cli import (
    main,
    parse_lambda_policy,
    read_image,
    read_kernel_text,
    write_pgm,
)
from vbdeblur.grids import conv2d_valid
from vbdeblur.pipeline import make_kernel, make_test_image
from vbdeblur.solver import Learned, Schedule


def blurred_input(tmp_path, size=48, ks=5):
    sharp = make_test_image(size, seed=1, kind="blocks")
    k = make_kernel("uniform", ks, width=3)
    y = np.clip(conv2d_valid(sharp, k), 0.0, 1.0)
    path = tmp_path / "blurry.pgm"
    write_pgm(path, y)
    return path


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_usage_error_exit_codes(tmp_path, capsys):
    assert main([]) == 2
    assert main(["deblur", str(tmp_path / "missing.pgm"),
                 "--out", str(tmp_path / "o")]) == 2
    assert "not found" in capsys.readouterr().err
    assert main(["deblur", "--bogus"]) == 2


def test_lambda_policy_parsing():
    assert parse_lambda_policy("schedule:1.15,1e-4") == Schedule(1.15, 1e-4)
    assert parse_lambda_policy("learned:auto") == Learned(None)
    assert parse_lambda_policy("learned:0.5") == Learned(0.5)
    with pytest.raises(ValueError):
        parse_lambda_policy("fixed:1")
    with pytest.raises(ValueError):
        parse_lambda_policy("schedule:1.15")


def test_pgm_round_trip(tmp_path):
    img = make_test_image(32, seed=4)
    path = tmp_path / "x.pgm"
    write_pgm(path, img)
    back = read_image(path)
    assert back.shape == img.shape
    assert back == approx(img, abs=1.0 / 255.0)


def test_deblur_writes_artifacts(tmp_path):
    inp = blurred_input(tmp_path)
    out = tmp_path / "run"
    rc = main(["deblur", str(inp), "--out", str(out), "--kernel-size", "5",
               "--max-iters", "40"])
    assert rc == 0
    for name in ("kernel.txt", "restored.pgm", "trace.csv", "run_manifest.json"):
        assert (out / name).exists(), name
    k = read_kernel_text(out / "kernel.txt")
    assert k.shape == (5, 5)
    assert np.all(k >= 0)
    assert float(k.sum()) == approx(1.0, abs=1e-9)
    header = (out / "trace.csv").read_text().splitlines()[0]
    assert header == "level,iteration,lam,cost,kernel_change"


def test_deblur_seed_reproducible(tmp_path):
    inp = blurred_input(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["deblur", str(inp), "--out", str(out1), "--kernel-size", "5",
                 "--max-iters", "30", "--seed", "3"]) == 0
    assert main(["deblur", str(inp), "--out", str(out2), "--kernel-size", "5",
                 "--max-iters", "30", "--seed", "3"]) == 0
    for name in ("kernel.txt", "restored.pgm", "trace.csv"):
        assert read_bytes(out1 / name) == read_bytes(out2 / name), name


def test_manifest_reexecutes_identically(tmp_path):
    out1 = tmp_path / "first"
    assert main(["penalty", "--out", str(out1), "--x-step", "0.1"]) == 0
    manifest = json.loads((out1 / "run_manifest.json").read_text())
    argv = manifest["argv"]
    out2 = tmp_path / "second"
    argv[argv.index(str(out1))] = str(out2)
    assert main(argv) == 0
    assert read_bytes(out1 / "penalty.csv") == read_bytes(out2 / "penalty.csv")


def test_penalty_csv_contents(tmp_path):
    out = tmp_path / "pen"
    assert main(["penalty", "--out", str(out)]) == 0
    lines = (out / "penalty.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert header == ["rho", "x", "gvb_closed", "gvb_numeric",
                      "closed_minus_numeric", "normalized", "l1_ref"]
    # default grid: 1001 x samples for each of 4 noise ratios
    assert len(lines) - 1 == 1001 * 4

    cols = {name: i for i, name in enumerate(header)}
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    deltas = data[:, cols["closed_minus_numeric"]]
    assert np.max(np.abs(deltas - math.log(2.0))) < 1e-6
    for rho in np.unique(data[:, cols["rho"]]):
        sub = data[data[:, cols["rho"]] == rho]
        assert float(sub[:, cols["normalized"]].min()) == approx(0.0, abs=1e-15)


def test_bench1d_outputs_and_determinism(tmp_path):
    out1 = tmp_path / "b1"
    assert main(["bench1d", "--out", str(out1), "--seeds", "2"]) == 0
    lines = (out1 / "cases.csv").read_text().splitlines()
    assert lines[0] == "seed,kernel,mode,kernel_l2,kernel_tv,signal_l0,sweeps"
    assert len(lines) - 1 == 2 * 2 * 2  # seeds x kernels x modes
    summary = json.loads((out1 / "summary.json").read_text())
    assert summary["cases"] == 4
    assert 0 <= summary["kernel_l2_wins_vb"] <= 4
    assert 0 <= summary["sparsity_wins_vb"] <= 4

    out2 = tmp_path / "b2"
    assert main(["bench1d", "--out", str(out2), "--seeds", "2"]) == 0
    assert read_bytes(out1 / "cases.csv") == read_bytes(out2 / "cases.csv")
    assert read_bytes(out1 / "summary.json") == read_bytes(out2 / "summary.json")


def test_discriminate_outputs(tmp_path):
    out = tmp_path / "disc"
    assert main(["discriminate", "--out", str(out), "--p-min", "0.5",
                 "--p-max", "1.0", "--p-step", "0.5"]) == 0
    lines = (out / "discriminate.csv").read_text().splitlines()
    assert lines[0] == "signal,p,cost_true,cost_delta,favored,failed"
    assert len(lines) - 1 == 3 * 2  # three signals, two p values
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["favored"]) == {"edge", "spike", "composite"}
    allowed = {"true", "delta", "tie", "failed"}
    for by_p in summary["favored"].values():
        assert set(by_p.values()) <= allowed


def test_patchmap_outputs(tmp_path):
    out = tmp_path / "pm"
    assert main(["patchmap", "--out", str(out)]) == 0
    for name in ("patchmap_p0.5.pgm", "patchmap_p0.3.pgm",
                 "patchmap_p0.1.pgm", "patchmap_gvb.pgm", "summary.json"):
        assert (out / name).exists(), name
    summary = json.loads((out / "summary.json").read_text())
    f = summary["fractions"]
    assert set(f) == {"p0.5", "p0.3", "p0.1", "gvb"}
    assert all(0.0 <= v <= 1.0 for v in f.values())
    assert 0.0 <= summary["gvb_vs_l0.1_agreement"] <= 1.0


def test_verify_all_checks_pass(tmp_path, capsys):
    report = tmp_path / "report.json"
    assert main(["verify", "--json", str(report)]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    data = json.loads(report.read_text())
    assert data["ok"] is True
    names = {entry["check"] for entry in data["checks"]}
    assert {"penalty-offset", "zero-rho-limit", "rho-ordering", "concavity",
            "descent", "scale-invariance", "lambda-floor",
            "sparsity-bound"} <= names
    assert all(entry["ok"] for entry in data["checks"])


def test_verify_only_filter(capsys):
    assert main(["verify", "--only", "penalty-offset"]) == 0
    out = capsys.readouterr().out
    assert "penalty-offset" in out
    assert "descent" not in out
