"""CSV schema, manifests, CLI subcommands, replay determinism."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from cascade_readout.cli import main
from cascade_readout.io import (RunManifest, SchemaError, manifest_path_for,
                                read_csv, write_csv)
from cascade_readout.optimize import minimize_error


def run_cli(*args):
    return main([str(a) for a in args])


# ---------------------------------------------------------------------------
# CSV and manifest plumbing
# ---------------------------------------------------------------------------

def test_csv_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    rows = [{"a": 1, "b": 0.1, "c": "x"}, {"a": 2, "b": float("inf"), "c": "y"}]
    write_csv(path, ["a", "b", "c"], rows, {"k": "v"})
    meta, columns, got = read_csv(path)
    assert meta["schema"] == "v1"
    assert meta["k"] == "v"
    assert columns == ["a", "b", "c"]
    assert [float(r["b"]) for r in got] == [0.1, math.inf]


def test_csv_rejects_unknown_schema(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# schema=v7\na,b\n1,2\n")
    with pytest.raises(SchemaError):
        read_csv(path)
    path.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError):
        read_csv(path)


def test_manifest_round_trip(tmp_path):
    m = RunManifest(command="fig3", params={"n_max": 2}, seeds={"base": 7},
                    outputs=["x.csv"], artifact_version="0.1.0")
    p = tmp_path / "m.json"
    m.save(p)
    back = RunManifest.load(p)
    assert back.command == "fig3"
    assert back.params == {"n_max": 2}


# ---------------------------------------------------------------------------
# analytic command
# ---------------------------------------------------------------------------

def test_analytic_zero_rho_is_chance(capsys):
    assert run_cli("analytic", "--n", 0, "--snr", 20, "--rho", 0, "--nu", 0.5) == 0
    out = capsys.readouterr().out
    row = out.strip().splitlines()[-1].split(",")
    header = out.strip().splitlines()[-2].split(",")
    rec = dict(zip(header, row))
    assert float(rec["eps"]) == 0.5


def test_analytic_invalid_rho_exits_2(capsys):
    assert run_cli("analytic", "--n", 0, "--snr", 20, "--rho", -1, "--nu", 0.5) == 2
    assert "error" in capsys.readouterr().err


def test_analytic_requires_point_or_optimize(capsys):
    assert run_cli("analytic", "--n", 0, "--snr", 20) == 2


def test_analytic_optimize_matches_library(capsys):
    assert run_cli("analytic", "--n", 1, "--snr", 20, "--optimize") == 0
    out = capsys.readouterr().out.strip().splitlines()
    rec = dict(zip(out[-2].split(","), out[-1].split(",")))
    res = minimize_error(1, 20.0)
    assert float(rec["eps"]) == pytest.approx(res.eps_opt, rel=1e-9)
    assert float(rec["rho_opt"]) == pytest.approx(res.rho_opt, rel=1e-9)


# ---------------------------------------------------------------------------
# fig3 command
# ---------------------------------------------------------------------------

def test_fig3_csv_round_trip_and_ordering(tmp_path, capsys):
    out = tmp_path / "fig3.csv"
    assert run_cli("fig3", "--snr-grid", "10,30", "--n-max", "2",
                   "--out", out) == 0
    meta, columns, rows = read_csv(out)
    assert columns == ["N", "S", "rho_opt", "nu_opt", "eps"]
    assert len(rows) == 6
    eps = {(int(r["N"]), float(r["S"])): float(r["eps"]) for r in rows}
    # curves ordered in N and decreasing in S
    assert eps[(2, 30.0)] < eps[(1, 30.0)] < eps[(0, 30.0)]
    assert all(eps[(n, 30.0)] < eps[(n, 10.0)] for n in range(3))
    # lossless reserialization
    write_csv(tmp_path / "again.csv", columns, rows, meta)
    first = (tmp_path / "again.csv").read_text()
    meta2, cols2, rows2 = read_csv(tmp_path / "again.csv")
    assert rows2 == rows
    assert manifest_path_for(out).exists()


# ---------------------------------------------------------------------------
# sample-tau command
# ---------------------------------------------------------------------------

def test_sample_tau_summary_and_ks(tmp_path, capsys):
    out = tmp_path / "tau.csv"
    assert run_cli("sample-tau", "--n", 0, "--draws", 4000, "--seed", 5,
                   "--out", out) == 0
    printed = capsys.readouterr().out
    assert "ks_p=" in printed
    meta, columns, rows = read_csv(out)
    assert columns == ["draw", "tau"]
    assert len(rows) == 4000
    mean = float(meta["mean"])
    stderr = float(meta["stderr"])
    assert abs(mean - 1.0) < 3 * stderr
    assert float(meta["ks_p"]) > 0.001


def test_sample_tau_zero_draws_exits_2(tmp_path, capsys):
    assert run_cli("sample-tau", "--n", 0, "--draws", 0,
                   "--out", tmp_path / "t.csv") == 2


# ---------------------------------------------------------------------------
# simulate + filter-one commands
# ---------------------------------------------------------------------------

def test_simulate_and_filter_one_round_trip(tmp_path, capsys):
    traj_csv = tmp_path / "traj.csv"
    assert run_cli("simulate", "--n", 0, "--snr", 20, "--state", "+",
                   "--t", 0.5, "--seed", 9, "--index", 4,
                   "--out", traj_csv) == 0
    meta, columns, rows = read_csv(traj_csv)
    assert columns == ["k", "t", "I_k"]
    assert meta["state"] == "+"
    assert meta["seed"] == "9"
    assert len(rows) == 200

    diag = tmp_path / "diag.csv"
    capsys.readouterr()
    assert run_cli("filter-one", "--traj", traj_csv, "--out", diag) == 0
    out = capsys.readouterr().out.strip().splitlines()
    rec = dict(zip(out[-2].split(","), out[-1].split(",")))
    assert rec["decision"] in "+-"

    meta_d, columns_d, rows_d = read_csv(diag)
    assert columns_d == ["k", "logL_plus", "logL_minus", "logLambda"]
    assert len(rows_d) == 200
    assert float(rows_d[-1]["logLambda"]) == pytest.approx(
        float(rec["logLambda"]), rel=1e-9)


# ---------------------------------------------------------------------------
# Monte Carlo commands: determinism, replay, thread independence
# ---------------------------------------------------------------------------

def test_fig5_determinism_and_replay(tmp_path):
    out1 = tmp_path / "a" / "fig5.csv"
    out1.parent.mkdir()
    args = ["fig5", "--snr", 5, "--n-max", 0, "--trials", 150, "--t", 2.0,
            "--seed", 11, "--threads", 1, "--out", out1]
    assert run_cli(*args) == 0
    bytes1 = out1.read_bytes()

    out2 = tmp_path / "b" / "fig5.csv"
    out2.parent.mkdir()
    assert run_cli("fig5", "--snr", 5, "--n-max", 0, "--trials", 150,
                   "--t", 2.0, "--seed", 11, "--threads", 2,
                   "--out", out2) == 0
    assert out2.read_bytes() == bytes1  # thread count cannot matter

    # replay from the manifest reproduces the file byte for byte
    replay_dir = tmp_path / "replayed"
    assert run_cli("replay", manifest_path_for(out1), "--out-dir", replay_dir) == 0
    assert (replay_dir / "fig5.csv").read_bytes() == bytes1

    meta, columns, rows = read_csv(out1)
    assert columns == ["N", "S", "decision", "trials", "eps_plus", "eps_minus",
                       "eps", "stderr", "seed", "t", "dt"]
    assert {r["decision"] for r in rows} == {"filter", "threshold"}


def test_fig6_tiny_run_and_replay(tmp_path):
    out = tmp_path / "fig6.csv"
    args = ["fig6", "--n", 1, "--snr", 20, "--ratios", "0.5,1,2",
            "--modes", "contrast", "--trials", 60, "--ref-trials", 80,
            "--t", 1.0, "--seed", 3, "--threads", 1, "--out", out]
    assert run_cli(*args) == 0
    meta, columns, rows = read_csv(out)
    assert columns == ["mode", "ratio", "eps", "stderr", "trials", "seed"]
    assert len(rows) == 5  # 3 swept ratios + symmetric + fully-asymmetric refs
    assert [r["trials"] for r in rows] == ["60", "60", "60", "80", "80"]
    assert float(rows[-1]["ratio"]) == math.inf
    bytes1 = out.read_bytes()

    replay_dir = tmp_path / "rep"
    assert run_cli("replay", manifest_path_for(out), "--out-dir", replay_dir) == 0
    assert (replay_dir / "fig6.csv").read_bytes() == bytes1


def test_simulate_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run_cli("simulate", "--n", 1, "--snr", 10, "--state", "-",
                       "--t", 0.25, "--seed", 21, "--out", p) == 0
    assert a.read_bytes() == b.read_bytes()


def test_manifest_records_resolved_seed(tmp_path, monkeypatch):
    monkeypatch.setenv("CASCADE_READOUT_SEED", "424242")
    out = tmp_path / "tau.csv"
    assert run_cli("sample-tau", "--n", 0, "--draws", 10, "--out", out) == 0
    manifest = RunManifest.load(manifest_path_for(out))
    assert manifest.params["seed"] == 424242
    # replay ignores the env var: the resolved seed is in the manifest
    monkeypatch.setenv("CASCADE_READOUT_SEED", "1")
    replay_dir = tmp_path / "rep"
    assert run_cli("replay", manifest_path_for(out), "--out-dir", replay_dir) == 0
    assert (replay_dir / "tau.csv").read_bytes() == out.read_bytes()


def test_unknown_command_exits_2():
    assert run_cli("frobnicate") == 2
