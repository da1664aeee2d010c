"""Command-line interface: exit codes, output files, round-trips."""

import csv
import json
import math

import numpy as np
import pytest

from striplyap.cli import main


def test_analyze_ok(capsys):
    assert main(["analyze", "--width", "13", "--energy", "0.95"]) == 0
    out = capsys.readouterr().out
    assert "3 hyperbolic" in out
    assert "satisfied" in out


def test_analyze_parabolic_exit_code(capsys):
    assert main(["analyze", "--width", "4", "--energy", "0"]) == 2
    assert "rejected" in capsys.readouterr().err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--width", "nope"])
    assert exc.value.code == 64
    with pytest.raises(SystemExit) as exc:
        main(["bogus-command"])
    assert exc.value.code == 64


def test_estimate_free_mixed_matches_rates(tmp_path, capsys):
    out = tmp_path / "est.json"
    code = main(["estimate", "--width", "13", "--energy", "0.95",
                 "--lambda", "0", "--steps", "3000", "--burn-in", "1000",
                 "--trajectories", "1", "--out", str(out),
                 "--format", "json"])
    assert code == 0
    payload = json.loads(out.read_text())
    assert set(payload) == {"config", "results", "version"}
    assert payload["config"]["width"] == 13
    assert payload["config"]["seed"] == 0
    gammas = payload["results"]["gammas"]
    from striplyap.normalform import build_normal_form
    from striplyap.spectral import channel_spectrum
    nf = build_normal_form(channel_spectrum(13, 0.95))
    assert np.abs(np.array(gammas) - nf.eta_hat).max() < 1e-8


def test_estimate_csv_roundtrip(tmp_path):
    out = tmp_path / "est.csv"
    code = main(["estimate", "--width", "5", "--energy", "0.2",
                 "--lambda", "0.3", "--steps", "5000", "--burn-in", "500",
                 "--trajectories", "1", "--out", str(out)])
    assert code == 0
    text = out.read_text()
    assert text.splitlines()[0] == "slot,gamma,stderr"
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    from striplyap.lyapunov import estimate_spectrum
    from striplyap.model import StripModel
    est = estimate_spectrum(StripModel(5, 0.2, 0.3, seed=0), steps=5000,
                            burn_in=500, n_trajectories=1)
    for q, row in enumerate(rows):
        assert float(row["gamma"]) == est.gammas[q]
        assert float(row["stderr"]) == est.stderrs[q]


def test_compare_single_point_width_one(tmp_path):
    out = tmp_path / "cmp.csv"
    code = main(["compare", "--width", "1", "--energy", "0", "--lambda",
                 "0.05", "--steps", "20000", "--burn-in", "2000",
                 "--trajectories", "1", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ("E,lambda,gamma_L_direct,gamma_L_stderr,"
                        "gamma_L_formula,gamma_1_direct,gamma_1_formula,"
                        "sum_gamma_direct,sum_gamma_formula,bound_bulk,"
                        "bound_edge,note")
    with open(out, newline="") as fh:
        row = list(csv.DictReader(fh))[0]
    # single channel: the weight moments are pinned, so the formula is exact
    assert float(row["gamma_L_formula"]) == pytest.approx(0.05 ** 2 / 8,
                                                          rel=1e-12)
    assert float(row["bound_bulk"]) == pytest.approx(0.05 ** 2 / 8)


def test_compare_free_coupling_row(tmp_path):
    out = tmp_path / "cmp0.csv"
    code = main(["compare", "--width", "13", "--energy", "-0.03", "--lambda",
                 "0", "--steps", "2000", "--burn-in", "100",
                 "--trajectories", "1", "--out", str(out)])
    assert code == 0
    with open(out, newline="") as fh:
        row = list(csv.DictReader(fh))[0]
    assert float(row["gamma_L_direct"]) == pytest.approx(0.0, abs=1e-12)
    assert float(row["gamma_1_direct"]) == pytest.approx(0.0, abs=1e-12)
    assert float(row["sum_gamma_direct"]) == pytest.approx(0.0, abs=1e-11)


def test_compare_sweep_rejected_rows_marked(tmp_path):
    out = tmp_path / "sweep.csv"
    # sweep crossing a parabolic energy (E = 0 for width 4) gets a note
    code = main(["compare", "--width", "4", "--sweep-energy=-0.1:0.1:3",
                 "--lambda", "0.1", "--steps", "2000", "--burn-in", "100",
                 "--trajectories", "1", "--out", str(out)])
    assert code == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    mid = rows[1]
    assert math.isnan(float(mid["gamma_L_direct"]))
    assert "rejected" in mid["note"]


def test_compare_requires_exactly_one_energy_spec():
    assert main(["compare", "--width", "5", "--lambda", "0.1"]) == 64
    assert main(["compare", "--width", "5", "--energy", "0.2",
                 "--sweep-energy", "0:1:2"]) == 64


def test_verify_cli_ok():
    code = main(["verify", "--width", "5", "--energy", "0.2", "--lambda",
                 "0.3", "--trials", "25", "--moment-draws", "20000",
                 "--dynamics-steps", "10000"])
    assert code == 0


def test_meanfield_cli(tmp_path, capsys):
    out = tmp_path / "mf.json"
    code = main(["meanfield", "--width", "13", "--energy", "-0.03", "--out",
                 str(out), "--format", "json"])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["results"]["residual"] < 1e-10
    assert sum(payload["results"]["weights"]) == pytest.approx(1.0)
    assert main(["meanfield", "--width", "13", "--energy", "0.95"]) == 2
