import json
import os

import numpy as np
import pytest

from furstlab.cli import main
from furstlab.fixtures import fixture_path
from furstlab.report import read_report

FAST = ["--steps", "2000", "--spectrum-seeds", "2", "--samples", "4000",
        "--eq-words", "50", "--n-inner", "10000"]


def run(args):
    return main(args)


def rows_by_quantity(out_dir):
    return {r["quantity"]: r for r in read_report(out_dir)}


def test_spectrum_single_matrix(tmp_path):
    out = str(tmp_path / "r")
    code = run(["spectrum", "--config", fixture_path("E1"), "--seed", "1",
                "--out", out, "--assume-irreducible-proximal",
                "--steps", "1000", "--spectrum-seeds", "1"])
    assert code == 0
    rows = rows_by_quantity(out)
    assert abs(float(rows["lambda_0"]["value"]) - np.log(2)) < 1e-9
    assert abs(float(rows["lambda_1"]["value"]) + np.log(2)) < 1e-9
    assert rows["lambda_0"]["metadata"]["assume_irreducible_proximal"]


def test_missing_seed_is_config_error(tmp_path, capsys):
    code = run(["spectrum", "--config", fixture_path("E2"),
                "--out", str(tmp_path / "r")])
    assert code == 1


def test_bad_config_is_config_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"name": "x", "dim": 2, "labels": ["a"],
                               "matrices": {"a": ["1", "0", "0", "1"]},
                               "probs": {"a": "1"}, "extra_field": 1}))
    code = run(["spectrum", "--config", str(bad), "--seed", "1",
                "--out", str(tmp_path / "r")])
    assert code == 1


def test_diagnostics_block_and_override(tmp_path):
    out = str(tmp_path / "r")
    code = run(["spectrum", "--config", fixture_path("E4"), "--seed", "1",
                "--out", out, "--steps", "1000", "--spectrum-seeds", "2"])
    assert code == 2
    code = run(["spectrum", "--config", fixture_path("E4"), "--seed", "1",
                "--out", out, "--assume-irreducible-proximal",
                "--steps", "20000", "--spectrum-seeds", "4"])
    assert code == 0
    rows = rows_by_quantity(out)
    target = (np.log(3) + np.log(2)) / 2
    assert abs(float(rows["lambda_0"]["value"]) - target) < 5e-3


def test_measure_writes_atoms_table(tmp_path):
    out = str(tmp_path / "r")
    code = run(["measure", "--config", fixture_path("E2"), "--seed", "3",
                "--out", out, "--samples", "2000"])
    assert code == 0
    rows = rows_by_quantity(out)
    atoms = rows["n_atoms"]["metadata"]["atoms_table"]
    assert os.path.exists(os.path.join(out, atoms))
    assert float(rows["stationarity_discrepancy"]["value"]) < 0.05


def test_dimension_and_entropy_commands(tmp_path):
    out = str(tmp_path / "r")
    assert run(["dimension", "--config", fixture_path("E2"), "--seed", "3",
                "--out", out, "--samples", "20000"]) == 0
    assert run(["entropy", "--config", fixture_path("E2"), "--seed", "3",
                "--out", out, "--samples", "20000", "--steps", "20000",
                "--spectrum-seeds", "4", "--n-inner", "10000"]) == 0
    rows = rows_by_quantity(out)
    assert "dim_nu" in rows and "alpha_guivarch" in rows
    assert "H_0" in rows and "dim_ly" in rows
    assert "furstenberg_entropy" in rows


def test_report_subcommand(tmp_path, capsys):
    out = str(tmp_path / "r")
    run(["spectrum", "--config", fixture_path("E1"), "--seed", "1",
         "--out", out, "--assume-irreducible-proximal",
         "--steps", "1000", "--spectrum-seeds", "1"])
    assert run(["report", "--out", out]) == 0
    printed = capsys.readouterr().out
    assert "lambda_0" in printed


def test_workers_env_and_flag(tmp_path, monkeypatch):
    out1 = str(tmp_path / "a")
    out2 = str(tmp_path / "b")
    monkeypatch.setenv("FURSTLAB_WORKERS", "3")
    assert run(["measure", "--config", fixture_path("E2"), "--seed", "5",
                "--out", out1, "--samples", "3000"]) == 0
    monkeypatch.setenv("FURSTLAB_WORKERS", "not-a-number")
    assert run(["measure", "--config", fixture_path("E2"), "--seed", "5",
                "--out", out2, "--samples", "3000", "--workers", "2"]) == 0
    a = [l for l in open(os.path.join(out1, "report.jsonl"))]
    b = [l for l in open(os.path.join(out2, "report.jsonl"))]
    assert a == b  # worker count does not touch row content


def test_rerun_appends_identical_rows(tmp_path):
    out = str(tmp_path / "r")
    args = ["spectrum", "--config", fixture_path("E2"), "--seed", "9",
            "--out", out, "--steps", "2000", "--spectrum-seeds", "2"]
    assert run(args) == 0
    first = open(os.path.join(out, "report.jsonl")).read()
    assert run(args) == 0
    second = open(os.path.join(out, "report.jsonl")).read()
    assert second == first + first  # append-only, bit-identical rerun


def test_verify_deterministic_fixture_not_applicable(tmp_path):
    out = str(tmp_path / "r")
    code = run(["verify", "--config", fixture_path("E1"), "--seed", "2",
                "--out", out, "--assume-irreducible-proximal",
                "--steps", "1000", "--spectrum-seeds", "2"])
    assert code == 0
    rows = read_report(out)
    na = [r for r in rows
          if r["metadata"].get("verdict") == "not-applicable"]
    assert {"stationarity_discrepancy", "dim_nu"} <= \
        {r["quantity"] for r in na}
    assert abs(float(rows_by_quantity(out)["lambda_0"]["value"])
               - np.log(2)) < 1e-9


def test_verify_tiny_budget_is_inconclusive_not_fail(tmp_path):
    out = str(tmp_path / "r")
    code = run(["verify", "--config", fixture_path("E2"), "--seed", "2",
                "--out", out, "--budget-scale", "0.01", "--probes", "30",
                "--hyperplanes", "10"])
    assert code == 0
    rows = read_report(out)
    verdicts = [r["metadata"].get("verdict") for r in rows
                if "verdict" in r["metadata"]]
    assert "fail" not in verdicts
    assert "inconclusive" in verdicts
