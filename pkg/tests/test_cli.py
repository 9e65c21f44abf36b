"""
Test suite for the mflab command line: document loading, report files and
exit statuses.
"""
import csv
import json
import os

import pytest

from src.commands import REGISTRY, get_command
from src.mflab import create_lab, main, run
from src.mflab_dynamics import DivergenceError
from src.mflab_process import Command
from src.mflab_reports import make_check
from src.mflab_validation import ValidationError


def _read(path):
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


def _document(command="critical-points", **overrides):
    document = {"schema": 1, "command": command, "seed": 7, "potential": {"kind": "quartic1d"}}
    document.update(overrides)
    return document


def test_registry_covers_every_command():
    """Test that every document command has a handler."""
    assert sorted(REGISTRY) == sorted(["potential-report", "critical-points", "gibbs", "simulate", "pde",
                                       "transition", "saddle-exit", "inequalities", "curie-weiss"])
    with pytest.raises(ValidationError):
        get_command("unknown")


def test_critical_points_run(write_document, tmp_path, monkeypatch):
    """Test a successful run and the files it writes."""
    monkeypatch.setenv("MFLAB_LOG_FILE", str(tmp_path / "mflab.log"))
    out = tmp_path / "report"
    status = main(["--config", write_document(_document()), "--output", str(out)])
    assert status == 0
    assert sorted(os.listdir(out)) == ["config.echo.json", "critical_points.csv", "summary.json"]

    echo = _read(out / "config.echo.json")
    assert echo["params"]["grid_per_axis"] == 9
    assert echo["workers"] == 1
    summary = _read(out / "summary.json")
    assert summary["command"] == "critical-points"
    assert summary["seed"] == 7
    assert summary["passed"] is True
    assert summary["kinds"] == ["minimizer", "maximizer", "minimizer"]
    with open(out / "critical_points.csv", encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert [float(row["m0"]) for row in rows] == pytest.approx([-1.0, 0.0, 1.0], abs=1e-10)
    assert [row["kind"] for row in rows] == summary["kinds"]


def test_echo_reproduces_run(write_document, tmp_path):
    """Test that re-running the echoed document gives the same summary."""
    first = tmp_path / "first"
    assert run(write_document(_document()), output=str(first)) == 0
    second = tmp_path / "second"
    assert run(str(first / "config.echo.json"), output=str(second)) == 0
    assert _read(first / "summary.json") == _read(second / "summary.json")


def test_unknown_key_is_a_config_error(write_document, tmp_path):
    """Test that a misspelled parameter exits with status 2 and error.json."""
    out = tmp_path / "bad"
    document = _document(params={"grid_per_axes": 9})
    assert run(write_document(document), output=str(out)) == 2
    error = _read(out / "error.json")["error"]
    assert error["exit_code"] == 2
    assert "grid_per_axes" in error["message"]
    assert not os.path.exists(out / "summary.json")


def test_missing_document(tmp_path):
    """Test that a missing document is an input error."""
    out = tmp_path / "missing"
    assert run(str(tmp_path / "nope.json"), output=str(out)) == 2
    assert _read(out / "error.json")["error"]["code"] == "INPUT_ERROR"


def test_invalid_json(tmp_path):
    """Test that a malformed document is an input error."""
    path = tmp_path / "broken.json"
    path.write_text("{schema: 1", encoding="utf-8")
    assert run(str(path), output=str(tmp_path / "out")) == 2


def test_numeric_error_exit_status(write_document, tmp_path, monkeypatch):
    """Test that numeric failures exit with status 3."""
    def diverge(spec, params, seed, writer):
        raise DivergenceError("particle cloud left the threshold; reduce the step", "dynamics.simulate")

    monkeypatch.setitem(REGISTRY, "critical-points", Command("critical-points", diverge))
    out = tmp_path / "numeric"
    assert run(write_document(_document()), output=str(out)) == 3
    error = _read(out / "error.json")["error"]
    assert error["code"] == "DIVERGENCE"
    assert error["operation"] == "dynamics.simulate"


def test_failed_check_exit_status(write_document, tmp_path, monkeypatch):
    """Test that a failed acceptance check exits with status 1."""
    def failing(spec, params, seed, writer):
        return {"checks": [make_check("always_off", 1.0, 0.0, 0.1, False)]}

    monkeypatch.setitem(REGISTRY, "critical-points", Command("critical-points", failing))
    out = tmp_path / "failed"
    assert run(write_document(_document()), output=str(out)) == 1
    summary = _read(out / "summary.json")
    assert summary["passed"] is False


def test_seed_and_workers_overrides(write_document, tmp_path, monkeypatch):
    """Test that command-line flags override the document."""
    monkeypatch.setenv("MFLAB_LOG_FILE", str(tmp_path / "mflab.log"))
    out = tmp_path / "override"
    assert main(["--config", write_document(_document()), "--output", str(out), "--seed", "11",
                 "--workers", "2"]) == 0
    echo = _read(out / "config.echo.json")
    assert echo["seed"] == 11
    assert echo["workers"] == 2
    assert echo["output"] == str(out)


def test_default_output_directory(write_document, tmp_path, monkeypatch):
    """Test that runs without an output go under the lab output directory."""
    monkeypatch.setenv("MFLAB_OUTPUT_DIR", str(tmp_path / "lab"))
    create_lab({"log_file": None})
    assert run(write_document(_document())) == 0
    assert os.path.exists(tmp_path / "lab" / "critical-points" / "summary.json")


def test_inequalities_run_on_pure_confinement(write_document, tmp_path):
    """Test the inequalities command with the LSI bundle and Poincare bounds."""
    document = _document("inequalities", potential={"kind": "quadratic", "kappa": 1.0},
                         params={"theta_exponent": 1.0, "phi_exponent": 1.0,
                                 "lsi": {"c1": 12.0, "c2": 12.0, "beta": 4.0},
                                 "poincare": {"u": "quadratic", "N_list": [10, 100, 1000]}})
    out = tmp_path / "inequalities"
    assert run(write_document(document), output=str(out)) == 0
    summary = _read(out / "summary.json")
    assert summary["pl"]["constant"] == pytest.approx(1.0, abs=1e-12)
    assert summary["lsi"]["upper_tight"] == pytest.approx(0.1569, abs=1e-4)
    assert {c["name"] for c in summary["checks"]} == {"gaussian_pl_sup", "theta_exponent", "phi_exponent",
                                                      "poincare_exponent", "poincare_below_upper"}
    for name in ("profile.csv", "g_phi.csv", "poincare.csv"):
        assert os.path.exists(out / name)


@pytest.mark.slow
def test_transition_end_to_end(write_document, tmp_path):
    """Test the reduced transition study on the double well."""
    document = _document("transition")
    out = tmp_path / "transition"
    assert run(write_document(document), output=str(out)) == 0
    assert os.path.exists(out / "summary.json")


@pytest.mark.slow
def test_curie_weiss_end_to_end(write_document, tmp_path):
    """Test the Curie-Weiss suite at kappa0 = 1."""
    document = _document("curie-weiss", potential={"kind": "curie_weiss", "kappa0": 1.0})
    out = tmp_path / "curie_weiss"
    assert run(write_document(document), output=str(out)) == 0
    summary = _read(out / "summary.json")
    assert 0.45 <= summary["sigma2_c"] <= 0.47
