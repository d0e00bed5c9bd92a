import json

import pytest

from ricci_bvp.cli import main

FLAT = """
[run]
T = 0.01
snapshot_levels = 3
output = flat_static
[geometry]
chart = slab
n = 2
N0 = 7
Nt = 3
[initial]
family = flat
[boundary]
eta = constant
eta_value = 0.0
"""
HEMI = """
[run]
kind = rotsym
T = 0.01
snapshot_levels = 3
output = hemi
[geometry]
chart = radial
n = 2
N0 = 30
[initial]
family = hemisphere
[boundary]
eta = constant
"""


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.setenv("RICCI_BVP_OUTPUT_ROOT", str(tmp_path / "out"))
    (tmp_path / "flat.cfg").write_text(FLAT)
    (tmp_path / "hemi.cfg").write_text(HEMI)
    return tmp_path


def test_check_symbol_exit_codes(capsys):
    code, rep = _run(capsys, "check-symbol", "--n", "2", "--samples", "100", "--delta1", "0.9",
                     "--seed", "42")
    assert code == 0 and rep["min_normalized_det"] > 0
    code, rep = _run(capsys, "check-symbol", "--n", "1")
    assert code == 2 and rep["num_failures"] >= 1


def test_run_probe_pullback_and_verify(workdir, capsys):
    code, rep = _run(capsys, "run", str(workdir / "flat.cfg"))
    assert code == 0 and rep["final_deviation"] <= 1e-8
    d = workdir / "out" / "flat_static"
    assert (d / "manifest.json").is_file()
    code, rep = _run(capsys, "verify-manifest", str(d))
    assert code == 0 and rep["ok"]
    code, rep = _run(capsys, "probe-corner", str(d))
    assert code == 0 and rep["at_roundoff"]
    (d / "snapshots" / "0001.csv").unlink()
    code, rep = _run(capsys, "verify-manifest", str(d))
    assert code == 2 and rep["problems"]


def test_rotsym_and_kind_mismatch(workdir, capsys):
    code, rep = _run(capsys, "rotsym", str(workdir / "hemi.cfg"))
    assert code == 0 and rep["hemisphere_relative_error"] < 1e-3
    code, _ = _run(capsys, "run", str(workdir / "hemi.cfg"))
    assert code == 1


def test_check_compat_verdicts(workdir, capsys):
    (workdir / "ok.cfg").write_text(FLAT)
    code, rep = _run(capsys, "check-compat", str(workdir / "ok.cfg"))
    assert code == 0 and rep["order1"] == "PASS"
    (workdir / "bad.cfg").write_text(FLAT.replace("eta = constant", "eta = linear\neta_rate = 1"))
    code, rep = _run(capsys, "check-compat", str(workdir / "bad.cfg"))
    assert code == 2 and rep["order1_mean_verdict"] == "FAIL"


def test_errors(workdir, capsys):
    assert main(["bogus"]) == 1
    assert main(["run", str(workdir / "missing.cfg")]) == 1
    assert main(["probe-corner", str(workdir / "no_such_run")]) == 1
    (workdir / "broken.cfg").write_text("[run]\nT = -1\n")
    assert main(["converge", str(workdir / "broken.cfg")]) == 1
    capsys.readouterr()


def test_converge_flags_exact(workdir, capsys):
    code, rep = _run(capsys, "converge", str(workdir / "flat.cfg"), "--no-tangential")
    assert code == 0 and rep["exact"]
