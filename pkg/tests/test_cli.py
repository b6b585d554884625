import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from linattack import cli, polyatk

FIXTURES = Path(__file__).parent / "fixtures"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_fit_json(capsys):
    code, out, _ = run(capsys, "fit", "--json")
    payload = json.loads(out)
    assert code == 0 and payload["n"] == 536 and payload["m"] == 7
    assert payload["sigma_min"] > 0


def test_fit_on_fixture_file(capsys):
    code, out, _ = run(capsys, "fit", "--data", str(FIXTURES / "istanbul_sample.csv"), "--json")
    assert code == 0 and json.loads(out)["n"] == 24


def test_attack_one_uses_one_based_index(capsys):
    code, out, _ = run(capsys, "attack-one", "--index", "4", "--eta", "0.2", "--json")
    p = json.loads(out)
    assert code == 0
    assert p["beta_after"][3] == pytest.approx(p["predicted_value"])
    assert np.linalg.norm(p["x0"] + [p["y0"]]) == pytest.approx(0.2)


def test_attack_multi_exit_codes(capsys, monkeypatch):
    code, out, _ = run(capsys, "attack-multi", "--index", "4", "--eta", "1", "--lam", "-1", "--json")
    assert code == 0 and json.loads(out)["certified"]
    real = polyatk.solve_quartic

    def uncertified(*a, **kw):
        sol = real(*a, **kw)
        sol.certified = False
        return sol

    monkeypatch.setattr(polyatk, "solve_quartic", uncertified)
    code, _, err = run(capsys, "attack-multi", "--index", "4", "--eta", "1")
    assert code == 2 and "not certified" in err


def test_attack_rankone_and_unbounded(capsys):
    code, out, _ = run(capsys, "attack-rankone", "--index", "4", "--eta-frac", "0.5", "--json")
    p = json.loads(out)
    assert code == 0 and p["converged"]
    assert np.all(np.diff(p["trace"]) <= 1e-10)
    code, _, err = run(capsys, "attack-rankone", "--index", "4", "--eta-frac", "1.01")
    assert code == 3
    assert "certificate" in err and "probe" in err


def test_baseline(capsys):
    code, out, _ = run(capsys, "baseline", "--index", "4", "--eta", "0.2", "--trials", "1000", "--json")
    assert code == 0 and json.loads(out)["trials"] == 1000


def test_sweep_writes_outputs(capsys, tmp_path):
    code, out, _ = run(capsys, "sweep", "--attack", "one", "--index", "4", "--etas", "0.1,0.2",
                       "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "results.csv").exists() and list(tmp_path.glob("*.svg"))
    code, _, _ = run(capsys, "sweep", "--attack", "rankone", "--index", "4", "--etas", "1.01",
                     "--fraction", "--allow-unbounded", "--out", str(tmp_path / "u"))
    assert code == 3


def test_validate(capsys):
    code, out, _ = run(capsys, "validate")
    assert code == 0 and out.count("PASS") >= 5 and "FAIL" not in out


def test_errors_are_reported(capsys):
    code, _, err = run(capsys, "attack-one", "--index", "9", "--eta", "0.2")
    assert code == 1 and err.startswith("error:")
    code, _, err = run(capsys, "fit", "--data", str(FIXTURES / "malformed_row17.csv"))
    assert code == 1 and "17" in err


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "linattack.cli", "fit"], capture_output=True, text=True)
    assert res.returncode == 0 and "sigma_min" in res.stdout
