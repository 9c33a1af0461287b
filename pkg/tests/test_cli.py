import json
import subprocess
import sys

import numpy as np
import pytest

from cilab import cli
from cilab.io import atomic_write, csv_text, fmt, json_text


@pytest.fixture(autouse=True)
def _cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("CIL_THREADS", raising=False)


def test_fmt_and_csv():
    assert fmt(0.1) == "0.10000000000000001" and fmt(3) == "3" and fmt(True) == "True"
    assert csv_text(["a", "b"], [[1, 0.5]]) == "a,b\n1,0.5\n"


def test_json_text_numpy_and_sorted():
    out = json.loads(json_text({"b": np.float64(1.5), "a": [np.int64(2)]}))
    assert out == {"a": [2], "b": 1.5}
    assert json_text({"b": 1, "a": 2}).index('"a"') < json_text({"b": 1, "a": 2}).index('"b"')


def test_atomic_write_leaves_no_temp(tmp_path):
    p = tmp_path / "sub" / "x.txt"
    atomic_write(p, "hello")
    assert p.read_text() == "hello"
    assert [f.name for f in p.parent.iterdir()] == ["x.txt"]


def test_toy_writes_csv(tmp_path, capsys):
    assert cli.main(["toy", "--steps", "4", "--out", "t.csv", "--manifest", "m.json"]) == 0
    rows = (tmp_path / "t.csv").read_text().splitlines()
    assert rows[0].startswith("k,lambda_k,defect") and len(rows) == 6
    assert rows[2].split(",")[2] == "3/4"
    man = json.loads((tmp_path / "m.json").read_text())
    assert man["passed"] and man["config"]["steps"] == 4 and "manifest" not in man["config"]
    assert (tmp_path / "m.timings.json").exists()
    assert "PASS  toy.lemma" in capsys.readouterr().out


@pytest.mark.parametrize("argv, field", [
    (["toy", "--steps", "99"], "steps"),
    (["euler-ci", "--resolution", "100"], "resolution"),
    (["euler-ci", "--rho", "1.5"], "rho"),
    (["subsol", "--kind", "vortex"], "kind"),
    (["suite", "--filter", "toy,nope"], "filter"),
])
def test_invalid_values_exit_2(tmp_path, capsys, argv, field):
    assert cli.main(argv + ["--manifest", "m.json"]) == 2
    err = capsys.readouterr().err
    assert f"{field}:" in err
    assert list(tmp_path.iterdir()) == []


def test_unknown_config_key(tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({"steps": 3, "colour": "red"}))
    assert cli.main(["toy", "--config", "c.json"]) == 2
    assert "colour: unknown key" in capsys.readouterr().err


def test_flags_override_file(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"steps": 3, "out": "a.csv"}))
    assert cli.main(["toy", "--config", "c.json", "--steps", "2"]) == 0
    assert len((tmp_path / "a.csv").read_text().splitlines()) == 4


def test_bad_thread_env(monkeypatch, capsys):
    monkeypatch.setenv("CIL_THREADS", "zero")
    assert cli.main(["toy"]) == 2
    assert "CIL_THREADS" in capsys.readouterr().err


def test_suite_json_deterministic(tmp_path, capsys):
    outs = []
    for name in ("a.json", "b.json"):
        assert cli.main(["suite", "--filter", "toy,wavecone,multiplier", "--json", "--manifest", name]) == 0
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    man = json.loads(outs[0])
    assert man["gate_count"] == 9 and man["failures"] == []
    assert man["gates"]["toy.runtime"]["measured"] is None


def test_gate_failure_exit_1(capsys):
    # the shear optimum gate is a known open item; the exit status must report it
    assert cli.main(["subsol", "--resolution", "64", "--out", "s.json"]) == 1
    assert "FAIL  subsol.c_star" in capsys.readouterr().out


def test_gate_names_fixed():
    from cilab.experiments import DRIVERS, GATES, run_toy
    assert set(DRIVERS) == set(GATES)
    r = run_toy(3)
    assert list(r.gates) == [f"toy.{g}" for g in GATES["toy"]]


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "cilab.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "euler-ci" in res.stdout
