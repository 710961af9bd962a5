import csv
import json
import os

import pytest

from leafpressure import cli

from conftest import LOG_LU

MINIMAL = {"system": {"matrix": [[2, 1], [1, 1]]}, "potentials": [{"kind": "zero"}],
           "run": {"n_max": 10}}


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_list_presets(capsys):
    assert cli.main(["list-presets"]) == 0
    names = capsys.readouterr().out.split()
    assert "catmap-entropy" in names and "perturbed-catmap" in names


def test_minimal_run(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["--out", str(out), "run", write(tmp_path, MINIMAL)]) == 0
    rows = read_rows(out / "series_zero.csv")
    assert rows[0] == ["n", "log_Z", "slope_diff"]
    assert len(rows) == 11
    s = json.loads((out / "summary.json").read_text())
    assert s["pressure_estimate"][0]["value"] == pytest.approx(LOG_LU, abs=1e-9)
    assert s["status"] == "ok" and "wallclock" in s and "versions" in s
    assert s["invariance_defect_failures"] == 0


def test_validation_exit(tmp_path, capsys):
    bad = dict(MINIMAL, leaf={"delta": 0.5})
    out = tmp_path / "o"
    assert cli.main(["--out", str(out), "run", write(tmp_path, bad)]) == 2
    rec = json.loads(capsys.readouterr().err)
    assert rec["error"] == "validation-error"
    assert "leaf/delta" in json.dumps(rec)
    assert (out / "failure.json").exists()


def test_parse_error(tmp_path, capsys):
    assert cli.main(["--out", str(tmp_path / "o"), "run", write(tmp_path, "{\n  \"system\": ,}")]) == 2
    rec = json.loads(capsys.readouterr().err)
    assert rec["error"] == "parse-error"
    assert "2" in json.dumps(rec)


def test_unknown_preset(tmp_path, capsys):
    assert cli.main(["--out", str(tmp_path), "preset", "nope"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "unknown-preset"


def test_missing_file(tmp_path):
    assert cli.main(["--out", str(tmp_path / "o"), "run", str(tmp_path / "absent.json")]) == 4


def test_bad_matrix_exit(tmp_path):
    cfg = dict(MINIMAL, system={"matrix": [[2, 0], [0, 1]]})
    assert cli.main(["--out", str(tmp_path / "o"), "run", write(tmp_path, cfg)]) == 2


def test_refinement_budget_exit(tmp_path, capsys):
    cfg = dict(MINIMAL, system={"matrix": [[2, 1], [1, 1]], "eps_p": 0.05},
               leaf={"h_max": 1e-3, "max_points": 1000})
    assert cli.main(["--out", str(tmp_path / "o"), "run", write(tmp_path, cfg)]) == 3
    assert json.loads(capsys.readouterr().err)["exit_code"] == 3


def test_deterministic_outputs(tmp_path):
    cfg = write(tmp_path, dict(MINIMAL, potentials=[{"kind": "trig", "terms": [{"k": [1, 0], "c": 0.3}]}]))
    for name, threads in (("a", "1"), ("b", "3")):
        assert cli.main(["--threads", threads, "--out", str(tmp_path / name), "run", cfg]) == 0
    files = sorted(f for f in os.listdir(tmp_path / "a") if f.endswith(".csv"))
    assert files
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_probe_and_oracle(tmp_path):
    cfg = {"system": {"matrix": [[3, 2, 0, 0], [1, 1, 0, 0], [0, 0, 2, 1], [0, 0, 1, 1]]},
           "splitting": {"mode": "cu", "indices": [0, 1, 2]},
           "potentials": [{"kind": "zero"}], "run": {"n_max": 8}}
    out = tmp_path / "p"
    assert cli.main(["--out", str(out), "probe", write(tmp_path, cfg)]) == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["contraction_verdict"] == "EXPONENTIAL"
    assert len(read_rows(out / "profile.csv")) == 9

    ocfg = dict(MINIMAL, oracle={"epsilons": [0.1], "n": [4], "grid_per_axis": 100})
    out = tmp_path / "q"
    assert cli.main(["--out", str(out), "oracle", write(tmp_path, ocfg, "o.json")]) == 0
    rows = read_rows(out / "oracle.csv")
    assert rows[0] == ["target", "n", "epsilon", "set_size", "log_sum", "lower", "upper"]
    assert len(rows) == 2
    assert cli.main(["--out", str(tmp_path / "r"), "oracle", write(tmp_path, MINIMAL, "m.json")]) == 2


def test_probe_needs_cu(tmp_path):
    assert cli.main(["--out", str(tmp_path / "o"), "probe", write(tmp_path, MINIMAL)]) == 2
