import csv
import json
import subprocess
import sys

import pytest

from excited_bm.cli import main


def read_report(out):
    with open(out / "report.csv") as fh:
        return list(csv.DictReader(fh))


def test_classify_writes_report_and_manifest(tmp_path, capsys):
    assert main(["classify", "--out", str(tmp_path), "--param", "delta=3"]) == 0
    rows = read_report(tmp_path)
    assert rows[0]["verdict"] == "TRANSIENT_RIGHT"
    assert float(rows[0]["speed"]) == pytest.approx(2.4618413, rel=1e-7)
    assert rows[0]["master_seed"] == "0"
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["exit_status"] == 0 and man["partial"] is False
    assert {"numpy", "scipy", "numba", "excited_bm"} <= set(man["versions"])
    assert json.loads(capsys.readouterr().out)["verdict"] == "TRANSIENT_RIGHT"


def test_sweep_bands(tmp_path):
    assert main(["sweep", "--out", str(tmp_path), "--start", "-6", "--stop", "6", "--step", "1.5"]) == 0
    rows = read_report(tmp_path)
    assert len(rows) == 9
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert all(c["ok"] for c in man["result"]["band_checks"])


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"profile": {"kind": "single_cookie", "delta": 0.5},
                               "classify": {"band": 0.1}}))
    out = tmp_path / "o"
    assert main(["classify", "--config", str(cfg), "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["band"] == 0.1
    assert read_report(out)[0]["verdict"] == "RECURRENT"
    out2 = tmp_path / "o2"
    assert main(["classify", "--config", str(cfg), "--out", str(out2), "--band", "0.2"]) == 0
    assert json.loads((out2 / "manifest.json").read_text())["config"]["band"] == 0.2


def test_bad_table_names_row(tmp_path, capsys):
    bad = tmp_path / "t.csv"
    bad.write_text("l,phi\n0,1\n0.5,2\n0.4,1\n")
    status = main(["classify", "--table", str(bad), "--out", str(tmp_path / "o")])
    assert status != 0
    assert "row 4" in capsys.readouterr().err
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["partial"] is True


def test_invalid_inputs_exit_nonzero(tmp_path):
    assert main(["classify", "--seed", "-1", "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--dt", "1e-4", "--bin-width", "0.001", "--out", str(tmp_path)]) == 2
    assert main(["classify", "--profile", "no_such", "--out", str(tmp_path)]) == 2


def test_simulate_outputs(tmp_path):
    assert main(["simulate", "--out", str(tmp_path), "--dt", "1e-3", "--t-max", "2", "--record-stride", "10"]) == 0
    assert (tmp_path / "path_0.csv").exists() and (tmp_path / "field_0.csv").exists()
    assert len(read_report(tmp_path)) == 1


def test_failed_verifier_exits_one(tmp_path):
    # at depth 0.1 the dual diffusion is far from its invariant law
    assert main(["rayknight", "--a", "0.1", "--n-paths", "200", "--out", str(tmp_path / "r")]) == 1
    assert json.loads((tmp_path / "r" / "manifest.json").read_text())["passed"] is False


def test_too_many_unfinished_paths_is_invalid(tmp_path):
    status = main(["drift-identity", "--param", "delta=0.5", "--a", "5", "--n-paths", "20", "--dt", "1e-3",
                   "--t-max", "0.5", "--out", str(tmp_path)])
    assert status == 2


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "manifest.json"}


def _stable_manifest(d):
    man = json.loads((d / "manifest.json").read_text())
    for k in ("wall_time_s", "jobs", "argv"):
        man.pop(k)
    return man


@pytest.mark.parametrize("cmd", [
    ["drift-identity", "--a", "1", "--n-paths", "60", "--dt", "1e-3", "--t-max", "100"],
    ["rayknight", "--a", "2", "--n-paths", "50"],
    ["erw", "--n-steps", "2000", "--n-walks", "20"],
])
def test_outputs_bit_identical_across_jobs(tmp_path, cmd):
    dirs = []
    for jobs in (1, 3, 1):
        d = tmp_path / f"run{len(dirs)}"
        main(cmd + ["--out", str(d), "--jobs", str(jobs), "--seed", "5"])
        dirs.append(d)
    assert _files(dirs[0]) == _files(dirs[1]) == _files(dirs[2])
    assert _stable_manifest(dirs[0]) == _stable_manifest(dirs[1])


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "excited_bm", "classify", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    r = subprocess.run([sys.executable, "-m", "excited_bm", "--write-defaults", str(tmp_path / "d.json")],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert "classify" in json.loads((tmp_path / "d.json").read_text())
