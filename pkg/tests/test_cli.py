import json
import math
import subprocess
import sys

import pytest

from marginlab.cli import CSV_HEADER, fmt, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


REF = ["--second-order", "--z", "1", "--p1", "2", "--p2", "6"]


def test_margins_reference_text(capsys):
    code, out, _ = run(capsys, "margins", *REF)
    assert code == 0
    assert "1.71429" in out and "15.5627 deg" in out
    assert "1.5 (3.5218 dB)" in out and "9.2786 deg" in out
    assert "2.6406" in out and "8.4341 dB" in out


def test_margins_reference_json(capsys):
    code, out, _ = run(capsys, "margins", *REF, "--format", "json")
    doc = json.loads(out)
    assert code == 0
    res = doc["results"]
    assert res["controllers"]["PID"]["gain"]["value"] == pytest.approx(12 / 7)
    assert res["controllers"]["PI"]["phase"]["value"] == pytest.approx(0.161942, abs=1e-6)
    assert res["lti"]["gain"]["value"] == pytest.approx(2.640625)
    assert doc["manifest"]["content_hash"].startswith("sha256:")


def test_margins_first_order(capsys):
    code, out, _ = run(capsys, "margins", "--first-order", "--beta0", "1", "--beta1", "-4", "--p", "1",
                       "--format", "json")
    res = json.loads(out)["results"]
    assert code == 0
    assert res["controllers"]["P"]["gain"]["value"] == 4
    assert math.degrees(res["controllers"]["P"]["phase"]["value"]) == pytest.approx(36.87, abs=1e-2)
    assert res["lti"]["gain"]["value"] == 16
    assert res["controllers"]["PID"] is None


def test_margins_not_stabilizable(capsys):
    code, out, _ = run(capsys, "margins", "--second-order", "--z", "2", "--p1", "2", "--p2", "2")
    assert code == 3 and "not stabilizable" in out


@pytest.mark.parametrize("argv", [
    ["margins", "--second-order", "--z", "0", "--p1", "2", "--p2", "6"],
    ["margins", "--second-order", "--z", "1", "--p1", "-2", "--p2", "6"],
    ["margins", "--second-order", "--z", "1", "--p1", "2"],
    ["margins", "--z", "1", "--p1", "2", "--p2", "6"],
])
def test_margins_input_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "error" in err


def test_sweep_csv_format(capsys):
    code, out, _ = run(capsys, "sweep", "--p1", "2", "--p2", "6", "--points", "16")
    lines = out.split("\n")
    assert code == 0
    assert lines[0] == ",".join(CSV_HEADER)
    assert out.endswith("\n") and "\r" not in out
    assert len(lines) == 18


def test_sweep_pole_rows(capsys):
    code, out, _ = run(capsys, "sweep", "--p1", "2", "--p2", "6", "--z-min", "1", "--z-max", "7", "--points", "7")
    rows = [r.split(",") for r in out.strip().split("\n")[1:]]
    flags = {r[0]: r[-1] for r in rows}
    assert flags["2"] == "false" and flags["6"] == "false" and flags["1"] == "true"


def test_sweep_bad_grid(capsys):
    code, _, _ = run(capsys, "sweep", "--p1", "2", "--p2", "6", "--z-min", "3", "--z-max", "1")
    assert code == 2


def test_sweep_out_and_manifest(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--sigma", "4", "--nu", "1", "--points", "5", "--out", str(out)]) == 0
    manifest = json.loads((tmp_path / "s.csv.manifest.json").read_text())
    import hashlib
    assert manifest["content_hash"] == "sha256:" + hashlib.sha256(out.read_bytes()).hexdigest()


def test_sweep_curve(capsys):
    code, out, _ = run(capsys, "sweep", "--curve", "theta-kp", "--z", "1", "--p1", "2", "--p2", "6", "--points", "9")
    lines = out.strip().split("\n")
    assert code == 0 and lines[0] == "kp,theta_hat,omega_hat" and len(lines) == 10


def test_verify_infinite_rows_skipped(capsys):
    code, out, _ = run(capsys, "verify", "--first-order", "--beta0", "0", "--beta1", "1", "--p", "3")
    assert code == 0
    assert out.count("skipped") == 4


def test_verify_tight_tolerance_fails(capsys):
    code, out, _ = run(capsys, "verify", "--first-order", "--beta0", "1", "--beta1", "-4", "--p", "1",
                       "--tolerance", "1e-9")
    assert code == 4 and "offenders" in out


def test_verify_env_tolerance(capsys, monkeypatch):
    monkeypatch.setenv("MARGINLAB_TOLERANCE", "0.5")
    code, _, _ = run(capsys, "verify", "--first-order", "--beta0", "1", "--beta1", "-4", "--p", "1")
    assert code == 0


def test_verify_csv(capsys):
    code, out, _ = run(capsys, "verify", "--first-order", "--beta0", "1", "--beta1", "-4", "--p", "1",
                       "--controller", "P", "--format", "csv")
    assert code == 0
    assert out.splitlines()[0] == "controller,objective,closed_form,oracle,gap,status,note"


def test_design_pi_phase(capsys):
    code, out, _ = run(capsys, "design", "--controller", "pi", "--objective", "phase", *REF, "--format", "json")
    res = json.loads(out)["results"]
    assert code == 0
    assert res["boundary_gains"][0] == pytest.approx(10.078, abs=1e-3)
    assert res["interior_margin"] >= 0.98 * 0.16194


def test_design_not_stabilizable(capsys):
    code, _, _ = run(capsys, "design", "--objective", "gain", "--second-order", "--z", "6", "--p1", "2",
                     "--p2", "6")
    assert code == 3


def test_fmt():
    assert fmt(math.inf) == "inf" and fmt(None) == "" and fmt(1 / 3) == "0.333333333333"


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "marginlab", "margins", *REF, "--controller", "PI"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "PI:" in r.stdout
