import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from lamekit.cli import main

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def run(tmp_path, *args, name="report.json"):
    out = tmp_path / name
    code = main([*args, "--out", str(out), "--quiet"])
    return code, json.loads(out.read_text())


def statuses(report):
    return {c["name"]: c["status"] for c in report["cases"]}


def test_phi_root(tmp_path):
    code, rep = run(tmp_path, "phi-root")
    assert code == 0
    assert rep["results"]["phi_root"] == pytest.approx(0.580430419443108, abs=1e-15)
    assert set(rep) >= {"suite", "seed", "cases", "wall_time"}
    for case in rep["cases"]:
        assert set(case) == {"name", "status", "metric", "tolerance"}


def test_certify_singular_rigid(tmp_path, capsys):
    code, rep = run(tmp_path, "certify", "--config", str(CONFIGS / "singular-rigid.json"))
    assert code == 0
    assert rep["results"]["certificate"]["verdict"] == "AllCoefficientsVanish"
    assert '"verdict"' in capsys.readouterr().out


@pytest.mark.parametrize("name", ["plain-rigid", "traction-pair", "impedance-pair"])
def test_certify_shipped_configs(tmp_path, name):
    code, rep = run(tmp_path, "certify", "--config", str(CONFIGS / f"{name}.json"))
    assert code == 0
    assert all(s == "pass" for s in statuses(rep).values())


def test_verify_cgo_identities(tmp_path):
    code, rep = run(tmp_path, "verify-cgo")
    assert code == 0
    identity = [c for c in rep["cases"] if "identity" in c["name"]]
    assert identity and all(c["status"] == "pass" for c in identity)


def test_verify_expansions(tmp_path):
    code, rep = run(tmp_path, "verify-expansions")
    assert code == 0
    assert all(s == "pass" for s in statuses(rep).values())


def test_determinism(tmp_path):
    reports = []
    for k in range(2):
        _, rep = run(tmp_path, "verify-expansions", "--seed", "7", name=f"r{k}.json")
        rep.pop("wall_time")
        reports.append(json.dumps(rep, sort_keys=True))
    assert reports[0] == reports[1]


def test_seed_changes_samples(tmp_path):
    _, a = run(tmp_path, "verify-expansions", "--seed", "1", name="a.json")
    _, b = run(tmp_path, "verify-expansions", "--seed", "0x2", name="b.json")
    assert a["seed"] == 1 and b["seed"] == 2
    assert [c["metric"] for c in a["cases"]] != [c["metric"] for c in b["cases"]]


def test_schema_error_pointer(tmp_path, capsys):
    cfg = json.loads((CONFIGS / "plain-rigid.json").read_text())
    cfg["arm_minus"] = {"type": "glue"}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    assert main(["certify", "--config", str(path), "--quiet"]) == 2
    assert "/arm_minus/type" in capsys.readouterr().err


def test_failing_case_exits_one(tmp_path):
    cfg = json.loads((CONFIGS / "plain-rigid.json").read_text())
    cfg["expect"] = "AllCoefficientsVanish"
    path = tmp_path / "wrong.json"
    path.write_text(json.dumps(cfg))
    code, rep = run(tmp_path, "certify", "--config", str(path))
    assert code == 1
    assert statuses(rep)["verdict"] == "fail"


def test_scatter_writes_csv(tmp_path):
    cfg = json.loads((CONFIGS / "scatter-square.json").read_text())
    cfg["incidents"] = cfg["incidents"][:1]
    cfg["n_dirs"] = 16
    path = tmp_path / "sq.json"
    path.write_text(json.dumps(cfg))
    code, rep = run(tmp_path, "scatter", "--config", str(path))
    assert code == 0
    rows = list(csv.reader((tmp_path / "report.csv").open()))
    assert len(rows) == 1 + 16
    assert rep["cases"][0]["name"] == "boundary_residual[0]"


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lamekit", "phi-root", "--quiet"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["suite"] == "phi-root"
