import json
import subprocess
import sys

import pytest

from flagcurv.cli import main

BAD_JACOBI = {
    "dim": 4,
    "structure_constants": [[0, 1, 2, 1.0], [0, 2, 0, 1.0], [1, 2, 3, 1.0]],
    "inner_product": [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]],
}


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_validate(capsys, tmp_path):
    code, out = run(capsys, "validate", "--algebra", "su2")
    report = json.loads(out)
    assert code == 0 and report["schema_version"] == 1
    assert report["validation"]["center_dim"] == 0 and report["validation"]["rank"] == 1

    path = tmp_path / "bad.json"
    path.write_text(json.dumps(BAD_JACOBI))
    code, out = run(capsys, "validate", "--algebra", str(path))
    report = json.loads(out)
    assert code == 1
    assert report["validation"]["max_violation"]["jacobi"] > 0.5
    assert report["max_violation"] >= report["validation"]["max_violation"]["jacobi"]

    code, out = run(capsys, "validate", "--algebra", "abelian3")
    assert code == 0 and json.loads(out)["validation"]["center_dim"] == 3

    assert main(["validate", "--algebra", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "junk.json").write_text("{not json")
    assert main(["validate", "--algebra", str(tmp_path / "junk.json")]) == 2


def test_curvature(capsys):
    code, out = run(capsys, "curvature", "--algebra", "su2", "--flags", "10")
    report = json.loads(out)
    assert code == 0
    assert all(abs(f["K"] - 0.25) < 1e-3 for f in report["flags"])
    code, out = run(capsys, "curvature", "--algebra", "abelian3", "--flags", "10", "--format", "csv")
    rows = out.strip().splitlines()
    assert rows[0] == "y,v,K,status" and len(rows) == 11
    assert all(abs(float(r.split(",")[2])) <= 1e-6 for r in rows[1:])
    code, out = run(capsys, "curvature", "--algebra", "su2", "--metric", "navigation", "--epsilon", "0.1",
                    "--flags", "100")
    assert code == 0 and json.loads(out)["min_K"] >= -1e-3


def test_curvature_glued_marks_blend_rows(capsys):
    code, out = run(capsys, "curvature", "--algebra", "su2", "--metric", "glued", "--epsilon", "0.05",
                    "--flags", "30", "--seed", "3")
    report = json.loads(out)
    statuses = {f["status"].split()[0] for f in report["flags"]}
    assert code == 0 and statuses <= {"region", "blend"}
    assert all(f["K"] > 0 for f in report["flags"] if f["status"].startswith("region"))


def test_navigation_check(capsys):
    code, out = run(capsys, "navigation-check", "--algebra", "su2", "--flags", "20")
    report = json.loads(out)
    assert code == 0 and report["residual"] <= 1e-3 and report["passed"]
    assert main(["navigation-check", "--algebra", "su2", "--wind", "2,0,0"]) == 2
    assert main(["navigation-check", "--algebra", "su2", "--wind", "1,2"]) == 2


def test_verify_fp_hypothesis_violation(capsys):
    code, out = run(capsys, "verify-fp", "--algebra", "abelian3")
    report = json.loads(out)
    assert code == 1
    assert report["error"]["type"] == "HypothesisViolation" and report["error"]["stage"] == "covering"


def test_verify_fp_small_epsilon(capsys, tmp_path):
    out_path = tmp_path / "fp.json"
    argv = ["verify-fp", "--algebra", "su2", "--epsilon", "0.001", "--planes", "5", "--poles", "8",
            "--seed", "7", "--out", str(out_path)]
    assert main(argv) == 0
    first = out_path.read_bytes()
    report = json.loads(first)
    assert report["fp"]["summary"]["passed"] and report["convexity"]["passed"]
    assert report["covering"]["charts"] and report["delta"] > 0
    # byte-identical replay
    assert main(argv) == 0
    assert out_path.read_bytes() == first


def test_verify_fp_convexity_failure_is_reported(capsys):
    code, out = run(capsys, "verify-fp", "--algebra", "su2", "--epsilon", "0.1", "--planes", "5",
                    "--poles", "8", "--seed", "7")
    report = json.loads(out)
    assert code == 1
    assert report["fp"]["summary"]["passed"]
    assert not report["convexity"]["passed"] and report["convexity"]["margin"] < 0


def test_verify_fp_csv(capsys):
    code, out = run(capsys, "verify-fp", "--algebra", "su2", "--epsilon", "0.001", "--planes", "3",
                    "--poles", "4", "--format", "csv")
    rows = out.strip().splitlines()
    assert code == 0 and rows[0] == "plane,theta,K" and len(rows) > 1


def test_bad_arguments():
    assert main(["verify-fp", "--algebra", "su2", "--planes", "0"]) == 2
    assert main(["verify-fp", "--algebra", "su2", "--epsilon", "-1"]) == 2
    with pytest.raises(SystemExit):
        main(["nonsense"])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "flagcurv", "validate", "--algebra", "su2xR"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["validation"]["center_dim"] == 1
