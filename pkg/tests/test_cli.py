import json
import subprocess
import sys
from pathlib import Path

import pytest

from qpcalc.cli import main
from qpcalc.runner import CHECKS

ROOT = Path(__file__).parent.parent
MODELS = sorted((ROOT / "models").glob("*.qp"))
GOLDEN = ROOT / "tests" / "golden"
FAILING = {"poisson_formal_d3", "su2_flipped"}


@pytest.mark.parametrize("path", MODELS, ids=lambda p: p.stem)
def test_golden_report(path, tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main(["check", str(path), "--seed", "0", "--json", str(out)])
    assert code == (1 if path.stem in FAILING else 0)
    assert out.read_bytes() == (GOLDEN / f"{path.stem}.json").read_bytes()
    text = capsys.readouterr().out
    assert text.splitlines()[-1].endswith(" failed")


def test_list_checks(capsys):
    assert main(["check", "--list-checks"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split()[0] for line in lines] == list(CHECKS)
    assert len(lines) == 13


def test_json_to_stdout_is_the_report(capsys):
    path = ROOT / "models" / "su2.qp"
    assert main(["check", str(path), "--json", "-"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report) == {"model", "engine", "seed", "conventions", "checks"}
    assert report["checks"][0] == {"name": "master", "verdict": "pass", "obstruction": [],
                                   "paper_anchor": report["checks"][0]["paper_anchor"]}


def test_failing_report_lists_terms(capsys):
    assert main(["check", str(ROOT / "models" / "su2_flipped.qp"), "--json", "-"]) == 1
    check = json.loads(capsys.readouterr().out)["checks"][0]
    assert check["verdict"] == "fail"
    assert check["obstruction"] == [{"coeff": "2/1", "monomial": "p[2]*q[1]*q[2]*q[3]", "part": ""}]


@pytest.mark.parametrize("name", ["so3_action", "twisted_poisson_d4", "berezin"])
def test_parallel_matches_sequential(name, tmp_path, capsys):
    out = tmp_path / "par.json"
    main(["check", str(ROOT / "models" / f"{name}.qp"), "--parallel", "--json", str(out)])
    assert out.read_bytes() == (GOLDEN / f"{name}.json").read_bytes()


def test_usage_errors(tmp_path, capsys):
    assert main(["check"]) == 2
    assert main(["check", str(tmp_path / "missing.qp")]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["check", str(ROOT / "models" / "su2.qp"), "--trials", "-1"]) == 2


def test_parse_error_reports_location(tmp_path, capsys):
    bad = tmp_path / "bad.qp"
    bad.write_text("coords x[1..2] : 0\ntheta = y\n")
    assert main(["check", str(bad)]) == 2
    err = capsys.readouterr().err
    assert err.startswith(f"{bad}:2:9: ")


def test_check_parameter_errors_are_located(tmp_path, capsys):
    bad = tmp_path / "bad.qp"
    bad.write_text("chart degree 1\ncoords x[1..1] : 0\ncoords xi[1..1] : 1\npair x[1] <-> xi[1]\n"
                   "theta = xi[1]\ncheck master trials=3\n")
    assert main(["check", str(bad)]) == 2
    assert f"{bad}:6:" in capsys.readouterr().err


def test_console_script_exit_code():
    proc = subprocess.run([sys.executable, "-m", "qpcalc.cli", "check", str(ROOT / "models" / "su2_flipped.qp")],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert "[fail] master" in proc.stdout
