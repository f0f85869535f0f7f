import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from creepdiv import InvalidConfig, ValidationError
from creepdiv.cli import (
    SCAN_HEADER,
    VERIFY_HEADER,
    check_document,
    load_model,
    main,
    model_to_dict,
    parse_model_json,
    parse_model_text,
    solve_document,
)
from creepdiv.errors import BracketFailure

ROOT = Path(__file__).resolve().parents[1]
CFG = ROOT / "configs" / "worked_example.cfg"
GOLDEN = ROOT / "tests" / "data" / "worked_example_solution.json"


def write(tmp_path, text, name="m.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_text_grammar(m4):
    text = "# model\nmu = 2   # alias\nsigma=1\nq = 4\ndelta = 1.8\nS = 0.05\n\n[jump]\nlambda = 1\np = 0.5\n"
    assert parse_model_text(text) == m4


def test_parse_several_jumps():
    text = "c=1\nsigma=1\nq=1\ndelta=0.5\nS=0.1\n[jump]\nlambda=1\np=2\n[jump]\nlambda=0.5\np=0.7\n"
    assert parse_model_text(text).jumps == ((1.0, 2.0), (0.5, 0.7))


@pytest.mark.parametrize(
    "text",
    [
        "c=1\nc=2\nsigma=1\nq=1\ndelta=1\nS=0",
        "c=1\nsigma=1\nq=1\ndelta=1\nS=0\ncolour=red",
        "c=1\nsigma=1\nq=1\ndelta=1",
        "c=one\nsigma=1\nq=1\ndelta=1\nS=0",
        "c=1\nsigma=1\nq=1\ndelta=1\nS=0\n[jump]\nlambda=1",
        "c=1\nsigma=1\nq=1\ndelta=1\nS=0\n[drift]\n",
        "c 1\nsigma=1\nq=1\ndelta=1\nS=0",
        "c=1\nsigma=1\nq=-1\ndelta=1\nS=0",
    ],
)
def test_parse_text_errors(text):
    with pytest.raises(ValidationError):
        parse_model_text(text)


def test_json_round_trip(m4, tmp_path):
    assert parse_model_json(model_to_dict(m4)) == m4
    p = write(tmp_path, json.dumps(model_to_dict(m4)), "m.json")
    assert load_model(p) == m4
    assert load_model(CFG) == m4


def test_missing_file_rejected():
    with pytest.raises(InvalidConfig):
        load_model("/nonexistent/model.cfg")


def test_solve_document(m4, sol4):
    doc = solve_document(m4)
    assert doc["b_star"] == sol4.b_star
    assert doc["A_at_b"] == pytest.approx(0.6341, abs=5e-4)
    assert doc["scale"]["boundary_values"][1:] == pytest.approx([2.0, -8.0, 52.0], rel=1e-8)
    assert doc["value_samples"][0]["V"] == pytest.approx(m4.S, rel=1e-12)
    assert check_document(doc)[1] == pytest.approx(sol4.b_star, abs=1e-10)


def test_check_catches_tampering(m4):
    doc = solve_document(m4)
    doc["threshold"]["b_star"] += 1e-6
    with pytest.raises(BracketFailure):
        check_document(doc)


def test_golden_solution(m4):
    golden = json.loads(GOLDEN.read_text())
    fresh = json.loads(json.dumps(solve_document(m4)))
    assert fresh["b_star"] == pytest.approx(golden["b_star"], rel=1e-12)
    assert fresh["scale"]["roots_Y"] == pytest.approx(golden["scale"]["roots_Y"], rel=1e-12)
    assert fresh["assumptions"]["s_window_upper"] == pytest.approx(golden["assumptions"]["s_window_upper"], rel=1e-12)
    for a, b in zip(fresh["value_samples"], golden["value_samples"]):
        assert a["V"] == pytest.approx(b["V"], rel=1e-10)


def test_solve_and_check_commands(capsys, tmp_path, sol4):
    out = tmp_path / "sol.json"
    code, _, _ = run_cli(capsys, "solve", "--config", str(CFG), "--out", str(out))
    assert code == 0
    assert json.loads(out.read_text())["b_star"] == sol4.b_star
    code, _, err = run_cli(capsys, "check", "--config", str(out))
    assert code == 0 and "ok" in err


def test_scan_command(capsys, sp4, m4):
    code, out, _ = run_cli(capsys, "scan", "--config", str(CFG), "--b-max", "0.3", "--steps", "301")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert tuple(rows[0]) == SCAN_HEADER
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    assert data.shape == (301, 5)
    b, A, th = data[:, 0], data[:, 1], data[:, 2]
    # where A_S peaks it meets theta_S
    k = int(np.argmax(A))
    assert b[k] == pytest.approx(0.0192850, abs=1e-3)
    assert A[k] == pytest.approx(th[k], abs=2e-3)


def test_verify_command(capsys, tmp_path):
    out = tmp_path / "v.csv"
    code, _, err = run_cli(capsys, "verify", "--config", str(CFG), "--out", str(out))
    assert code == 0 and "PASS" in err
    rows = list(csv.reader(out.open()))
    assert tuple(rows[0]) == VERIFY_HEADER and len(rows) == 401


def test_verify_suboptimal_barrier_is_numerical_failure(capsys):
    code, _, err = run_cli(capsys, "verify", "--config", str(CFG), "--barrier", "0.5", "--out", "/dev/null")
    assert code == 2 and "FAIL" in err


def test_zero_volatility_is_input_error(capsys, tmp_path):
    p = write(tmp_path, CFG.read_text().replace("sigma = 1", "sigma = 0"))
    code, _, err = run_cli(capsys, "solve", "--config", p)
    assert code == 1 and "sigma" in err


def test_usage_error_exit_status(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate", "--config", str(CFG)])
    assert exc.value.code == 1


def test_simulate_command(capsys, tmp_path):
    paths = tmp_path / "paths.csv"
    code, out, _ = run_cli(
        capsys, "simulate", "--config", str(CFG), "--paths", "2000", "--x0", "1", "--path-csv", str(paths)
    )
    assert code == 0
    doc = json.loads(out)
    o = doc["outcome"]
    assert o["n_paths"] == 2000
    assert abs(o["mean_value"] - doc["analytic_value"]) < 4 * o["std_err"]
    rows = list(csv.reader(paths.open()))
    assert rows[0] == ["path_id", "ruin_time", "class", "discounted_dividends"] and len(rows) == 2001


def test_simulate_negative_start_rejected(capsys):
    code, _, _ = run_cli(capsys, "simulate", "--config", str(CFG), "--paths", "10", "--x0", "-1")
    assert code == 1


def test_compare_command(capsys, sol4):
    code, out, _ = run_cli(capsys, "compare", "--config", str(CFG), "--paths", "1000", "--thresholds", "0,0.5")
    assert code == 0
    doc = json.loads(out)
    assert doc["b_star"] == sol4.b_star
    assert sorted(doc["ranking"]) == [0.0, 0.5]


def test_console_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "creepdiv", "solve", "--config", str(CFG)], capture_output=True, text=True
    )
    assert res.returncode == 0
    assert json.loads(res.stdout)["b_star"] == pytest.approx(0.0192850083, abs=1e-9)
