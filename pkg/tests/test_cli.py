import csv
import io
import json
import subprocess
import sys

import pytest

from drawdown_lab.cli import parse_values, run


def _run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_law_row():
    code, out, _ = _run(["law", "dd-before-du", "--model", "bm", "--mu", "0", "--sigma", "1",
                         "--q", "0.5", "--a", "1", "--b", "1", "--format", "json"])
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == "drawdown-lab/1"
    row = doc["rows"][0]
    assert f"{row['value']:.6g}" == "0.393224"
    assert {"q", "a", "b", "value", "error", "method", "status", "elapsed_s"} <= set(row)
    assert row["method"] == "quadrature"


def test_validation_exit_code():
    code, _, err = _run(["law", "dd-before-du", "--a", "-1", "--q", "0.5", "--b", "1"])
    assert code == 2
    assert "a must be positive" in err


def test_bad_flag_is_invalid():
    assert _run(["law", "dd-before-du", "--nope", "1"])[0] == 2
    assert _run(["law", "drawdown-transform", "--q", "abc", "--a", "1"])[0] == 2


def test_grid_cap():
    code, _, err = _run(["law", "drawdown-transform", "--a", "1", "--q", "0:1:11", "--max-evals", "10"])
    assert code == 2 and "cap" in err


def test_numerical_failure_exit_code():
    # most paths are still running at the horizon, which the simulator refuses to censor
    code, out, err = _run(["simulate", "drawdown-transform", "--q", "0", "--a", "3", "--horizon", "0.5",
                           "--n", "2000", "--dt", "0.01", "--format", "csv"])
    assert code == 3
    assert "HorizonTooShort" in out and "HorizonTooShort" in err


def test_verify_identity_in_law():
    code, out, _ = _run(["verify", "identity-in-law", "--model", "bm", "--q", "0.1,0.5,1,2,5",
                         "--a", "1", "--y", "0.5", "--format", "json"])
    assert code == 0
    rows = json.loads(out)["rows"]
    assert len(rows) == 5 and all(r["pass"] for r in rows)


def test_verify_failure_exit_code():
    # an impossibly tight tolerance must fail the check
    code, _, _ = _run(["verify", "identity-in-law", "--q", "0.5", "--a", "1", "--y", "0.5", "--tol", "1e-30"])
    assert code == 1


def test_csv_round_trip(tmp_path):
    path = tmp_path / "out.csv"
    code, _, _ = _run(["law", "exit-transform", "--q", "0.1,0.5,2", "--x", "0.5", "--y", "1", "--z", "0",
                       "--format", "csv", "--output", str(path)])
    assert code == 0
    from drawdown_lab.closedform import BrownianParams, bm_provider
    from drawdown_lab.passage import exit_transform
    m = bm_provider(BrownianParams(0, 1))
    rows = list(csv.DictReader(path.open()))
    for r in rows:
        assert float(r["value"]) == exit_transform(m, float(r["q"]), 0.5, 1.0, 0.0).value


def test_custom_model():
    code, out, _ = _run(["law", "drawdown-transform", "--model", "custom", "--drift", "0", "--diffusion", "1",
                         "--q", "0.5", "--a", "1", "--format", "json"])
    assert code == 0
    import math
    assert json.loads(out)["rows"][0]["value"] == pytest.approx(1 / math.cosh(1), rel=1e-6)


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"mu": 1.0, "q": "1.5", "a": 1}))
    code, out, _ = _run(["law", "drawdown-transform", "--config", str(cfg), "--format", "json"])
    assert code == 0
    import math
    v = json.loads(out)["rows"][0]["value"]
    assert v == pytest.approx(2 * math.exp(-1) / (2 * math.cosh(2) - math.sinh(2)), rel=1e-8)
    code, out, _ = _run(["law", "drawdown-transform", "--config", str(cfg), "--mu", "0", "--q", "0.5",
                         "--format", "json"])
    assert json.loads(out)["rows"][0]["value"] == pytest.approx(1 / math.cosh(1), rel=1e-8)


def test_simulate_and_verify_mc_are_deterministic():
    argv = ["verify", "mc", "--law", "drawdown-transform", "--q", "0.5", "--a", "1", "--n", "5000",
            "--seed", "42", "--bridge", "--format", "json"]
    docs = []
    for _ in range(2):
        code, out, _ = _run(argv)
        assert code == 0
        doc = json.loads(out)
        doc.pop("timestamp")
        for r in doc["rows"]:
            r.pop("elapsed_s")
            r.pop("mc_elapsed_s")
        docs.append(json.dumps(doc, sort_keys=True))
    assert docs[0] == docs[1]


def test_parse_values():
    assert parse_values("1") == [1.0]
    assert parse_values("0.1,0.5") == [0.1, 0.5]
    assert parse_values("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_values(None) is None


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "drawdown_lab", "law", "drawdown-transform", "--q", "0.5",
                          "--a", "1", "--format", "csv"], capture_output=True, text=True, timeout=120)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0].startswith("q,x,a,value")
