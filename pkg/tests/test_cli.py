import json

import pytest

from ma1pileup.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from ma1pileup.experiments import COLUMNS


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_fit_schema(capsys):
    code, out, _ = _run(capsys, "fit", "--method", "exact", "--n", "50", "--theta0", "1", "--seed", "7")
    assert code == EXIT_OK
    rec = json.loads(out)
    for key in ("theta_hat", "sigma_hat", "pileup", "objective"):
        assert key in rec
    assert rec["method"] == "exact" and rec["n"] == 50 and rec["sigma_hat"] > 0


def test_fit_window_miss_exits_2(capsys):
    # seed 7 gives beta_hat near 4 for the exact fit, outside a window of 1
    code, _, err = _run(capsys, "fit", "--method", "exact", "--n", "50", "--seed", "7", "--beta-max", "1")
    assert code == EXIT_NUMERIC
    assert "numerical failure" in err


def test_simulate_json_and_csv(capsys):
    code, out, _ = _run(capsys, "simulate", "--n", "5", "--theta0", "1/0.8", "--seed", "3")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert len(doc["x"]) == 5 and len(doc["z"]) == 6 and doc["theta0"] == 1.25
    code, out, _ = _run(capsys, "simulate", "--n", "5", "--seed", "3", "--format", "csv")
    assert out.splitlines()[0] == "t,x,z" and len(out.splitlines()) == 7


@pytest.mark.parametrize(
    "argv",
    [
        ["table1", "--bogus"],
        ["nonsense"],
        [],
        ["fit", "--method", "ols"],
        ["fit", "--n", "10,20"],
        ["table1", "--noise", "cauchy"],
        ["table1", "--reps", "0"],
        ["table3", "--mode", "local"],
        ["table1", "--workers", "0"],
    ],
)
def test_usage_errors_exit_1(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == EXIT_USAGE
    assert err


def test_table1_csv_deterministic(capsys):
    argv = ["table1", "--reps", "20", "--n", "20", "--seed", "42", "--format", "csv", "--asym-reps", "200", "--m", "200"]
    _, a, _ = _run(capsys, *argv)
    _, b, _ = _run(capsys, *argv)
    assert a == b
    lines = a.splitlines()
    assert lines[0].split(",") == list(COLUMNS)
    assert len(lines) == 1 + 4 + 4  # four families plus the asymptotic rows


def test_out_writes_csv_and_sidecar(tmp_path, capsys):
    out = tmp_path / "t2.csv"
    code, stdout, _ = _run(capsys, "table2", "--reps", "3", "--n", "20", "--asym-reps", "200", "--m", "200", "--out", str(out))
    assert code == EXIT_OK and stdout == ""
    assert out.read_text().startswith("table,")
    side = json.loads((tmp_path / "t2.csv.json").read_text())
    assert side["config"]["reps"] == 3 and side["config"]["asymptotic"]["m"] == 200
    assert "version" in side


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_list": [20], "reps": 2, "theta0_list": [1.0], "asymptotic": None}))
    code, out, _ = _run(capsys, "lad-compare", "--config", str(cfg), "--format", "json")
    assert code == EXIT_OK
    rows = json.loads(out)["rows"]
    assert [r["method"] for r in rows] == ["lad", "exact", "lad/exact"]
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    assert _run(capsys, "table1", "--config", str(bad))[0] == EXIT_USAGE
