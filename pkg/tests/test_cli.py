import csv
import io
import json
import subprocess
import sys

import pytest

from selectsets.cli import main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text):
    return list(csv.reader(io.StringIO(text)))


def test_oracle_median(capsys):
    code, out, _ = run(["oracle", "--rule", "percentile:1/2", "--n", "3"], capsys)
    assert code == 0
    rows = rows_of(out)
    assert rows[0] == ["j", "P_L_j"]
    assert [float(r[1]) for r in rows[1:4]] == pytest.approx([1 / 3, 1 / 2, 1 / 6], abs=1e-16)
    scalars = {r[0]: float(r[1]) for r in rows[4:]}
    assert scalars["E_Q"] == 3.0
    assert scalars["conditional_failures"] == 0 and scalars["a_star_failures"] == 0


def test_oracle_capacity_is_input_error(capsys):
    code, _, err = run(["oracle", "--rule", "krecord:2", "--n", "10"], capsys)
    assert code == 1 and "--n" in err


def test_validate_failure_exit_2(capsys):
    code, out, err = run(["validate", "--rule", "table:1,1,3", "--amax", "10"], capsys)
    assert code == 2
    assert rows_of(out) == [["axiom", "a"], ["subdiagonal", "1"]]
    assert "subdiagonal" in err


def test_validate_ok(capsys):
    code, out, _ = run(["validate", "--rule", "percentile:2/5", "--amax", "1000"], capsys)
    assert code == 0 and rows_of(out) == [["axiom", "a"]]


@pytest.mark.parametrize("argv, flag", [
    (["validate", "--rule", "percentile:0.5"], "--rule"),
    (["simulate", "--rule", "percentile:1/2", "--n", "100", "--bogus", "1"], "--bogus"),
    (["simulate", "--rule", "percentile:1/2", "--n", "0"], "--n"),
    (["simulate", "--rule", "percentile:1/2", "--n", "ten"], "--n"),
    (["inverse", "--rule", "krecord:1", "--m", "5", "--cap", "3"], "--cap"),
    (["exact", "--rule", "krecord:2", "--n", "20"], "--rule"),
    (["frobnicate"], "frobnicate"),
])
def test_input_errors(argv, flag, capsys):
    code, _, err = run(argv, capsys)
    assert code == 1
    assert flag in err


def test_simulate_schema_and_round_trip(tmp_path, capsys):
    out = tmp_path / "s.csv"
    hist = tmp_path / "h.csv"
    code, _, _ = run(["simulate", "--rule", "percentile:1/2", "--n", "512", "--reps", "50", "--seed", "7",
                      "--out", str(out), "--hist", str(hist), "--workers", "1"], capsys)
    assert code == 0
    rows = rows_of(out.read_text())
    assert rows[0] == ["n", "stat", "mean", "se", "reps", "seed"]
    assert all(len(r) == 6 for r in rows)
    assert {r[1] for r in rows[1:]} == {"L_norm", "A_norm", "V", "V_log"}
    assert rows[-1][0] == "512" and rows[-1][4] == "50" and rows[-1][5] == "7"
    mass = [float(r[2]) for r in rows_of(hist.read_text())[1:]]
    assert sum(mass) == pytest.approx(1.0)


def test_simulate_json_mirrors_csv(capsys):
    argv = ["simulate", "--rule", "krecord:2", "--n", "64", "--reps", "10", "--workers", "1"]
    _, c, _ = run(argv, capsys)
    _, j, _ = run(argv + ["--format", "json"], capsys)
    rows = rows_of(c)
    data = json.loads(j)
    assert len(data) == len(rows) - 1
    assert list(data[0]) == rows[0]
    assert [str(v) for v in data[3].values()] == rows[4]


def test_simulate_seed_determines_bytes(capsys):
    argv = ["simulate", "--rule", "percentile:3/4", "--n", "1000", "--reps", "40", "--seed", "11"]
    _, a, _ = run(argv + ["--workers", "1"], capsys)
    _, b, _ = run(argv + ["--workers", "2"], capsys)
    _, c, _ = run(argv[:-1] + ["12", "--workers", "1"], capsys)
    assert a == b and a != c


def test_workers_env_variable(monkeypatch, capsys):
    argv = ["simulate", "--rule", "percentile:1/2", "--n", "200", "--reps", "20", "--seed", "3"]
    monkeypatch.setenv("SELECTSETS_WORKERS", "1")
    _, a, _ = run(argv, capsys)
    monkeypatch.setenv("SELECTSETS_WORKERS", "2")
    _, b, _ = run(argv, capsys)
    assert a == b


def test_exact_sweep(capsys):
    code, out, err = run(["exact", "--rule", "percentile:1/2", "--n", "200"], capsys)
    assert code == 0
    rows = rows_of(out)
    assert rows[0] == ["n", "M_n", "T_n", "d_n", "U_n", "e_n", "EQ_n", "ineq41_ok"]
    assert len(rows) == 201 and all(len(r) == 8 for r in rows)
    assert float(rows[3][1]) == pytest.approx(11 / 6, rel=1e-15)
    assert "True" in err


def test_inverse_seeded(capsys):
    argv = ["inverse", "--rule", "percentile:1/2", "--m", "2", "--cap", "1000", "--reps", "500", "--seed", "4"]
    code, a, _ = run(argv, capsys)
    _, b, _ = run(argv, capsys)
    assert code == 0 and a == b
    rows = rows_of(a)
    assert rows[0] == ["n", "stat", "mean", "se", "reps", "seed"]
    assert [r[1] for r in rows[1:4]] == ["survival", "survival", "censor_rate"]


def test_krecord(capsys):
    code, out, _ = run(["krecord", "--k", "1", "--grid", "10,100", "--reps", "50", "--workers", "1"], capsys)
    rows = rows_of(out)
    assert code == 0
    assert [r[1] for r in rows[1:]] == ["L_log", "Q_norm", "L", "H_n"] * 2


def test_limit_table_small(capsys):
    code, out, _ = run(["table1", "--n", "100", "--reps", "10", "--workers", "1"], capsys)
    rows = rows_of(out)
    assert code == 0
    assert rows[0] == ["p", "stat", "mean", "se", "reference", "tolerance", "ok"]
    assert len(rows) == 21 and rows[1][0] == "1/10" and rows[-1][0] == "1/1"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "selectsets", "oracle", "--rule", "krecord:1", "--n", "2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1:3] == ["1,0.5", "2,0.5"]


def test_env_overrides_workers_flag(monkeypatch):
    from selectsets import cli
    monkeypatch.setenv("SELECTSETS_WORKERS", "2")
    args = cli.build_parser().parse_args(["simulate", "--rule", "krecord:1", "--n", "10", "--workers", "5"])
    assert cli._workers(args) == 2
    monkeypatch.delenv("SELECTSETS_WORKERS")
    assert cli._workers(args) == 5
