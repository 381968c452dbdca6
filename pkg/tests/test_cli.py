"""CLI front end: parsing, exit codes, file workflows, determinism."""

import json
import subprocess
import sys

import numpy as np
import pytest

from l1sq.cli import _parse_values, main
from l1sq.csvio import read_csv
from l1sq.errors import ConfigInvalid
from l1sq.matio import load_dmat, save_dmat


# ---------------------------------------------------------------------------
# value-list parsing


def test_parse_comma_lists():
    assert _parse_values("10,30,50", int) == [10, 30, 50]
    assert _parse_values("0.3,0.5", float) == [0.3, 0.5]
    assert _parse_values("64", int) == [64]


def test_parse_geometric_int_range():
    assert _parse_values("256..2048", int) == [256, 512, 1024, 2048]
    assert _parse_values("100..500", int) == [100, 200, 400]


def test_parse_arithmetic_float_range():
    vals = _parse_values("0.05..0.30", float)
    assert vals == pytest.approx([0.05, 0.10, 0.15, 0.20, 0.25, 0.30])


def test_parse_rejects_bad_ranges():
    with pytest.raises(ConfigInvalid):
        _parse_values("100..50", int)
    with pytest.raises(ConfigInvalid):
        _parse_values("0..64", int)


# ---------------------------------------------------------------------------
# exit codes


def test_usage_error_exit_code(capsys):
    assert main(["no-such-command"]) == 1
    assert "usage" in capsys.readouterr().err


def test_missing_query_source_is_usage_error(tmp_path, capsys):
    db = tmp_path / "db"
    assert main(["gen-db", "--n", "3", "--D", "30", "--r", "2",
                 "--out", str(db)]) == 0
    ix = tmp_path / "ix.l1ix"
    assert main(["build-index", "--db", str(db), "--k", "3", "--d", "5",
                 "--out", str(ix)]) == 0
    capsys.readouterr()
    assert main(["query", "--index", str(ix)]) == 1
    assert "--query FILE or --theta" in capsys.readouterr().err


def test_runtime_error_exit_code(capsys):
    assert main(["query", "--index", "/nonexistent/ix.l1ix", "--theta", "0.1"]) == 2
    assert "No such file" in capsys.readouterr().err


def test_validate_like_failure_exit_code(tmp_path, capsys):
    # arctan-check is the cheapest command with a data-driven failure path;
    # with a sane k it must succeed
    assert main(["simulate", "arctan-check", "--k", "100"]) == 0


# ---------------------------------------------------------------------------
# file workflows


def test_gen_db_writes_manifest_and_bases(tmp_path, capsys):
    db = tmp_path / "db"
    assert main(["gen-db", "--n", "4", "--D", "50", "--r", "3",
                 "--seed", "11", "--out", str(db)]) == 0
    manifest = json.loads((db / "database.json").read_text())
    assert manifest["n"] == 4 and manifest["D"] == 50 and manifest["r"] == 3
    assert manifest["seed"] == 11
    for label in manifest["labels"]:
        basis = load_dmat(db / f"{label}.dmat")
        assert basis.shape == (50, 3)
        gram = basis.T @ basis
        assert np.abs(gram - np.eye(3)).max() < 1e-10


def test_gen_db_csv_format_round_trips(tmp_path, capsys):
    db = tmp_path / "db"
    assert main(["gen-db", "--n", "2", "--D", "20", "--r", "2",
                 "--format", "csv", "--out", str(db)]) == 0
    manifest = json.loads((db / "database.json").read_text())
    assert manifest["matrix_format"] == "csv"
    # exhaustive must load the csv bases transparently
    capsys.readouterr()
    assert main(["exhaustive", "--db", str(db), "--theta", "0.1",
                 "--seed", "3"]) == 0
    assert "winner" in capsys.readouterr().out


def test_end_to_end_query_is_deterministic(tmp_path, capsys):
    db = tmp_path / "db"
    ix = tmp_path / "ix.l1ix"
    main(["gen-db", "--n", "5", "--D", "60", "--r", "2", "--seed", "7",
          "--out", str(db)])
    main(["build-index", "--db", str(db), "--k", "6", "--d", "8",
          "--seed", "7", "--out", str(ix)])
    capsys.readouterr()

    assert main(["query", "--index", str(ix), "--theta", "0.05",
                 "--Nrep", "3", "--Nback", "2", "--seed", "5"]) == 0
    first = capsys.readouterr().out
    assert main(["query", "--index", str(ix), "--theta", "0.05",
                 "--Nrep", "3", "--Nback", "2", "--seed", "5"]) == 0
    second = capsys.readouterr().out
    assert first == second
    assert first.startswith("winner ")


def test_query_from_file_and_csv_out(tmp_path, capsys):
    db = tmp_path / "db"
    ix = tmp_path / "ix.l1ix"
    main(["gen-db", "--n", "3", "--D", "40", "--r", "2", "--seed", "9",
          "--out", str(db)])
    main(["build-index", "--db", str(db), "--k", "4", "--d", "6",
          "--seed", "9", "--out", str(ix)])
    qfile = tmp_path / "q.dmat"
    save_dmat(qfile, np.random.default_rng(1).standard_normal((40, 1)))
    out_csv = tmp_path / "result.csv"
    capsys.readouterr()
    assert main(["query", "--index", str(ix), "--query", str(qfile),
                 "--Nrep", "2", "--Nback", "3", "--out", str(out_csv)]) == 0
    header, rows = read_csv(out_csv)
    assert header == ["label", "refined_distance"]
    assert len(rows) == 3
    dists = [float(r[1]) for r in rows]
    assert dists == sorted(dists)


def test_exhaustive_matches_query_on_easy_instance(tmp_path, capsys):
    db = tmp_path / "db"
    ix = tmp_path / "ix.l1ix"
    main(["gen-db", "--n", "4", "--D", "50", "--r", "2", "--seed", "21",
          "--out", str(db)])
    main(["build-index", "--db", str(db), "--k", "5", "--d", "10",
          "--seed", "21", "--out", str(ix)])
    capsys.readouterr()
    assert main(["query", "--index", str(ix), "--theta", "0.02",
                 "--Nrep", "3", "--Nback", "4", "--seed", "3"]) == 0
    q_out = capsys.readouterr().out
    assert main(["exhaustive", "--db", str(db), "--theta", "0.02",
                 "--seed", "3"]) == 0
    e_out = capsys.readouterr().out
    q_winner = q_out.splitlines()[0]
    e_winner = e_out.splitlines()[0]
    assert q_winner == e_winner


def test_simulate_expansion_csv(tmp_path, capsys):
    out = tmp_path / "exp.csv"
    assert main(["simulate", "expansion", "--d", "8,16", "--trials", "200",
                 "--seed", "1", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header[0] == "d"
    assert [r[0] for r in rows] == ["8", "16"]
    for row in rows:
        p_hat = float(row[2])
        assert 0.0 <= p_hat <= 1.0


def test_bench_regression_csv(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    assert main(["bench", "regression", "--D", "64,128", "--r", "2",
                 "--repetitions", "5", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert "wall_time_s" in header
    assert len(rows) == 2


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "l1sq.cli", "simulate", "arctan-check", "--k", "50"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0
    assert "true" in proc.stdout
