import csv
import json
import os
import subprocess
import sys

import pytest

from lgbanon.cli import (
    EVAL_FIELDS,
    EXIT_INFEASIBLE,
    EXIT_INPUT,
    EXIT_OK,
    EXIT_VIOLATION,
    SWEEP_FIELDS,
    derive_seeds,
    main,
)
from lgbanon.pipeline import bucket_file, deserialize

from conftest import RELEASE_DIR, example_files

TABLE_ARGS = ["--data", example_files()[0], "--mask", example_files()[1], "--schema", example_files()[2]]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def snapshot(d):
    return {f: open(os.path.join(d, f), "rb").read() for f in sorted(os.listdir(d))}


@pytest.fixture
def release(tmp_path, capsys):
    out = tmp_path / "rel"
    code, stdout, _ = run(capsys, "anonymize", *TABLE_ARGS, "--k", 2, "--l", 2, "--out", out)
    assert code == EXIT_OK
    return out, stdout


def test_anonymize_summary(release):
    out, stdout = release
    assert "groups: 4" in stdout
    assert "buckets[disease]: 4" in stdout
    assert "C_DM: 16" in stdout
    assert "NCP:" in stdout
    assert {"published.csv", "params.json", bucket_file("age")} <= set(os.listdir(out))


def test_anonymize_is_byte_identical(tmp_path, capsys, release):
    out, _ = release
    again = tmp_path / "again"
    run(capsys, "anonymize", *TABLE_ARGS, "--k", 2, "--l", 2, "--out", again)
    assert snapshot(out) == snapshot(again)


def test_anonymize_infeasible_names_attribute(tmp_path, capsys):
    code, _, err = run(capsys, "anonymize", *TABLE_ARGS, "--k", 2, "--l", 5, "--out", tmp_path / "x")
    assert code == EXIT_INFEASIBLE
    assert "infeasible" in err and "'age'" in err


def test_anonymize_l_override(tmp_path, capsys):
    code, _, err = run(capsys, "anonymize", *TABLE_ARGS, "--k", 2, "--l", 5, "--l-attr", "age=2",
                       "--l-attr", "zip=2", "--l-attr", "disease=2", "--out", tmp_path / "x")
    assert code == EXIT_OK, err
    params = json.load(open(tmp_path / "x" / "params.json"))
    assert params["l"] == {"age": 2, "zip": 2, "disease": 2} and params["l-default"] == 5


def test_verify_pipeline_output_passes(capsys, release):
    out, _ = release
    code, stdout, _ = run(capsys, "verify", out, *TABLE_ARGS)
    assert code == EXIT_OK
    assert stdout.strip().endswith("PASS")
    report = json.loads(stdout.rsplit("PASS", 1)[0])
    assert report["sweep"]["max_identity"] == "1/2" and "per_tuple" not in report["sweep"]


def test_verify_with_knowledge(tmp_path, capsys):
    bk = tmp_path / "bk.json"
    bk.write_text(json.dumps({"gender": "M", "zip": 53710}))
    code, stdout, _ = run(capsys, "verify", RELEASE_DIR, "--bk", bk, "--full", "--out", tmp_path / "r.json")
    assert code == EXIT_OK
    report = json.load(open(tmp_path / "r.json"))
    assert report["knowledge"][0]["matches"] == [1004, 1008]


def test_verify_tampered_bucket_fails(tmp_path, capsys, release):
    out, _ = release
    path = out / bucket_file("disease")
    rows = path.read_text().splitlines()
    bid, _ = rows[1].split(",")
    first_value = rows[1].split(",")[1]
    rows = [r if not r.startswith(f"{bid},") or r == rows[1] else f"{bid},{first_value}" for r in rows]
    path.write_text("\n".join(rows) + "\n")
    code, stdout, _ = run(capsys, "verify", out)
    assert code == EXIT_VIOLATION
    assert stdout.strip().endswith("FAIL")
    assert f"(disease, B{bid})" in stdout


def test_verify_missing_file(tmp_path, capsys, release):
    out, _ = release
    os.remove(out / "published.csv")
    code, _, err = run(capsys, "verify", out)
    assert code == EXIT_INPUT and "published.csv" in err


@pytest.fixture
def synth_release(tmp_path, capsys):
    code, _, _ = run(capsys, "synth", "--rows", 1000, "--out", tmp_path / "syn")
    assert code == EXIT_OK
    args = []
    for flag, f in (("--data", "data.csv"), ("--mask", "mask.csv"), ("--schema", "schema.csv")):
        args += [flag, tmp_path / "syn" / f]
    code, _, _ = run(capsys, "anonymize", *args, "--k", 5, "--l", 3, "--l-attr", "sex=1",
                     "--out", tmp_path / "rel")
    assert code == EXIT_OK
    return tmp_path / "rel", args


def test_evaluate_long_form(tmp_path, capsys, synth_release):
    out, table_args = synth_release
    target = tmp_path / "m.csv"
    code, _, _ = run(capsys, "evaluate", out, *table_args, "--queries", 50, "--out", target)
    assert code == EXIT_OK
    rows = read_csv(target)
    assert list(rows[0]) == EVAL_FIELDS
    metrics = {r["metric"]: r["value"] for r in rows}
    assert set(metrics) == {"c_dm", "ncp", "mean_r_error", "n_answered", "n_flagged"}
    assert int(metrics["n_answered"]) + int(metrics["n_flagged"]) == 50
    assert float(metrics["mean_r_error"]) >= 0
    assert {(r["k"], r["l"], r["mode"]) for r in rows} == {("5", "3", "mdp")}
    code, stdout, _ = run(capsys, "evaluate", out, *table_args, "--queries", 50)
    assert stdout == target.read_text()


def test_evaluate_without_query_workload(capsys, release):
    out, _ = release
    code, stdout, err = run(capsys, "evaluate", out, *TABLE_ARGS, "--queries", 50)
    assert code == EXIT_OK
    assert "no query workload" in err
    metrics = {r["metric"]: r["value"] for r in csv.DictReader(stdout.splitlines())}
    assert metrics["c_dm"] == "16" and metrics["mean_r_error"] == ""


def test_evaluate_rejects_foreign_table(tmp_path, capsys):
    code, _, err = run(capsys, "synth", "--rows", 800, "--out", tmp_path / "syn")
    assert code == EXIT_OK
    syn = [tmp_path / "syn" / f for f in ("data.csv", "mask.csv", "schema.csv")]
    code, _, err = run(capsys, "evaluate", RELEASE_DIR, "--data", syn[0], "--mask", syn[1], "--schema", syn[2])
    assert code == EXIT_INPUT


def _sweep(capsys, out, *extra):
    return run(capsys, "sweep", "--rows", 800, "--queries", 20, "--out", out, *extra)


def test_sweep_grid_row_count_and_resume(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, _, err = _sweep(capsys, out, "--k", "5,8,10", "--l", "5,8,10,12,15,18,20", "--mode", "mdp,ncp")
    assert code == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 42
    assert list(rows[0]) == SWEEP_FIELDS
    assert "42 total, 0 skipped, 42 run" in err
    assert all(r["status"] == "ok" or r["status"].startswith("infeasible") for r in rows)
    before = out.read_bytes()
    code, _, err = _sweep(capsys, out, "--k", "5,8,10", "--l", "5,8,10,12,15,18,20", "--mode", "mdp,ncp")
    assert "42 skipped, 0 run" in err and out.read_bytes() == before


def test_sweep_partial_resume_matches_full_run(tmp_path, capsys):
    full, part = tmp_path / "full.csv", tmp_path / "part.csv"
    grid = ["--k", "4,6", "--l", "2,3", "--mode", "mdp,ncp", "--density", "0.1,0.3"]
    _sweep(capsys, full, *grid)
    _sweep(capsys, part, "--k", "4", "--l", "2,3", "--mode", "mdp,ncp", "--density", "0.1,0.3")
    code, _, err = _sweep(capsys, part, *grid)
    assert "8 skipped, 8 run" in err
    key = lambda r: (r["k"], r["l"], r["mode"], r["density"])
    assert sorted(read_csv(full), key=key) == sorted(read_csv(part), key=key)


def test_sweep_workers_match_serial(tmp_path, capsys, monkeypatch):
    grid = ["--k", "4,6", "--l", "2", "--mode", "mdp,ncp"]
    _sweep(capsys, tmp_path / "serial.csv", *grid)
    monkeypatch.setenv("LGB_WORKERS", "2")
    _sweep(capsys, tmp_path / "pool.csv", *grid)
    assert (tmp_path / "serial.csv").read_bytes() == (tmp_path / "pool.csv").read_bytes()


def test_sweep_empty_lists_give_empty_csv(tmp_path, capsys):
    out = tmp_path / "e.csv"
    code, _, err = _sweep(capsys, out, "--k", "", "--l", "5")
    assert code == EXIT_OK
    assert out.read_text() == ",".join(SWEEP_FIELDS) + "\n"


def test_sweep_reports_failed_cells(tmp_path, capsys):
    out = tmp_path / "f.csv"
    code, _, err = _sweep(capsys, out, "--k", "5", "--l", "400", "--mode", "mdp")
    assert code == EXIT_OK
    row = read_csv(out)[0]
    assert row["status"].startswith("infeasible") and row["c_dm"] == ""
    assert "1 failed" in err


def test_sweep_refuses_foreign_csv(tmp_path, capsys):
    out = tmp_path / "x.csv"
    out.write_text("a,b\n1,2\n")
    code, _, _ = _sweep(capsys, out, "--k", "5", "--l", "5")
    assert code == EXIT_INPUT


def test_synth_writes_loadable_table(tmp_path, capsys):
    code, stdout, _ = run(capsys, "synth", "--rows", 1000, "--seed", 3, "--out", tmp_path / "a")
    run(capsys, "synth", "--rows", 1000, "--seed", 3, "--out", tmp_path / "b")
    assert code == EXIT_OK and "1000 rows" in stdout
    assert snapshot(tmp_path / "a") == snapshot(tmp_path / "b")
    files = [tmp_path / "a" / f for f in ("data.csv", "mask.csv", "schema.csv")]
    code, _, _ = run(capsys, "anonymize", "--data", files[0], "--mask", files[1], "--schema", files[2],
                     "--k", 5, "--l", 3, "--l-attr", "sex=1", "--out", tmp_path / "rel")
    assert code == EXIT_OK
    assert deserialize(tmp_path / "rel").params["k"] == 5


@pytest.mark.parametrize("argv", [
    ["anonymize", *TABLE_ARGS, "--k", "0", "--l", "2", "--out", "x"],
    ["anonymize", *TABLE_ARGS, "--k", "2", "--l", "2", "--mode", "slice", "--out", "x"],
    ["anonymize", "--data", "d.csv", "--k", "2", "--l", "2", "--out", "x"],
    ["anonymize", *TABLE_ARGS, "--k", "2", "--l", "2", "--density", "2", "--out", "x"],
    ["anonymize", *TABLE_ARGS, "--k", "2", "--l", "2", "--l-attr", "age", "--out", "x"],
    ["sweep", "--mode", "mdp,bogus"],
    ["verify"],
    [],
])
def test_argument_errors_exit_3(argv, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as e:
        code = main(argv)
        raise SystemExit(code)
    assert e.value.code == EXIT_INPUT


def test_missing_input_file(tmp_path, capsys):
    code, _, err = run(capsys, "anonymize", "--data", tmp_path / "no.csv", "--mask", tmp_path / "m.csv",
                       "--schema", tmp_path / "s.csv", "--k", 2, "--l", 2, "--out", tmp_path / "x")
    assert code == EXIT_INPUT and "not found" in err


def test_seed_streams_are_distinct_and_stable():
    s = derive_seeds(0)
    assert set(s) == {"data", "mask", "queries"} and len(set(s.values())) == 3
    assert derive_seeds(0) == s and derive_seeds(1) != s
    assert derive_seeds(2**64 - 1)


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "lgbanon", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "lgbanon" in r.stdout


@pytest.mark.parametrize("mode", ["mdp", "ncp"])
def test_every_anonymize_output_verifies(tmp_path, capsys, mode):
    code, _, _ = run(capsys, "synth", "--rows", 800, "--out", tmp_path / "syn")
    args = []
    for flag, f in (("--data", "data.csv"), ("--mask", "mask.csv"), ("--schema", "schema.csv")):
        args += [flag, tmp_path / "syn" / f]
    for k in (3, 5):
        for l in (2, 4):
            out = tmp_path / f"r{k}{l}"
            code, _, err = run(capsys, "anonymize", *args, "--k", k, "--l", l, "--l-attr", "sex=1",
                               "--mode", mode, "--out", out)
            assert code == EXIT_OK, err
            code, stdout, _ = run(capsys, "verify", out, *args)
            assert code == EXIT_OK and stdout.strip().endswith("PASS")
