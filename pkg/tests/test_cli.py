import csv
import io
import json

import pytest

from ilpminer import cli, loglib
from ilpminer.discovery import prepare
from ilpminer.experiments import SweepSpec, run_sweep
from ilpminer.loglib import EventLog


@pytest.fixture
def seq_file(tmp_path, seq_log):
    path = tmp_path / "seq.json"
    path.write_text(loglib.to_json(seq_log))
    return path


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_discover_golden_chain(tmp_path, seq_file, capsys):
    out = tmp_path / "out"
    code, stdout, _ = run(capsys, "discover", seq_file, "-o", out)
    assert code == 0
    g = json.loads((out / "graph.json").read_text())
    assert g == {"tasks": ["s", "a", "e"], "arcs": [[0, 1], [1, 2]], "start": 0, "end": 2}
    report = json.loads((out / "report.json").read_text())
    assert report["quality"]["fscore"] == 1 and report["paths_ok"]
    assert (out / "graph.dot").read_text().count("->") == 2


def test_discover_lp_only(tmp_path, seq_file, capsys):
    lp = tmp_path / "m.lp"
    code, _, _ = run(capsys, "discover", seq_file, "-o", tmp_path / "o", "--export-lp", lp, "--lp-only")
    assert code == 0 and lp.read_text().startswith("\\")
    assert not (tmp_path / "o" / "graph.json").exists()


def test_discover_infeasible_exit_1_and_no_artifacts(tmp_path, seq_file, capsys):
    out = tmp_path / "out"
    code, _, err = run(capsys, "discover", seq_file, "-o", out, "--max-inputs", "0", "--export-lp", out / "m.lp")
    assert code == 1 and "infeasible" in err
    assert not any(out.glob("*")) if out.exists() else True


def test_unreadable_input_exit_2(tmp_path, capsys):
    code, _, err = run(capsys, "discover", tmp_path / "missing.xes")
    assert code == 2 and "missing.xes" in err


def test_parse_error_names_stage(tmp_path, capsys):
    bad = tmp_path / "bad.xes"
    bad.write_text("<log><trace>")
    code, _, err = run(capsys, "measures-dump", bad)
    assert code == 2 and "parse" in err


def test_config_file_and_override(tmp_path, seq_file, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# thresholds\nDepThresh = 0.95\nMaxInputs = 0\nrow = E(s,e) <= 0\n")
    code, _, _ = run(capsys, "discover", seq_file, "-o", tmp_path / "o", "--config", cfg)
    assert code == 1
    code, _, _ = run(capsys, "discover", seq_file, "-o", tmp_path / "o", "--config", cfg, "--max-inputs", "5")
    assert code == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["n_rows"] == 8.5 * 9 + 1.5 + 1 + 1  # tally for n=3 plus the extra row
    cfg.write_text("Bogus = 1\n")
    assert run(capsys, "discover", seq_file, "--config", cfg)[0] == 2
    assert run(capsys, "discover", seq_file, "--dep-thresh", "2")[0] == 2


def test_evaluate(tmp_path, seq_file, capsys):
    g = tmp_path / "g.json"
    g.write_text('{"tasks":["s","a","e"],"arcs":[[0,2],[1,1],[1,2]],"start":0,"end":2}')
    code, stdout, _ = run(capsys, "evaluate", seq_file, g, "--json")
    assert code == 0
    doc = json.loads(stdout)
    assert doc["fim"] == pytest.approx(1 / 3) and doc["paths_ok"] is False
    code, stdout, _ = run(capsys, "evaluate", seq_file, g, "--json", "--fim-strict-pseudocode")
    assert json.loads(stdout)["fim"] == 0
    g.write_text('{"tasks":["s"],"arcs":[[0,9]],"start":0,"end":0}')
    assert run(capsys, "evaluate", seq_file, g)[0] == 2


def test_dumps(seq_file, capsys):
    code, stdout, _ = run(capsys, "relations-dump", seq_file)
    doc = json.loads(stdout)
    assert doc["direct"][0][1] == 10 and doc["eventually_follows"][0][2] == 1
    code, stdout, _ = run(capsys, "measures-dump", seq_file)
    assert json.loads(stdout)["d"][0][1] == pytest.approx(10 / 11)


def test_export_lp_command(tmp_path, seq_file, capsys):
    a, b = tmp_path / "a.lp", tmp_path / "b.lp"
    run(capsys, "export-lp", seq_file, "--output", a)
    run(capsys, "export-lp", seq_file, "--output", b)
    assert a.read_bytes() == b.read_bytes()
    code, stdout, _ = run(capsys, "export-lp", seq_file, "--format-out", "json")
    assert len(json.loads(stdout)["variables"]) == 6 * 9 + 9


def test_synth_command(tmp_path, capsys):
    a, b, x = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "a.xes"
    args = ["--n-activities", "5", "--traces", "30", "--noise", "0.1", "--seed", "9"]
    assert run(capsys, "synth", "-o", a, "--xes", x, *args)[0] == 0
    assert run(capsys, "synth", "-o", b, *args)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert loglib.parse_xes(x.read_bytes()).multiset() == loglib.from_json(a.read_text()).multiset()
    code, _, _ = run(capsys, "synth", "-o", a, "--tree", '["seq","s","a","e"]', "--traces", "20")
    assert code == 0 and len(loglib.from_json(a.read_text()).traces) == 1
    assert run(capsys, "synth", "-o", a, "--n-activities", "1")[0] == 2


def test_sweep_monotone_and_failures_marked(tmp_path, capsys):
    lg = loglib.parse_xes(loglib.to_xes(EventLog.from_sequences(
        [list("sabcde"), list("sacbde"), list("sabdce"), list("sadbce")] * 5)))
    path = tmp_path / "l.xes"
    path.write_text(loglib.to_xes(lg))
    code, stdout, _ = run(capsys, "sweep", path, "--csv", tmp_path / "s.csv", "--json", tmp_path / "s.json")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(stdout)))
    assert [r["config"] for r in rows] == [f"C{k}" for k in range(1, 12)]
    ans = [int(r["an"]) for r in rows if r["status"] == "optimal"]
    assert ans == sorted(ans, reverse=True)
    assert all(r["paths_ok"] == "True" for r in rows if r["status"] == "optimal")
    assert len(json.loads((tmp_path / "s.json").read_text())) == 11

    code, stdout, _ = run(capsys, "sweep", path, "--parameter", "max_inputs", "--values", "0,1000")
    rows = list(csv.DictReader(io.StringIO(stdout)))
    assert [r["status"] for r in rows] == ["infeasible", "optimal"]
    assert run(capsys, "sweep", path, "--parameter", "nonsense")[0] == 2


def test_single_value_sweep_matches_discover(tmp_path, seq_file, capsys):
    run(capsys, "discover", seq_file, "-o", tmp_path / "o")
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    p = prepare(loglib.from_json(seq_file.read_text()))
    (row,) = run_sweep(p, SweepSpec("max_arcs_ratio", (2.0,)))
    assert row.an == report["quality"]["an"] and row.fscore == report["quality"]["fscore"]


def test_compare_deterministic_and_loop_fixture(tmp_path, loop_failure_log, capsys):
    path = tmp_path / "loop.json"
    path.write_text(loglib.to_json(loop_failure_log))
    j1, j2 = tmp_path / "1.json", tmp_path / "2.json"
    code, stdout, _ = run(capsys, "compare", path, "--json", j1)
    assert code == 0
    run(capsys, "compare", path, "--json", j2)
    assert j1.read_bytes() == j2.read_bytes()
    assert stdout.splitlines()[0] == "method,measure,floor,config,an,fim,prm,fscore"
    rates = json.loads(j1.read_text())["path_failure_rate"]
    assert rates["baseline"] > 0 and rates["ilp"] == 0
    assert "baseline,path_failure_pct,,,,,,100.0" in stdout
