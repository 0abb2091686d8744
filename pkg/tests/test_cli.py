import json

import pytest

from dynweight.cli import main, run_seed
from dynweight.scenario import load_scenario
from dynweight.tracefile import dumps, loads, read_traces


def test_run_then_check(tmp_path, capsys):
    path = tmp_path / "ex1.jsonl"
    assert main(["run", "example1", "--trace", str(path)]) == 0
    assert main(["check", str(path), "--suite", "integrity"]) == 0
    out = capsys.readouterr().out
    assert "PASS integrity" in out


def test_check_writes_verdicts(tmp_path):
    trace, verdicts = tmp_path / "t.jsonl", tmp_path / "v.jsonl"
    assert main(["run", "example2", "--seeds", "1..3", "--trace", str(trace)]) == 0
    assert len(read_traces(trace)) == 3
    assert main(["check", str(trace), "--verdicts", str(verdicts)]) == 0
    recs = [json.loads(line) for line in verdicts.read_text().splitlines()]
    assert {r["seed"] for r in recs} == {1, 2, 3}
    assert all(r["ok"] for r in recs)
    # verdict lines in a trace file are skipped on reload
    combined = tmp_path / "c.jsonl"
    combined.write_text(trace.read_text() + verdicts.read_text())
    assert len(read_traces(combined)) == 3


def test_sweep_alg1(capsys):
    assert main(["sweep", "alg1-demo", "--seeds", "1..200"]) == 0
    out = capsys.readouterr().out
    assert "200 runs, 200 passed" in out
    assert "effective reassigns per run: 1\n" in out


def test_bad_config_exits_2(capsys):
    assert main(["run", "bad-config"]) == 2
    assert "availability" in capsys.readouterr().err


def test_invalid_scenario_file(tmp_path, capsys):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"name": "x", "mode": "rpwr", "n": 4, "f": 1,
                             "steps": [{"at": 0, "actor": "s1", "op": "transfer", "dest": "s1", "delta": "1/10"}]}))
    assert main(["run", str(p)]) == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_scenario(capsys):
    assert main(["run", "no-such-scenario"]) == 2


@pytest.mark.parametrize("text", ["not json\n", '{"kind": "Send", "t": 0}\n', "[1, 2]\n"])
def test_malformed_trace_exits_2(tmp_path, capsys, text):
    p = tmp_path / "bad.jsonl"
    p.write_text(text)
    assert main(["check", str(p)]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_trace_file(tmp_path):
    assert main(["check", str(tmp_path / "absent.jsonl")]) == 2


def test_failed_check_exits_1(tmp_path, capsys):
    tr = run_seed(load_scenario("example2"), 1)
    recs = tr.records
    resp = next(r for r in recs if r["kind"] == "Respond" and r["payload"]["op"] == "read_changes")
    resp["payload"]["result"] = []
    p = tmp_path / "forged.jsonl"
    p.write_text(dumps([tr]))
    assert main(["check", str(p), "--suite", "validity2"]) == 1
    assert "counterexample" in capsys.readouterr().out


def test_trace_round_trip():
    traces = [run_seed(load_scenario("dwas-basic"), s) for s in (1, 2)]
    assert loads(dumps(traces)) == traces


def test_figures(tmp_path):
    run_fig, sweep_fig = tmp_path / "w.png", tmp_path / "s.png"
    assert main(["run", "example2", "--figure", str(run_fig)]) == 0
    assert main(["sweep", "rpwr-random", "--seeds", "1..5", "--figure", str(sweep_fig)]) == 0
    assert run_fig.stat().st_size > 0 and sweep_fig.stat().st_size > 0


def test_examples(capsys):
    assert main(["examples", "--demo-seeds", "5"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 6


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "dynweight", "run", "example1"], capture_output=True, text=True)
    assert r.returncode == 0 and "example1" in r.stdout


def test_demo_sweep_figure(tmp_path):
    fig = tmp_path / "d.png"
    assert main(["sweep", "alg1-demo", "--seeds", "1..3", "--figure", str(fig)]) == 0
    assert fig.stat().st_size > 0
