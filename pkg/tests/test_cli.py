import pytest

from htpaxos.cli import main
from htpaxos.suite import SuiteError, parse_suite, run_suite


def test_run_reference_writes_outputs(tmp_path, capsys):
    assert main(["run", "--builtin", "reference", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "safety: pass" in out and "delays: pass" in out
    assert (tmp_path / "trace.jsonl").exists()
    assert (tmp_path / "counters.csv").read_text().startswith("node,direction,lan,variant,messages,bytes")


def test_run_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--builtin", "failover", "--seed", "3", "--out", str(a)])
    main(["run", "--builtin", "failover", "--seed", "3", "--out", str(b)])
    assert (a / "trace.jsonl").read_bytes() == (b / "trace.jsonl").read_bytes()
    assert (a / "counters.csv").read_bytes() == (b / "counters.csv").read_bytes()


def test_check_reloads_trace(tmp_path, capsys):
    main(["run", "--builtin", "reference", "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["check", str(tmp_path / "trace.jsonl"), "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "check,status,witness" and lines[1] == "safety,pass,"


def test_check_missing_file_is_config_error(tmp_path, capsys):
    assert main(["check", str(tmp_path / "nope.jsonl")]) == 2
    assert "error:" in capsys.readouterr().err


def test_bad_config_exits_2(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("D: 1\n")
    assert main(["run", "--config", str(p)]) == 2
    p.write_text("colour: blue\n")
    assert main(["run", "--config", str(p)]) == 2


def test_failing_liveness_exits_1(tmp_path):
    p = tmp_path / "stuck.yaml"
    p.write_text("D: 3\nloss: 1.0\ngst: 100000\nhorizon: 300\n")
    assert main(["run", "--config", str(p)]) == 1


def test_figures(tmp_path, capsys):
    assert main(["figures", "--figure", "1", "--sweep", "100000"]) == 0
    assert capsys.readouterr().out.splitlines() == [
        "n,classical_leader,ring_leader,spaxos_leader,ht_disseminator",
        "100000,702000,202001,1002704,3103",
    ]
    assert main(["figures", "--out", str(tmp_path)]) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == [f"fig{i}.csv" for i in range(1, 8)]


def test_bundled_figure_suite(tmp_path):
    assert main(["suite", "paper-figures", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "fig7.csv").exists()
    assert (tmp_path / "paper-figures-report.csv").read_text().startswith("scenario,seed,check")


def test_empty_suite():
    suite = parse_suite("")
    result = run_suite(suite)
    assert result.ok and result.rows == []
    assert result.report_text() == "0/0 verdicts as expected\n"


def test_suite_errors_carry_line_numbers():
    text = "name: x\nscenarios:\n  - generator: nope\n    seed: 1\n"
    with pytest.raises(SuiteError, match="line 3: unknown generator"):
        parse_suite(text)
    with pytest.raises(SuiteError, match="line 5"):
        parse_suite("name: x\nscenarios:\n  - generator: reference\n    seed: 0\n  - generator: reference\n    colour: red\n")
    with pytest.raises(SuiteError, match="line 3: bad expectation"):
        parse_suite("scenarios:\n  - generator: reference\n    expect: {safety: maybe}\n")
    with pytest.raises(SuiteError, match=r"line \d+: "):
        parse_suite("scenarios: [unclosed\n")


def test_suite_file_with_inline_and_file_entries(tmp_path, capsys):
    (tmp_path / "ref.yaml").write_text("D: 3\nname: ref-file\n")
    spec = tmp_path / "suite.yaml"
    spec.write_text(
        "name: mixed\n"
        "scenarios:\n"
        "  - file: ref.yaml\n"
        "    seeds: [0, 2]\n"
        "    expect: {safety: pass, delays: pass}\n"
        "  - inline: {D: 5, loss: 0.2, gst: 50, name: lossy}\n"
        "    expect: {safety: pass, liveness: pass, delays: not-applicable}\n"
        "  - generator: violating\n"
        "    seed: 2\n"
        "    expect: {liveness: not-applicable}\n"
    )
    assert main(["suite", str(spec), "--format", "csv"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "scenario,seed,check,status,expected,ok,witness"
    assert len(rows) == 1 + 4 + 3 + 1
    assert all(",yes," in r for r in rows[1:])


def test_unexpected_verdict_exits_1(tmp_path):
    spec = tmp_path / "s.yaml"
    spec.write_text("scenarios:\n  - generator: violating\n    seed: 0\n    expect: {liveness: pass}\n")
    assert main(["suite", str(spec)]) == 1
