import json

import pytest

from cardmed.cli import EXIT_INFEASIBLE, EXIT_OK, EXIT_PARSE, EXIT_RUN_FAILED, EXIT_UNCERTAIN, main

from conftest import FIXTURES

GOLDEN = FIXTURES / "golden"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize(
    "argv, golden, expected_code",
    [
        (["classify", "mixed.yaml"], "classify_mixed.txt", EXIT_OK),
        (["classify", "ws_9_11_to_6_8.yaml"], "classify_ws.txt", EXIT_OK),
        (["classify", "compatible.yaml"], "classify_compatible.txt", EXIT_OK),
        (["plan", "compatible.yaml"], "plan_compatible.txt", EXIT_OK),
        (["classify", "mixed.yaml", "--format", "json-lines"], "classify_mixed.jsonl", EXIT_OK),
        (["plan", "ws_9_11_to_6_8.yaml"], "plan_ws.txt", EXIT_OK),
        (["plan", "infeasible.yaml"], "plan_infeasible.txt", EXIT_INFEASIBLE),
        (["plan", "mixed.yaml", "--format", "json-lines"], "plan_mixed.jsonl", EXIT_UNCERTAIN),
        (["simulate", "editor_printer.yaml", "--seed", "42"], "simulate_editor_printer.txt", EXIT_OK),
        (
            ["simulate", "mixed.yaml", "--seed", "17", "--runs", "3", "--format", "json-lines"],
            "simulate_mixed.jsonl",
            EXIT_OK,
        ),
    ],
)
def test_golden_output(capsys, argv, golden, expected_code):
    argv = [argv[0], FIXTURES / argv[1], *argv[2:]]
    code, out, _ = run(capsys, *argv)
    assert code == expected_code
    assert out == (GOLDEN / golden).read_text()


@pytest.mark.parametrize(
    "fixture, golden, extra",
    [
        ("editor_printer.yaml", "editor_printer_seed42.trace.jsonl", ["--seed", "42"]),
        ("mixed.yaml", "mixed_seed17.trace.jsonl", ["--seed", "17", "--runs", "3"]),
    ],
)
def test_golden_traces(capsys, tmp_path, fixture, golden, extra):
    trace = tmp_path / "trace.jsonl"
    code, _, _ = run(capsys, "simulate", FIXTURES / fixture, *extra, "--trace", trace)
    assert code == EXIT_OK
    assert trace.read_bytes() == (GOLDEN / golden).read_bytes()
    for line in trace.read_text().splitlines():
        assert "run" in json.loads(line)


def test_json_lines_are_valid(capsys):
    _, out, _ = run(capsys, "plan", FIXTURES / "editor_printer.yaml", "--format", "json-lines")
    records = [json.loads(line) for line in out.splitlines()]
    assert records[-1] == {"kind": "summary", "total_invocations": 8, "feasible": True, "diagnosis": []}
    flow = records[2]
    assert (flow["grade"], flow["m"], flow["n"]) == ("Certain", 1, 7)


def test_parse_error_exit(capsys, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("version: cardmed/1\nservices: []\nflows: []\nextra: 1\n")
    code, _, err = run(capsys, "plan", bad)
    assert code == EXIT_PARSE
    assert "UnknownField" in err and "line 4:1" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "classify", tmp_path / "nope.yaml")
    assert code == EXIT_PARSE and "[Io]" in err


def test_failed_runs_exit_code(capsys, tmp_path):
    probable = tmp_path / "p.yaml"
    probable.write_text(
        "version: cardmed/1\n"
        "services:\n"
        "  - {id: S, in: {min: 1, max: 1}, out: {min: 1, max: 5}, inv_max: 1}\n"
        "  - {id: R, in: {min: 4, max: 4}, out: {min: 1, max: 1}, inv_max: 1}\n"
        "flows:\n"
        "  - {from: S, to: R, duplicates_tolerated: true, selection_allowed: false, ordering_required: true}\n"
    )
    assert run(capsys, "plan", probable)[0] == EXIT_UNCERTAIN
    code, out, _ = run(capsys, "simulate", probable, "--runs", "40")
    assert code == EXIT_RUN_FAILED
    assert "runs: 40" in out


def test_certain_fixture_never_fails(capsys):
    code, out, _ = run(capsys, "simulate", FIXTURES / "ws_9_11_to_6_8.yaml", "--runs", "1000")
    assert code == EXIT_OK
    assert out.startswith("runs: 1000  successes: 1000  success ratio: 1.0000")


def test_infeasible_simulation(capsys):
    code, out, _ = run(capsys, "simulate", FIXTURES / "infeasible.yaml", "--runs", "5")
    assert code == EXIT_INFEASIBLE and "0 runs" in out


def test_ceiling_flag_and_env(capsys, monkeypatch):
    editor_printer = FIXTURES / "editor_printer.yaml"
    assert run(capsys, "plan", editor_printer, "--ceiling", "3")[0] == EXIT_INFEASIBLE
    monkeypatch.setenv("CARDMED_CEILING", "3")
    assert run(capsys, "plan", editor_printer)[0] == EXIT_INFEASIBLE
    assert run(capsys, "plan", editor_printer, "--ceiling", "7")[0] == EXIT_OK


def test_no_optimize_flag(capsys):
    code, out, _ = run(capsys, "plan", FIXTURES / "ws_9_11_to_6_8.yaml", "--no-optimize")
    assert code == EXIT_OK and "(m=2, n=3)" in out


def test_figures_written(capsys, tmp_path):
    png = tmp_path / "c.png"
    run(capsys, "classify", FIXTURES / "mixed.yaml", "--figure", png)
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    hist = tmp_path / "sub" / "h.png"
    run(capsys, "simulate", FIXTURES / "mixed.yaml", "--runs", "10", "--figure", hist)
    assert hist.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
