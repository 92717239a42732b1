import json
import subprocess
import sys

import pytest

from corrovv import data_path
from corrovv.cli import main

D = data_path()


def test_simulate_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (a, b):
        assert main(["simulate", "--scenario", str(D / "fig2.scn"), "--controller", str(D / "stop_rule.ta"),
                     "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_flag_overrides(tmp_path):
    out = tmp_path / "t.jsonl"
    main(["simulate", "--scenario", str(D / "fig2.scn"), "--controller", str(D / "stop_rule.ta"), "--out", str(out),
          "--duration", "2", "--dt", "0.05", "--seed", "7"])
    lines = out.read_text().splitlines()
    header = json.loads(lines[0])
    assert (header["dt"], header["duration"], header["seed"]) == (0.05, 2.0, 7)
    assert len(lines) == 1 + 41


def test_check_exit_codes(tmp_path, capsys):
    good, bad = tmp_path / "g.jsonl", tmp_path / "b.jsonl"
    main(["simulate", "--scenario", str(D / "fig2.scn"), "--controller", str(D / "stop_rule.ta"), "--out", str(good)])
    main(["simulate", "--scenario", str(D / "fig2.scn"), "--controller", str(D / "proceed_regardless.ta"), "--out", str(bad)])
    capsys.readouterr()
    assert main(["check", "--trace", str(good), "--assertions", str(D / "ukhc_rule_170.assert")]) == 0
    rep = tmp_path / "r.json"
    assert main(["check", "--trace", str(bad), "--assertions", str(D / "ukhc_rule_170.assert"),
                 "--format", "json", "--report", str(rep)]) == 1
    d = json.loads(rep.read_text())
    assert d["summary"]["fail"] >= 1


def test_verify(capsys):
    assert main(["verify", "--controller", str(D / "stop_rule.ta"), "--property", str(D / "stop_rule.prop")]) == 0
    assert "Safe" in capsys.readouterr().out
    assert main(["verify", "--controller", str(D / "stop_rule_faulty.ta"), "--property", str(D / "stop_rule.prop"),
                 "--json"]) == 1
    assert json.loads(capsys.readouterr().out)["verdict"] == "Unsafe"


def corroborate(out, controller="stop_rule.ta", scenario="fig2.scn", extra=()):
    return main(["corroborate", "--scenario", str(D / scenario), "--controller", str(D / controller),
                 "--property", str(D / "stop_rule.prop"), "--binding", str(D / "stop_rule.bind"),
                 "--out", str(out), *extra])


def test_corroborate_deterministic(tmp_path):
    assert corroborate(tmp_path / "a") == 0
    assert corroborate(tmp_path / "b") == 0
    ra = json.loads((tmp_path / "a" / "report.json").read_text())
    rb = json.loads((tmp_path / "b" / "report.json").read_text())
    assert ra["status"] == rb["status"] == "corroborated"
    assert [t["verdict"] for t in ra["trials"]] == [t["verdict"] for t in rb["trials"]]
    assert ra["run_id"] == rb["run_id"]
    for t in ra["trials"]:
        assert (tmp_path / "a" / t["trace"]).read_bytes() == (tmp_path / "b" / t["trace"]).read_bytes()


def test_corroborate_refuted_with_conflict_binding(tmp_path, capsys):
    assert corroborate(tmp_path / "f", "stop_rule_faulty.ta") == 1
    assert corroborate(tmp_path / "c", scenario="crossing_conflict.scn",
                       extra=["--binding", str(D / "keep_clear.bind"), "--workers", "2"]) == 0
    d = json.loads((tmp_path / "c" / "report.json").read_text())
    assert d["conflicts"] and d["conflicts"][0]["properties"] == ["stop_before_entry", "keep_clear"]


def test_corroborate_sweep(tmp_path):
    assert corroborate(tmp_path / "s", extra=["--strategy", "sweep", "--trials", "3"]) == 0
    d = json.loads((tmp_path / "s" / "report.json").read_text())
    assert [t["parameters"]["gap_threshold"] for t in d["trials"]] == [4.5, 8.25, 12.0]


@pytest.mark.parametrize("argv, msg", [
    (["simulate", "--scenario", "nope.scn", "--controller", "x", "--out", "y"], "nope.scn"),
    (["verify", "--controller", str(D / "fig2.scn"), "--property", str(D / "stop_rule.prop")], "no automaton"),
    (["check", "--trace", str(D / "fig2.scn"), "--assertions", str(D / "ukhc_rule_170.assert")], "error"),
])
def test_errors_exit_2(argv, msg, capsys):
    assert main(argv) == 2
    assert msg in capsys.readouterr().err


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "corrovv", "verify", "--controller", str(D / "stop_rule.ta"),
                        "--property", str(D / "stop_rule.prop")], capture_output=True, text=True)
    assert r.returncode == 0 and "Safe" in r.stdout
