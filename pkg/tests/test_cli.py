import csv
import json

import pytest
from hypothesis import given, settings, strategies as st

from zetauniv.cli import main, output_dir
from zetauniv.config import SCHEMA, RunConfig, parse_config
from zetauniv.errors import ParseError, ValidationError
from zetauniv.output import fmt, to_json

SCAN2 = """\
[run]
command = scan-theorem2
[region]
shape = segment
n = 5
[target]
kind = zero
[scan]
delta = 0.05
epsilon = {eps}
T = 50
step = 0.05
[output]
records = {records}
"""


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- parsing --------------------------------------------------------------


def test_minimal_construct_config():
    cfg = parse_config("[run]\ncommand = construct\n")
    assert cfg.command == "construct"
    assert cfg.get("construct", "delta") == 0.1
    assert cfg.get("construct", "epsilon") == 0.7
    assert cfg.get("kernel", "A") == 1.0 and cfg.get("kernel", "B") == 2.0


def test_command_from_cli_fills_config():
    assert parse_config("[construct]\ndelta = 0.2\n", command="verify").command == "verify"
    with pytest.raises(ValidationError):
        parse_config("[run]\ncommand = construct\n", command="verify")


def test_negative_delta():
    with pytest.raises(ValidationError, match="delta must be positive") as ei:
        parse_config("[run]\ncommand = construct\n[construct]\ndelta = -0.1\n")
    assert ei.value.field == "construct.delta"


def test_unknown_key_has_line_number():
    text = "[run]\ncommand = construct\n\n[construct]\ndelta = 0.1\nepsilom = 0.7\n"
    with pytest.raises(ParseError) as ei:
        parse_config(text)
    assert ei.value.line == 6 and "epsilom" in str(ei.value)


def test_unknown_section():
    with pytest.raises(ParseError) as ei:
        parse_config("[run]\ncommand = construct\n[zeta]\nx = 1\n")
    assert ei.value.line == 3


def test_bad_value_and_missing_header():
    with pytest.raises(ParseError) as ei:
        parse_config("[run]\ncommand = construct\n[construct]\ndelta = small\n")
    assert ei.value.field == "construct.delta" and ei.value.line == 4
    with pytest.raises(ParseError):
        parse_config("delta = 0.1\n")


def test_missing_command():
    with pytest.raises(ValidationError, match="command"):
        parse_config("[construct]\ndelta = 0.1\n")


def test_extremal_step_checked_at_parse_time():
    text = "[run]\ncommand = scan-extremal\n[scan]\ndelta_window = 0.5\nstep = 0.1\n"
    with pytest.raises(ValidationError, match="delta_window/10"):
        parse_config(text)


def test_cross_field_rules():
    with pytest.raises(ValidationError):
        parse_config("[run]\ncommand = construct\n[kernel]\nA = 2\nB = 1\n")
    with pytest.raises(ValidationError):
        parse_config("[run]\ncommand = construct\n[region]\nshape = polygon\nvertices = 0, 1\n")


_floats = st.floats(1e-3, 1e3, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(delta=_floats, eps=_floats, C=st.complex_numbers(max_magnitude=1e3, allow_nan=False,
                                                        allow_infinity=False),
       n=st.integers(1, 200), rule=st.sampled_from(["apdef", "recursive", "both"]),
       pts=st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                    max_size=4))
def test_round_trip(delta, eps, C, n, rule, pts):
    cfg = RunConfig({"run": {"command": "construct"},
                     "construct": {"delta": delta, "epsilon": eps, "C": C, "rule": rule,
                                   "check_points": tuple(pts)},
                     "region": {"n": n}})
    again = parse_config(cfg.emit())
    assert again == cfg
    assert again.get("construct", "C") == complex(C)
    assert again.emit() == cfg.emit()


def test_emit_covers_schema():
    text = parse_config("[run]\ncommand = construct\n").emit()
    for sec, fields in SCHEMA.items():
        assert f"[{sec}]" in text
        for key in fields:
            assert f"\n{key} = " in text


def test_output_precedence(monkeypatch, tmp_path):
    cfg = parse_config("[run]\ncommand = construct\n")
    monkeypatch.delenv("ZETAUNIV_OUT", raising=False)
    assert str(output_dir(cfg, None)) == "zetauniv-out"
    monkeypatch.setenv("ZETAUNIV_OUT", str(tmp_path / "env"))
    assert output_dir(cfg, None) == tmp_path / "env"
    cfg2 = cfg.replace("output", dir=str(tmp_path / "cfg"))
    assert output_dir(cfg2, None) == tmp_path / "cfg"
    assert output_dir(cfg2, str(tmp_path / "flag")) == tmp_path / "flag"


def test_number_formatting():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(1 - 2j) == "1-2j"
    assert to_json({"a": float("nan"), "b": 1j, "c": [True, 3]}) == '{"a": null, "b": [0, 1], "c": [true, 3]}'


# -- runs -----------------------------------------------------------------


def test_scan_outputs_and_determinism(tmp_path):
    cfgp = _write(tmp_path, SCAN2.format(eps=0.75, records="all"))
    assert main(["scan-theorem2", "--config", str(cfgp), "--out", str(tmp_path / "a")]) == 0
    assert main(["scan-theorem2", "--config", str(cfgp), "--out", str(tmp_path / "b")]) == 0
    for name in ("summary.txt", "records.jsonl", "tables.csv", "plot.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    lines = (tmp_path / "a" / "records.jsonl").read_text().splitlines()
    assert len(lines) == 1000
    rec = json.loads(lines[0])
    assert set(rec) == {"t", "sup_error", "hit"}
    summary = (tmp_path / "a" / "summary.txt").read_text()
    assert "[config]" in summary and "epsilon = 0.75" in summary and "hit_fraction" in summary
    # the summary carries a config that reproduces the run
    body = summary.split("[config]\n", 1)[1].split("\n[result]", 1)[0]
    assert parse_config(body) == parse_config(cfgp.read_text())


def test_plot_is_two_numeric_columns(tmp_path):
    cfgp = _write(tmp_path, SCAN2.format(eps=0.75, records="none"))
    main(["scan-theorem2", "--config", str(cfgp), "--out", str(tmp_path)])
    rows = list(csv.reader((tmp_path / "plot.csv").open()))
    assert rows[0] == ["t", "sup_error"]
    assert all(len(r) == 2 for r in rows[1:])
    [float(x) for r in rows[1:] for x in r]


def test_empty_scan(tmp_path):
    cfgp = _write(tmp_path, SCAN2.format(eps=0.0, records="hits"))
    assert main(["scan-theorem2", "--config", str(cfgp), "--out", str(tmp_path)]) == 1
    assert (tmp_path / "records.jsonl").read_text() == ""
    assert "pass = false" in (tmp_path / "summary.txt").read_text()


def test_error_exit_code(tmp_path, capsys):
    cfgp = _write(tmp_path, "[run]\ncommand = construct\n[construct]\ndelta = -1\n")
    assert main(["construct", "--config", str(cfgp), "--out", str(tmp_path / "o")]) == 2
    assert "delta must be positive" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_laplace_demo_run(tmp_path):
    from pathlib import Path
    cfgp = Path(__file__).resolve().parents[1] / "configs" / "laplace_demo.ini"
    assert main(["laplace-demo", "--config", str(cfgp), "--out", str(tmp_path)]) == 0
    text = (tmp_path / "summary.txt").read_text()
    assert "closed_form_ok = true" in text


def test_verify_run_at_wide_delta(tmp_path):
    text = ("[run]\ncommand = verify\n[construct]\ndelta = 0.2\nrule = both\n"
            "sample_checks = 2000\n")
    cfgp = _write(tmp_path, text)
    assert main(["verify", "--config", str(cfgp), "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "tables.csv").open()))
    assert [r["entry"] for r in rows[:8]] == ["we1", "we2", "we3", "we4", "we5", "we6", "aj",
                                              "final_supnorm"]
    assert {r["rule"] for r in rows} == {"apdef", "recursive"}
