import csv
import io
import json
from pathlib import Path

import pytest

from osfkit.cli import main
from osfkit.scenario import ScenarioError, execute, load_scenario, overall, parse_scenario, serialize

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
FINITE = ["three-sets", "walk", "cox", "density", "marked-density"]

MINIMAL = """\
kind: finite-model
model:
  outcomes: [a, b]
  filtration: [[[a, b]], [[a], [b]]]
  times: [[1, inf]]
checks: [osf-single]
"""


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("name", FINITE)
def test_shipped_scenarios_pass(name, capsys):
    code, out, _ = run(["run", str(SCENARIOS / f"{name}.yaml")], capsys)
    report = json.loads(out)
    assert code == 0 and report["verdict"] == "pass"
    assert report["engine"]["name"] == "osfkit"


def test_counterexample_scenario_fails_with_witness(capsys):
    code, out, _ = run(["run", str(SCENARIOS / "future-peek.yaml")], capsys)
    report = json.loads(out)
    assert code == 1
    failing = [c for c in report["checks"] if c["verdict"] == "fail"]
    assert [c["name"] for c in failing] == ["hypothesis-H"] and failing[0]["witness"]


@pytest.mark.parametrize("name", FINITE + ["barlow", "natural", "future-peek"])
def test_round_trip(name):
    cfg = load_scenario(SCENARIOS / f"{name}.yaml")
    text = serialize(cfg)
    again = parse_scenario(text)
    assert again == cfg and serialize(again) == text


@pytest.mark.parametrize("text, line, fragment", [
    (MINIMAL.replace("[osf-single]", "[osf-single, nope]"), 6, "unknown check"),
    (MINIMAL.replace("[[1, inf]]", "[[1, 7]]"), 5, "beyond the horizon"),
    (MINIMAL.replace("[[a], [b]]", "[[a], [c]]"), 4, "unknown outcome"),
    (MINIMAL.replace("kind: finite-model", "kind: nonsense"), 1, "kind"),
    (MINIMAL + "  extra: 1\n", 7, ""),
    (MINIMAL.replace("[osf-single]", "[barlow]"), 6, ""),
])
def test_parse_errors_carry_position(text, line, fragment):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    assert info.value.line == line
    assert fragment in str(info.value)


def test_yaml_syntax_error():
    with pytest.raises(ScenarioError):
        parse_scenario("kind: [unclosed\n")


def test_usage_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(MINIMAL.replace("[osf-single]", "[osf-single, no-such-check]"))
    code, _, err = run(["run", str(bad)], capsys)
    assert code == 2 and "line 6" in err and "unknown check" in err
    assert run(["frobnicate"], capsys)[0] == 2
    assert run(["run", str(tmp_path / "missing.yaml")], capsys)[0] == 2
    assert run(["fuzz", "--models", "0"], capsys)[0] == 2
    assert run(["demo", "barlow", "--dt", "-1"], capsys)[0] == 2
    assert run(["fuzz", "--max-alphabet", "9", "--models", "1"], capsys)[0] == 2


def test_list_checks_formats(tmp_path, capsys):
    code, out, _ = run(["list-checks"], capsys)
    entries = json.loads(out)
    assert code == 0 and len(entries) == 23
    code, out, _ = run(["list-checks", "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["name"] for r in rows] == [e["name"] for e in entries]
    target = tmp_path / "catalog.json"
    assert run(["list-checks", "--out", str(target)], capsys)[0] == 0
    assert json.loads(target.read_text()) == entries


def test_run_csv_output_and_seed(tmp_path, capsys):
    scen = tmp_path / "s.yaml"
    scen.write_text(MINIMAL)
    out = tmp_path / "r.csv"
    code, _, _ = run(["run", str(scen), "--format", "csv", "--out", str(out), "--seed", "5"], capsys)
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert code == 0 and rows[0] == ["check", "field", "value"]
    assert ["osf-single", "verdict", "pass"] in rows


def test_fuzz_command(capsys):
    code, out, _ = run(["fuzz", "--models", "5", "--max-outcomes", "6", "--max-T", "3", "--seed", "1"], capsys)
    report = json.loads(out)
    assert code == 0
    assert {c["name"] for c in report["checks"]} == {"fuzz", "density-fuzz", "cox-fuzz"}
    assert report["seed"] == 1


def test_demo_barlow_small(capsys):
    code, out, _ = run(["demo", "barlow", "--paths", "400", "--seed", "3"], capsys)
    report = json.loads(out)
    assert code == 0 and report["checks"][0]["name"] == "barlow"


def test_demo_natural_small(tmp_path, capsys):
    traj = tmp_path / "traj.csv"
    code, out, _ = run(["demo", "natural", "--paths", "1500", "--euler-paths", "200", "--trajectories", str(traj)],
                       capsys)
    report = json.loads(out)
    assert code in (0, 1)
    assert {c["name"] for c in report["checks"]} >= {"natural-euler", "natural-projection", "natural-drift"}
    rows = list(csv.DictReader(traj.open()))
    assert rows and set(rows[0]) == {"path", "t", "M_u", "rejected"}


def test_execute_is_deterministic():
    cfg = load_scenario(SCENARIOS / "three-sets.yaml")
    a = [r.to_dict() for r in execute(cfg)]
    b = [r.to_dict() for r in execute(cfg)]
    assert a == b and overall(execute(cfg)) == "pass"
