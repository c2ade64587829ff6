from fractions import Fraction as Fr

import pytest

from osfkit.checks import CATALOG, FUZZ_SUITE, MONTE_CARLO_CHECKS, FiniteContext, list_checks, run_checks
from osfkit.core import INF, Filtration, FiniteSpace, Partition
from osfkit.enlargement import MarkedTime
from osfkit.reports import FAIL, PASS, VACUOUS, CheckReport, merge, to_jsonable


def context():
    space = FiniteSpace.uniform(range(4))
    f = Filtration([Partition.trivial(4), Partition((0, 0, 1, 1)), Partition.discrete(4)])
    taus = [(1, 2, 2, INF), (0, INF, 1, 2)]
    mtaus = [MarkedTime(t, ("a", "b", "a", "b"), ("a", "b")) for t in taus]
    return FiniteContext(space, f, taus, mtaus, [(1, 1, 2, 2)])


def test_catalog_entries_have_anchor_and_description():
    entries = list_checks()
    names = [e["name"] for e in entries]
    assert len(names) == len(set(names)) == len(CATALOG) + len(MONTE_CARLO_CHECKS)
    for e in entries:
        assert e["anchor"] and e["description"]
    anchors = {e["name"]: e["anchor"] for e in entries}
    assert anchors["osf-single"] == "Definition df_splitting"
    assert anchors["graph-criterion"] == "Theorem graph"


def test_fuzz_suite_is_in_catalog():
    assert set(FUZZ_SUITE) <= set(CATALOG)


def test_every_finite_check_passes_on_a_small_model():
    ctx = context()
    names = [n for n in FUZZ_SUITE]
    reports = run_checks(ctx, names)
    assert [r.name for r in reports] == names
    assert all(r.verdict != FAIL for r in reports), [r.name for r in reports if r.verdict == FAIL]


def test_probe_times_cover_tau_and_truncations():
    ctx = context()
    probes = ctx.probe_times()
    tau = ctx.tau
    assert tau in probes and (INF,) * 4 in probes
    assert tuple(min(v, 1) for v in tau) in probes


def test_unknown_check_raises():
    with pytest.raises(KeyError):
        run_checks(context(), ["no-such-check"])


def test_report_settle_and_merge():
    r = CheckReport("x")
    r.add(VACUOUS, a=1)
    assert r.settle().verdict == VACUOUS
    r.add(PASS)
    assert r.settle().verdict == PASS
    r.add(FAIL, why="bad")
    assert r.settle().verdict == FAIL and r.witness == {"why": "bad"}
    m = merge("both", [r, CheckReport("y").settle()])
    assert m.verdict == FAIL and len(m.details) == 2


def test_jsonable_handles_fractions_and_infinity():
    out = to_jsonable({"a": Fr(1, 3), "b": INF, "c": (1, 2), "d": float("nan")})
    assert out["a"] == "1/3" and out["b"] == "inf" and out["c"] == [1, 2]
