from fractions import Fraction as Fr

import pytest
from hypothesis import given, strategies as st

from conftest import models
from osfkit.core import INF, Filtration, FiniteSpace, Partition, Process, cond_exp, is_supermartingale
from osfkit.enlargement import MarkedTime, enlarge_marked, enlarge_multi, enlarge_single
from osfkit.fuzz import random_cox_model
from osfkit.models import (
    ConstructionError,
    CoxSpec,
    DensityModel,
    MarkedDensityModel,
    MeasureChange,
    NonEquivalentChange,
    azema,
    build_cox,
    build_density_model,
    build_marked_density_model,
    covering_report,
    density_cond_exp,
    density_formula_report,
    future_time_model,
    hypothesis_H_check,
    marked_density_cond_exp,
    marked_density_formula_report,
    verify_sH_measure,
)
from osfkit.reports import FAIL, PASS, VACUOUS
from osfkit.splitting import generic_adapted_process, split_marked, split_multi, split_report

HALF = Fr(1, 2)


def base_two():
    space = FiniteSpace.uniform(("up", "down"))
    f = Filtration([Partition.trivial(2), Partition.discrete(2), Partition.discrete(2)])
    return space, f


def test_cox_deterministic_hazard():
    space, f = base_two()
    spec = CoxSpec(Process.from_function(lambda t, w: Fr(t), 2, 2), {1: HALF, 2: HALF})
    built = build_cox(spec, f, space)
    thresholds = [lab[1] for lab in built.space.outcomes]
    assert built.times[0] == tuple(thresholds)


def test_cox_threshold_out_of_reach():
    space, f = base_two()
    spec = CoxSpec(Process.from_function(lambda t, w: Fr(t), 2, 2), {5: 1})
    assert build_cox(spec, f, space).times[0] == (INF, INF)


def test_cox_staircase_azema():
    space, f = base_two()
    hazard = Process(((0, 0), (1, 0), (2, 1)))
    built = build_cox(CoxSpec(hazard, {1: HALF, 2: HALF}), f, space)
    assert built.times[0] == (1, 2, 2, INF)
    z = azema(built.times[0], built.filtration, built.space)
    assert z.values == ((1, 1, 1, 1), (HALF, HALF, 1, 1), (0, 0, HALF, HALF))
    assert is_supermartingale(z, built.filtration, built.space)
    g = enlarge_single(built.filtration, built.times[0])
    assert hypothesis_H_check(built.filtration, g, built.space).verdict == PASS


def test_cox_spec_validation():
    h = Process(((0,), (1,)))
    with pytest.raises(ValueError):
        CoxSpec(h, {0: 1})
    with pytest.raises(ValueError):
        CoxSpec(h, {1: HALF})
    with pytest.raises(ValueError):
        CoxSpec(Process(((0,), (-1,))), {1: 1})


def test_hypothesis_H_identity_and_future_time():
    space, f = base_two()
    assert hypothesis_H_check(f, f, space).verdict == PASS
    built = future_time_model()
    g = enlarge_single(built.filtration, built.times[0])
    rep = hypothesis_H_check(built.filtration, g, built.space)
    assert rep.verdict == FAIL and rep.witness is not None


@given(st.integers(0, 10 ** 6))
def test_cox_always_immersed(seed):
    spec, f, space = random_cox_model(seed, 0, max_outcomes=16)
    built = build_cox(spec, f, space)
    g = enlarge_single(built.filtration, built.times[0])
    assert hypothesis_H_check(built.filtration, g, built.space).verdict == PASS
    assert is_supermartingale(azema(built.times[0], built.filtration, built.space), built.filtration, built.space)


def density_base():
    space = FiniteSpace((0, 1, 2), (HALF, Fr(1, 4), Fr(1, 4)))
    f = Filtration([Partition.trivial(3), Partition((0, 0, 1)), Partition.discrete(3)])
    return space, f


def test_density_independent_case():
    space, f = density_base()
    mu = {1: HALF, 2: HALF}
    built = build_density_model(DensityModel.from_function(space, f, mu, lambda a, w: 1))
    assert built.space.n == 6
    assert all(p == space.probs[lab[0]] * HALF for lab, p in zip(built.space.outcomes, built.space.probs))


def test_density_concentrated_single_time():
    space, f = density_base()
    mu = {1: HALF, 2: HALF}
    gamma = lambda a, w: {0: 2 if a == (1,) else 0}.get(w, 1)
    built = build_density_model(DensityModel.from_function(space, f, mu, gamma))
    law = dict(zip(built.space.outcomes, built.space.probs))
    assert law == {(0, (1,)): HALF, (1, (1,)): Fr(1, 8), (1, (2,)): Fr(1, 8),
                   (2, (1,)): Fr(1, 8), (2, (2,)): Fr(1, 8)}


def test_density_symmetric_pair_is_exchangeable():
    space, f = density_base()
    mu = {1: Fr(1, 3), 2: Fr(1, 3), INF: Fr(1, 3)}
    weight = {(1, 1): 3, (2, 2): 3, (1, 2): 1, (2, 1): 1, (1, INF): HALF, (INF, 1): HALF}
    gamma = lambda a, w: Fr(weight.get(a, 0)) if w == 0 else Fr(1)
    built = build_density_model(DensityModel.from_function(space, f, mu, gamma, m=2))
    law = dict(zip(built.space.outcomes, built.space.probs))
    for (w, (a, b)), p in law.items():
        assert law.get((w, (b, a))) == p


def test_density_normalization_error_names_outcome():
    space, f = density_base()
    with pytest.raises(ConstructionError, match="1"):
        build_density_model(DensityModel.from_function(space, f, {1: HALF, 2: HALF},
                                                       lambda a, w: 2 if w == 1 else 1))


def test_density_formula_examples():
    space, f = density_base()
    mu = {1: HALF, 2: HALF}
    indep = DensityModel.from_function(space, f, mu, lambda a, w: 1)
    h = lambda u, w: Fr(10 * u)
    built = build_density_model(indep)
    after = density_cond_exp(indep, h, 2)
    assert after == tuple(Fr(10 * lab[1][0]) for lab in built.space.outcomes)
    assert all(v == 1 for t in range(3) for v in density_cond_exp(indep, lambda u, w: Fr(1), t))
    skew = DensityModel.from_function(space, f, mu, lambda a, w: [Fr(3, 2), Fr(1, 2), 1][w] if a == (1,) else
                                      [Fr(1, 2), Fr(3, 2), 1][w])
    rep = density_formula_report(skew, [lambda u, w: Fr(u * (w + 1)), lambda u, w: Fr(w)])
    assert rep.verdict == PASS


def test_marked_density_formula_examples():
    space, f = density_base()
    nu = {("a", 1): Fr(1, 4), ("b", 1): Fr(1, 4), ("a", 2): Fr(1, 8), ("b", 2): Fr(3, 8)}
    flat = MarkedDensityModel.from_function(space, f, nu, lambda a, w: 1, ("a", "b"))
    built = build_marked_density_model(flat)
    h = lambda x, u, w: Fr(u) + (100 if x == "a" else 0)
    assert marked_density_cond_exp(flat, h, 2) == tuple(h(*lab[1][0], 0) for lab in built.space.outcomes)
    assert all(v == 1 for v in marked_density_cond_exp(flat, lambda x, u, w: Fr(1), 1))
    table = {("a", 1): [2, 0, 1], ("b", 1): [0, 2, 1], ("a", 2): [2, 0, 1], ("b", 2): [Fr(2, 3), Fr(4, 3), 1]}
    skew = MarkedDensityModel.from_function(space, f, nu, lambda a, w: Fr(table[a[0]][w]), ("a", "b"))
    assert marked_density_formula_report(skew, [h, lambda x, u, w: Fr(w * u)]).verdict == PASS


def test_marked_density_rejects_undeclared_mark():
    space, f = density_base()
    with pytest.raises(ConstructionError):
        build_marked_density_model(MarkedDensityModel.from_function(space, f, {("z", 1): 1}, lambda a, w: 1, ("a",)))


@given(st.integers(1, 3))
def test_density_models_split_exactly(m):
    space, f = density_base()
    mu = {0: Fr(1, 4), 2: Fr(1, 4), INF: HALF}
    built = build_density_model(DensityModel.from_function(space, f, mu, lambda a, w: 1, m=m))
    y = generic_adapted_process(enlarge_multi(built.filtration, built.times))
    assert split_report("d", y, split_multi(y, built.filtration, built.times), built.filtration).verdict == PASS
    nu = {("a", 1): HALF, ("b", INF): HALF}
    mb = build_marked_density_model(MarkedDensityModel.from_function(space, f, nu, lambda a, w: 1, ("a", "b"), m=m))
    z = generic_adapted_process(enlarge_marked(mb.filtration, mb.times))
    assert split_report("md", z, split_marked(z, mb.filtration, mb.times), mb.filtration).verdict == PASS


def test_sh_measure_examples():
    built = build_cox(*random_cox_model(3, 0))
    g = enlarge_single(built.filtration, built.times[0])
    n, T = built.space.n, built.filtration.T
    one = MeasureChange((1,) * n)
    assert verify_sH_measure(one, (0,) * n, (INF,) * n, built.filtration, g, built.space).verdict == PASS
    assert verify_sH_measure(one, (T,) * n, (0,) * n, built.filtration, g, built.space).verdict == VACUOUS


def test_sh_measure_broken_change():
    space = FiniteSpace.uniform((0, 1))
    f = Filtration([Partition.trivial(2), Partition.discrete(2)])
    rep = verify_sH_measure(MeasureChange((Fr(3, 2), HALF)), (0, 0), (1, 1), f, f, space)
    assert rep.verdict == FAIL and rep.witness is not None
    with pytest.raises(NonEquivalentChange):
        MeasureChange((2, 0))
    with pytest.raises(ValueError):
        MeasureChange((2, 2)).apply(space)


def covered_by_brute_force(family, tau, T):
    # quarter points of (0, T + 1]; the last stands for every time past T
    points = [Fr(k, 4) for k in range(1, 4 * T + 5)]
    inside = lambda a, b, p: (a < p) and (b == INF or p < b)
    after = all(any(inside(a[w], b[w], p) for a, b in family) for w, v in enumerate(tau) for p in points if v < p)
    start = all(any(inside(a[w], b[w], p) for a, b in family) for w, v in enumerate(tau) for p in points if v <= p)
    return after, start


def test_covering_examples():
    tau, T = (1, 2, INF), 4
    rep = covering_report([((0,) * 3, (INF,) * 3)], tau, T)
    assert rep.verdict == PASS
    rep = covering_report([], tau, T)
    assert rep.verdict == FAIL and all(d["uncovered"] for d in rep.details)


@pytest.mark.parametrize("family", [
    [(0, 2), (1, 3), (2, 4), (3, INF)],
    [(0, 2), (2, 4), (4, INF)],
    [(1, 2), (1, 4), (3, INF)],
    [(0, 1), (1, 2), (2, 3), (3, 4)],
])
def test_covering_dyadic_against_brute_force(family):
    tau, T = (0, 1, 2, 3), 4
    fam = [((a,) * 4, (b,) * 4) for a, b in family]
    rep = covering_report(fam, tau, T)
    verdicts = {d["condition"]: d["verdict"] == PASS for d in rep.details}
    after, start = covered_by_brute_force(fam, tau, T)
    assert verdicts == {"after-default": after, "from-default": start}


@given(models(max_n=8, max_T=3), st.data())
def test_azema_is_supermartingale_for_cox(model, data):
    space, f = model
    incs = [data.draw(st.lists(st.integers(0, 2), min_size=space.n, max_size=space.n)) for _ in range(f.T)]
    rows = [(Fr(0),) * space.n]
    for t, inc in enumerate(incs, start=1):
        step = cond_exp([Fr(x) for x in inc], f[t], space)
        rows.append(tuple(a + b for a, b in zip(rows[-1], step)))
    built = build_cox(CoxSpec(Process(tuple(rows)), {1: HALF, 3: HALF}), f, space)
    z = azema(built.times[0], built.filtration, built.space)
    assert is_supermartingale(z, built.filtration, built.space)
