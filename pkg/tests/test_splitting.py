from fractions import Fraction as Fr

import pytest
from hypothesis import given, strategies as st

from conftest import models, random_times
from osfkit.core import (INF, Filtration, FiniteSpace, Partition, Process, cond_exp, is_adapted,
                         is_measurable)
from osfkit.enlargement import MarkedTime, enlarge_marked, enlarge_multi, enlarge_single
from osfkit.reports import FAIL, PASS, VACUOUS
from osfkit.splitting import (
    AdaptednessError,
    MeasurabilityError,
    ParamProcess,
    ParameterError,
    check_F_tau_equality,
    check_graph_criterion,
    check_nmid_gap,
    check_pre_default_trace,
    check_right_continuity_identity,
    eval_param_at,
    generic_adapted_process,
    lo_membership,
    ordered_enlargement_report,
    reconstruct_predictable,
    split_marked,
    split_multi,
    split_multi_inductive,
    split_predictable,
    split_report,
    split_single,
)

ABC = [(1, 2, 3), (2, 3, 1), (3, 1, 2)]


def default_indicator(tau, T, strict=False):
    return Process.from_function(lambda t, w: Fr(int(tau[w] < t if strict else tau[w] <= t)), T, len(tau))


def test_split_single_adapted_input():
    space, f = FiniteSpace.uniform(range(4)), Filtration([Partition.trivial(4), Partition((0, 0, 1, 1)),
                                                         Partition.discrete(4)])
    y = Process.from_function(lambda t, w: Fr(f[t].labels[w] + t), 2, 4)
    tau = (0, 1, 2, INF)
    s = split_single(y, f, tau, space)
    assert all(s.pre[t][w] == y[t][w] for t in range(3) for w in range(4) if t < tau[w])
    for w in range(4):
        for t in range(tau[w] if tau[w] != INF else 3, 3):
            assert s.post[tau[w]][t][w] == y[t][w]
    assert s.reconstruct() == y


def test_split_single_default_indicator():
    tau = (1, 2, INF)
    f = Filtration.trivial(3, 2)
    s = split_single(default_indicator(tau, 2), f, tau, FiniteSpace.uniform(range(3)))
    assert all(v == 0 for row in s.pre for v in row)
    for w, u in enumerate(tau):
        if u != INF:
            assert all(s.post[u][t][w] == 1 for t in range(u, 3))


def test_split_single_ratio_example():
    space = FiniteSpace.uniform(range(3))
    f = Filtration.trivial(3, 2)
    tau = (1, 2, 2)
    g = enlarge_single(f, tau)
    xi = (0, 1, 0)
    y = Process(tuple(cond_exp(xi, g[t], space) for t in range(3)))
    s = split_single(y, f, tau, space)
    assert s.pre[1][1] == s.pre[1][2] == Fr(1, 2)
    assert s.reconstruct() == y


def test_split_single_rejects_non_adapted():
    f = Filtration.trivial(2, 1)
    y = Process(((0, 1), (0, 1)))
    with pytest.raises(AdaptednessError):
        split_single(y, f, (1, 1), FiniteSpace.uniform(range(2)))


def test_split_predictable_examples():
    f = Filtration([Partition.trivial(3), Partition((0, 0, 1)), Partition.discrete(3)])
    tau = (0, 1, INF)
    y = Process.from_function(lambda t, w: Fr(f[max(t - 1, 0)].labels[w]), 2, 3)
    pre, post = split_predictable(y, f, tau)
    assert pre == y
    ind = default_indicator(tau, 2, strict=True)
    pre, post = split_predictable(ind, f, tau)
    assert all(v == 0 for row in pre for v in row)
    for w, u in enumerate(tau):
        if u != INF:
            assert all(post[u][t][w] == 1 for t in range(u + 1, 3))


def test_split_predictable_generator_form():
    f = Filtration.trivial(3, 3)
    tau = (0, 1, 2)
    g = [Fr(5), Fr(7), Fr(11), Fr(13)]
    y = Process.from_function(lambda t, w: g[min(tau[w], t - 1)] if t else g[0], 3, 3)
    pre, post = split_predictable(y, f, tau)
    for t in range(1, 4):
        for w in range(3):
            if t <= tau[w]:
                assert pre[t][w] == g[t - 1]
            else:
                assert post[tau[w]][t][w] == g[tau[w]]
    assert reconstruct_predictable(pre, post, tau) == y


def test_split_predictable_rejects_optional_process():
    f = Filtration.trivial(2, 2)
    with pytest.raises(AdaptednessError):
        split_predictable(default_indicator((1, 2), 2), f, (1, 2))


def test_split_multi_base_cases():
    space, f = FiniteSpace.uniform(range(3)), Filtration.trivial(3, 2)
    tau = (1, 2, 2)
    g = enlarge_single(f, tau)
    y = generic_adapted_process(g)
    one = split_single(y, f, tau, space)
    multi = split_multi(y, f, [tau])
    for t in range(3):
        for w in range(3):
            if t < tau[w]:
                assert multi.components[0].value((INF,), t, w) == one.pre[t][w]
            else:
                assert multi.components[1].value((tau[w],), t, w) == one.post[tau[w]][t][w]
    y = generic_adapted_process(f)
    never = split_multi(y, f, [(INF,) * 3, (INF,) * 3])
    assert never.components[0][(INF, INF)] == y


def test_split_multi_abc():
    f = Filtration.trivial(3, 3)
    y = Process.from_function(lambda t, w: Fr(t if w == 0 and t >= 1 else 0), 3, 3)
    s = split_multi(y, f, ABC)
    assert s.reconstruct() == y
    assert split_report("abc", y, s, f).verdict == PASS


def test_split_marked_examples():
    f = Filtration.trivial(4, 2)
    mt = MarkedTime((1, 1, 2, 2), ("a", "b", "a", "b"), ("a", "b"))
    g = enlarge_marked(f, [mt])
    y = Process.from_function(lambda t, w: Fr(t * int(mt.mark[w] == "a" and mt.time[w] <= t)), 2, 4)
    assert is_adapted(y, g)
    s = split_marked(y, f, [mt])
    assert s.reconstruct() == y
    assert split_report("marked", y, s, f).verdict == PASS


def test_split_marked_singleton_alphabet_matches_multi():
    f = Filtration([Partition.trivial(4), Partition((0, 0, 1, 1)), Partition((0, 0, 1, 1))])
    taus = [(1, 2, 1, INF), (0, 2, 2, 1)]
    mts = [MarkedTime(tau, ("a",) * 4, ("a",)) for tau in taus]
    y = generic_adapted_process(enlarge_multi(f, taus))
    multi, marked = split_multi(y, f, taus), split_marked(y, f, mts)
    for t in range(3):
        for w in range(4):
            i, p = multi.key(t, w)
            j, q = marked.key(t, w)
            assert i == j
            assert multi.components[i].value(p, t, w) == marked.components[j].value(q, t, w)


def test_right_continuity_example():
    rep = check_right_continuity_identity(Filtration.trivial(2, 2), (1, 2))
    assert rep.verdict == PASS
    assert rep.details[1]["collapsed"] == [[0], [1]]
    assert check_right_continuity_identity(Filtration.trivial(2, 2), (INF, INF)).verdict == PASS


def test_nmid_gap_example():
    rep = check_nmid_gap(Filtration.trivial(2, 2), (1, 2))
    assert rep.verdict == PASS
    assert 1 in rep.estimates["gap_times"]


def test_f_tau_examples():
    f = Filtration([Partition.trivial(3), Partition((0, 1, 1)), Partition.discrete(3)])
    assert check_F_tau_equality(f, (1, 2, 2)).verdict == PASS  # already an F-stopping time
    assert check_F_tau_equality(f, (INF,) * 3).verdict == VACUOUS
    assert check_F_tau_equality(Filtration.trivial(3, 2), (1, 2, 2)).verdict == PASS


def test_graph_criterion_examples():
    f = Filtration.trivial(3, 2)
    tau = (1, 2, 2)
    assert check_graph_criterion(f, tau, (1, 1, 1)).verdict == PASS
    rep = check_graph_criterion(f, tau, tau)
    assert any("step" in d for d in rep.details) and rep.verdict == PASS
    assert check_graph_criterion(f, tau, (INF,) * 3).verdict == VACUOUS


def test_pre_default_trace_examples():
    f = Filtration.trivial(3, 2)
    assert check_pre_default_trace(f, (1, 2, 2), (0, 0, 0)).verdict == PASS
    assert check_pre_default_trace(f, (1, 2, 2), (1, 2, 2)).verdict == VACUOUS
    assert check_pre_default_trace(f, (1, 2, 2), (1, 1, 1)).verdict == PASS


def test_eval_param_examples():
    tau, T = (1, 2), 2
    const = ParamProcess.from_function(lambda u, t, w: Fr(9), [0, 1, 2, INF], T, 2)
    assert eval_param_at(const, tau, (0, INF)) == (9, 0)
    echo = ParamProcess.from_function(lambda u, t, w: Fr(u), [1, 2], T, 2)
    assert eval_param_at(echo, tau, tau) == (1, 2)
    shifted = ParamProcess.from_function(lambda u, t, w: Fr(u + t), [1, 2], T, 2)
    assert eval_param_at(shifted, tau, (2, 2), Filtration.trivial(2, T)) == (3, 4)
    with pytest.raises(ParameterError):
        eval_param_at(echo, (0, 1), (1, 1))


def test_eval_param_measurability_failure():
    peek = ParamProcess.from_function(lambda u, t, w: Fr(w), [1], 1, 2)
    with pytest.raises(MeasurabilityError):
        eval_param_at(peek, (1, 1), (1, 1), Filtration.trivial(2, 1))


def test_lo_membership():
    f = Filtration.trivial(2, 2)
    tau = (1, 2)
    whole = [[True, True]] * 3
    assert lo_membership(f, tau, whole).verdict == PASS
    peek = Process.from_function(lambda t, w: Fr(w), 2, 2)
    assert lo_membership(f, tau, whole, peek).verdict == FAIL
    assert lo_membership(f, tau, [[False, False]] * 3).verdict == VACUOUS


def test_ordered_enlargement_abc_is_strict():
    rep = ordered_enlargement_report(Filtration.trivial(3, 3), ABC)
    assert rep.verdict == PASS and rep.estimates["strict_times"] == [1, 2, 3]


@st.composite
def split_models(draw, max_m=3):
    space, f = draw(models(max_n=10, max_T=4))
    m = draw(st.integers(1, max_m))
    taus = [draw(random_times(space.n, f.T)) for _ in range(m)]
    marks = [tuple(draw(st.lists(st.sampled_from("ab"), min_size=space.n, max_size=space.n))) for _ in range(m)]
    return space, f, taus, [MarkedTime(t, mk, ("a", "b")) for t, mk in zip(taus, marks)]


@given(split_models(max_m=1))
def test_split_single_reconstructs(model):
    space, f, (tau,), _ = model
    y = generic_adapted_process(enlarge_single(f, tau))
    s = split_single(y, f, tau, space)
    assert split_report("single", y, s, f).verdict == PASS


@given(split_models(max_m=1))
def test_pre_part_matches_ratio_formula(model):
    space, f, (tau,), _ = model
    g = enlarge_single(f, tau)
    y = generic_adapted_process(g)
    s = split_single(y, f, tau, space)
    for t in range(f.T + 1):
        alive = [Fr(int(t < v)) for v in tau]
        den = cond_exp(alive, f[t], space)
        num = cond_exp([a * x for a, x in zip(alive, y[t])], f[t], space)
        for w in range(f.n):
            if den[w] > 0:
                assert s.pre[t][w] == num[w] / den[w]


@given(split_models())
def test_split_multi_and_marked_reconstruct(model):
    space, f, taus, mts = model
    y = generic_adapted_process(enlarge_multi(f, taus))
    assert split_report("multi", y, split_multi(y, f, taus), f).verdict == PASS
    z = generic_adapted_process(enlarge_marked(f, mts))
    assert split_report("marked", z, split_marked(z, f, mts), f).verdict == PASS


@given(split_models())
def test_inductive_split_agrees_on_carrying_sets(model):
    space, f, taus, _ = model
    y = generic_adapted_process(enlarge_multi(f, taus))
    direct = split_multi(y, f, taus)
    induct = split_multi_inductive(y, f, taus, space)
    assert induct.reconstruct() == y
    for t in range(f.T + 1):
        for w in range(f.n):
            i, p = direct.key(t, w)
            assert induct.components[i].value(p, t, w) == direct.components[i].value(p, t, w)


@given(split_models(max_m=1), st.data())
def test_identity_reports_never_fail(model, data):
    space, f, (tau,), _ = model
    g = enlarge_single(f, tau)
    assert check_right_continuity_identity(f, tau).verdict != FAIL
    assert check_F_tau_equality(f, tau).verdict != FAIL
    assert check_nmid_gap(f, tau).verdict != FAIL
    for r in (tau, tuple(min(a, 1) if f.T >= 1 else a for a in tau)):
        assert check_graph_criterion(f, tau, r).verdict != FAIL
        assert check_pre_default_trace(f, tau, r).verdict != FAIL
    params = sorted({v for v in tau}, key=lambda u: (u == INF, u if u != INF else 0))
    fp = ParamProcess.from_function(lambda u, t, w: Fr(f[t].labels[w] + (0 if u == INF else u)), params, f.T, f.n)
    out = eval_param_at(fp, tau, tau, f)
    assert is_measurable(out, Partition(list(zip(tau, out))))
