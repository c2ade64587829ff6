"""Acceptance criteria, each at its stated size and tolerance.

Every test prints one ``PASS``/``FAIL`` line (visible even under output
capture) before asserting.  The fuzz run is shared by criteria 1 and 2 and
the natural-model study by the two halves of criterion 8.
"""

import random
import time

import pytest

from osfkit.core import Filtration, generated, is_measurable, join
from osfkit.enlargement import enlarge_multi, enlarge_single, nmid, nmid_rv, order_statistics, rank, wedge_rv
from osfkit.fuzz import FuzzBounds, cox_fuzz, density_fuzz, random_model_fuzz
from osfkit.models import future_time_model, hypothesis_H_check
from osfkit.montecarlo.barlow import barlow_statistics
from osfkit.montecarlo.natural import (NaturalModelSpec, drift_orthogonality, euler_convergence,
                                       projection_condition_estimate, run_study)
from osfkit.montecarlo.paths import EnsembleConfig, simulate_paths
from osfkit.reports import FAIL, PASS
from osfkit.splitting import check_nmid_gap

SPLIT_CHECKS = ("osf-single", "osf-multi", "osf-marked")
IDENTITY_CHECKS = ("right-continuity", "f-tau", "graph-criterion", "pre-default-trace")


@pytest.fixture
def verdict(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")
        assert ok, detail
    return emit


def counts(report):
    return {d["check"]: d for d in report.details}


@pytest.fixture(scope="module")
def fuzz_run():
    start = time.perf_counter()
    rep = random_model_fuzz(1000, seed=0, bounds=FuzzBounds(32, 8, 3, 3))
    return rep, time.perf_counter() - start


def test_criterion_1_splitting_exactness(fuzz_run, verdict):
    rep, seconds = fuzz_run
    c = counts(rep)
    exact = all(c[n]["pass"] == 1000 and c[n]["fail"] == 0 for n in SPLIT_CHECKS)
    detail = ", ".join(f"{n} {c[n]['pass']}/1000" for n in SPLIT_CHECKS) + f"; {seconds:.0f} s (limit 300 s)"
    verdict(1, exact and seconds <= 300, detail)


def test_criterion_2_sigma_algebra_identities(fuzz_run, verdict):
    rep, _ = fuzz_run
    c = counts(rep)
    ok = all(c[n]["fail"] == 0 for n in IDENTITY_CHECKS)
    detail = ", ".join(f"{n} fail={c[n]['fail']} pass={c[n]['pass']} vacuous={c[n]['vacuous']}"
                       for n in IDENTITY_CHECKS)
    verdict(2, ok, detail)


def test_criterion_3_nmid_wedge_gap(verdict):
    f = Filtration.trivial(2, 2)
    tau = (1, 2)
    hit = (True, False)
    with_nmid = is_measurable(hit, join(f[1], generated(nmid_rv(tau, 1))))
    with_wedge = is_measurable(hit, join(f[1], generated(wedge_rv(tau, 1))))
    rep = check_nmid_gap(f, tau)
    ok = with_nmid and not with_wedge and 1 in rep.estimates["gap_times"]
    verdict(3, ok, f"{{tau=1}} measurable with nmid: {with_nmid}, with min: {with_wedge}")


def test_criterion_4_ordering_algebra(verdict):
    taus = [(1, 2, 3), (2, 3, 1), (3, 1, 2)]
    stats = order_statistics(taus)
    example = stats == [(1, 1, 1), (2, 2, 2), (3, 3, 3)]
    g = enlarge_multi(Filtration.trivial(3, 3), taus)
    rng = random.Random(20240601)
    grid = [0, 1, 2, 3, 4, 5, float("inf")]
    bad = 0
    for _ in range(10_000):
        a = [rng.choice(grid) for _ in range(rng.randint(1, 6))]
        b = rng.choice(grid)
        up, cut = rank(a).sorted, rank([nmid(x, b) for x in a]).sorted
        bad += sum(1 for j in range(len(a)) if b >= up[j] and cut[j] != up[j])
    ok = example and bad == 0 and all(len(g[t].blocks) == 3 for t in (1, 2, 3))
    verdict(4, ok, f"order statistics {stats}; identity violations on 10^4 tuples: {bad}")


def test_criterion_5_density_formulas(verdict):
    rep = density_fuzz(500, seed=0)
    c = counts(rep)
    detail = ", ".join(f"{n} {c[n]['pass']}/500" for n in sorted(c))
    verdict(5, rep.verdict == PASS and all(c[n]["pass"] == 500 for n in c), detail)


def test_criterion_6_hypothesis_classes(verdict):
    rep = cox_fuzz(500, seed=0, max_outcomes=16)
    built = future_time_model()
    counter = hypothesis_H_check(built.filtration, enlarge_single(built.filtration, built.times[0]), built.space)
    ok = rep.verdict == PASS and counter.verdict == FAIL and counter.witness is not None
    verdict(6, ok, f"Cox models {counts(rep)['hypothesis-H']['pass']}/500 immersed; "
                   f"future-dependent time: {counter.verdict}, witness atom {counter.witness.get('atom')}")


def test_criterion_7_barlow(verdict):
    start = time.perf_counter()
    e = simulate_paths(EnsembleConfig(100_000, 1e-3, 2.0, seed=0, kind="rademacher"))
    rep = barlow_statistics(e, tolerance=0.02)
    seconds = time.perf_counter() - start
    est, se = rep.estimates["conditional_at_tau"], rep.estimates["conditional_at_tau_se"]
    breaks = rep.estimates["sign_constancy_breaks"]
    ok = abs(est - 0.5) <= 0.02 and breaks == 0 and rep.verdict == PASS and seconds <= 120
    verdict(7, ok, f"P(sign +1 | before tau) = {est:.4f} +- {se:.4f} (target 0.5 +- 0.02); "
                   f"constancy breaks {breaks}; {seconds:.0f} s (limit 120 s)")


@pytest.fixture(scope="module")
def natural_run():
    start = time.perf_counter()
    euler = euler_convergence(NaturalModelSpec(n_kind="gbm", f_kind="zero"), n_paths=4000,
                              dts=(4e-3, 2e-3, 1e-3), seed=0)
    spec = NaturalModelSpec()
    e = simulate_paths(EnsembleConfig(100_000, 0.01, 1.0, seed=0))
    study = run_study(spec, e)
    proj = projection_condition_estimate(spec, e, study=study)
    drift = drift_orthogonality(spec, e, study=study)
    return euler, proj, drift, time.perf_counter() - start


def test_criterion_8_natural_model(natural_run, verdict):
    euler, proj, drift, seconds = natural_run
    rel = euler.estimates["relative_error"]
    errs = [rel[d] for d in (4e-3, 2e-3, 1e-3)]
    euler_ok = errs[-1] <= 0.05 and errs[0] > errs[1] > errs[2]
    proj_ok = proj.estimates["sup_abs_z"] <= 3
    drift_ok = drift.estimates["sup_abs_z"] <= 3
    detail = (f"Euler relative error {', '.join(f'{x:.2e}' for x in errs)}; "
              f"projection sup|z| {proj.estimates['sup_abs_z']:.2f}; drift sup|z| {drift.estimates['sup_abs_z']:.2f}; "
              f"{seconds:.0f} s (limit 300 s)")
    verdict(8, euler_ok and proj_ok and drift_ok and seconds <= 300, detail)
