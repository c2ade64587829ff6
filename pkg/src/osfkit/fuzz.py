"""Seeded random finite models and the identity suite run over them.

Model ``k`` of a stream is drawn from its own generator seeded by
``(seed, k)``, so a stream is reproducible and a prefix does not depend on
how many models are requested.  A failing model is shrunk greedily
before it is reported.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import product as iter_product

from .checks import FUZZ_SUITE, FiniteContext, run_checks
from .core import INF, Filtration, FiniteSpace, Partition, Process, canonical_labels
from .enlargement import MarkedTime, enlarge_marked, enlarge_multi
from .models import (
    CoxSpec,
    DensityModel,
    MarkedDensityModel,
    build_cox,
    build_density_model,
    build_marked_density_model,
    density_formula_report,
    hypothesis_H_check,
    marked_density_formula_report,
)
from .reports import FAIL, PASS, VACUOUS, CheckReport
from .splitting import generic_adapted_process, split_marked, split_multi, split_report

ALPHABET = ("a", "b", "c", "d", "e")


@dataclass(frozen=True)
class FuzzBounds:
    max_outcomes: int = 32
    max_T: int = 8
    max_times: int = 3
    max_alphabet: int = 3

    def __post_init__(self):
        if self.max_outcomes < 1 or self.max_T < 0 or self.max_times < 1 or self.max_alphabet < 1:
            raise ValueError("fuzz bounds must allow at least one outcome, one time and one mark")
        if self.max_alphabet > len(ALPHABET):
            raise ValueError(f"at most {len(ALPHABET)} marks are supported")


@dataclass(frozen=True)
class FuzzModel:
    """Plain data: integer weights, partition labels per time, times, marks and extra stopping times."""

    weights: tuple
    labels: tuple
    taus: tuple
    marks: tuple
    alphabet: tuple
    stopping: tuple = ()

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def T(self) -> int:
        return len(self.labels) - 1

    def space(self) -> FiniteSpace:
        total = sum(self.weights)
        return FiniteSpace(tuple(range(self.n)), tuple(Fraction(w, total) for w in self.weights))

    def filtration(self) -> Filtration:
        return Filtration(Partition(lab) for lab in self.labels)

    def context(self) -> FiniteContext:
        mtaus = [MarkedTime(tau, mk, self.alphabet) for tau, mk in zip(self.taus, self.marks)]
        return FiniteContext(self.space(), self.filtration(), [tuple(t) for t in self.taus], mtaus,
                             [tuple(r) for r in self.stopping])

    def to_dict(self) -> dict:
        return {"weights": list(self.weights), "labels": [list(x) for x in self.labels],
                "taus": [list(t) for t in self.taus], "marks": [list(m) for m in self.marks],
                "alphabet": list(self.alphabet), "stopping": [list(r) for r in self.stopping]}


def _model_rng(seed: int, k: int, family: str) -> random.Random:
    return random.Random(f"{family}:{seed}:{k}")


def _random_filtration_labels(rng: random.Random, n: int, T: int) -> list:
    labels = [0] * n if rng.random() < 0.6 else [rng.randrange(2) for _ in range(n)]
    out = [tuple(canonical_labels(labels))]
    for _ in range(T):
        p = rng.choice((0.0, 0.3, 0.6, 1.0))
        nxt = [(lab, rng.randrange(2) if rng.random() < p else 0) for lab in out[-1]]
        out.append(tuple(canonical_labels(nxt)))
    return out


def _stopping_from_labels(rng: random.Random, labels: list) -> tuple:
    """Hitting time of a random adapted set."""
    n, T = len(labels[0]), len(labels) - 1
    r = [INF] * n
    for t in range(T + 1):
        blocks = sorted(set(labels[t]))
        chosen = {b for b in blocks if rng.random() < 0.3}
        for w in range(n):
            if r[w] == INF and labels[t][w] in chosen:
                r[w] = t
    return tuple(r)


def _random_time(rng: random.Random, labels: list) -> tuple:
    n, T = len(labels[0]), len(labels) - 1
    kind = rng.random()
    if kind < 0.25:
        return _stopping_from_labels(rng, labels)
    if kind < 0.35:
        v = rng.choice(list(range(T + 1)) + [INF])
        return (v,) * n
    p_inf = rng.choice((0.0, 0.2, 0.5))
    return tuple(INF if rng.random() < p_inf else rng.randint(0, T) for _ in range(n))


def random_finite_model(seed: int, k: int, bounds: FuzzBounds = FuzzBounds()) -> FuzzModel:
    rng = _model_rng(seed, k, "finite")
    n = rng.randint(1, bounds.max_outcomes)
    T = rng.randint(min(1, bounds.max_T), bounds.max_T)
    labels = _random_filtration_labels(rng, n, T)
    weights = tuple(rng.randint(1, 4) for _ in range(n)) if rng.random() < 0.7 else (1,) * n
    m = rng.randint(1, bounds.max_times)
    taus = tuple(_random_time(rng, labels) for _ in range(m))
    alphabet = ALPHABET[:rng.randint(1, bounds.max_alphabet)]
    marks = tuple(tuple(rng.choice(alphabet) for _ in range(n)) for _ in range(m))
    stopping = (_stopping_from_labels(rng, labels),)
    stopping += (tuple(min(a, b) for a, b in zip(taus[0], stopping[0])),
                 tuple(max(a, b) for a, b in zip(taus[0], stopping[0])))
    return FuzzModel(weights, tuple(labels), taus, marks, alphabet, stopping)


def run_suite(model: FuzzModel, checks=FUZZ_SUITE) -> list[CheckReport]:
    """Run ``checks`` on one model; an exception counts as a failing report."""
    ctx = model.context()
    out = []
    for name in checks:
        try:
            out.extend(run_checks(ctx, [name]))
        except Exception as exc:  # engine errors are findings, not crashes
            rep = CheckReport(name)
            rep.add(FAIL, error=f"{type(exc).__name__}: {exc}")
            out.append(rep.settle())
    return out


def _failing(model: FuzzModel, checks) -> list[str]:
    return [r.name for r in run_suite(model, checks) if r.verdict == FAIL]


# shrinking


def _drop_outcome(m: FuzzModel, w: int) -> FuzzModel:
    keep = [i for i in range(m.n) if i != w]
    pick = lambda seq: tuple(seq[i] for i in keep)
    return FuzzModel(pick(m.weights), tuple(tuple(canonical_labels(pick(lab))) for lab in m.labels),
                     tuple(pick(t) for t in m.taus), tuple(pick(x) for x in m.marks), m.alphabet,
                     tuple(pick(r) for r in m.stopping))


def _drop_last_time(m: FuzzModel) -> FuzzModel:
    T = m.T - 1
    cut = lambda seq: tuple(INF if v == INF or v > T else v for v in seq)
    return FuzzModel(m.weights, m.labels[:-1], tuple(cut(t) for t in m.taus), m.marks, m.alphabet,
                     tuple(cut(r) for r in m.stopping))


def _candidates(m: FuzzModel):
    for w in range(m.n) if m.n > 1 else ():
        yield _drop_outcome(m, w)
    if m.T > 0:
        yield _drop_last_time(m)
    if len(m.taus) > 1:
        for i in range(len(m.taus)):
            yield replace(m, taus=m.taus[:i] + m.taus[i + 1:], marks=m.marks[:i] + m.marks[i + 1:])
    if len(set(m.weights)) > 1:
        yield replace(m, weights=(1,) * m.n)
    if len(m.alphabet) > 1:
        yield replace(m, alphabet=m.alphabet[:1], marks=tuple((m.alphabet[0],) * m.n for _ in m.marks))
    if m.stopping:
        yield replace(m, stopping=())


def shrink(model: FuzzModel, checks=FUZZ_SUITE, max_rounds: int = 500) -> tuple[FuzzModel, list[str]]:
    """Greedy minimization: accept any simplification that still fails one of the same checks."""
    target = set(_failing(model, checks))
    if not target:
        return model, []
    names = sorted(target)
    for _ in range(max_rounds):
        for cand in _candidates(model):
            still = set(_failing(cand, names)) & target
            if still:
                model, target, names = cand, still, sorted(still)
                break
        else:
            break
    return model, sorted(target)


def _summarize(name, counts, failures, n_models, elapsed, seed) -> CheckReport:
    rep = CheckReport(name)
    for check, c in sorted(counts.items()):
        verdict = FAIL if c[FAIL] else (PASS if c[PASS] else VACUOUS)
        rep.add(verdict, check=check, **{k: v for k, v in c.items()})
    if failures:
        rep.witness = failures[0]
    rep.estimates.update({"models": n_models, "failing_models": len(failures), "seconds": elapsed, "seed": seed})
    return rep.settle()


def random_model_fuzz(n_models: int = 1000, seed: int = 0, bounds: FuzzBounds = FuzzBounds(),
                      checks=FUZZ_SUITE, shrink_failures: bool = True, max_failures: int = 5) -> CheckReport:
    """Draw ``n_models`` finite models and run the identity suite on each."""
    start = time.perf_counter()
    counts = {c: {PASS: 0, FAIL: 0, VACUOUS: 0} for c in checks}
    failures = []
    for k in range(n_models):
        model = random_finite_model(seed, k, bounds)
        reps = run_suite(model, checks)
        bad = []
        for r in reps:
            counts[r.name][r.verdict] += 1
            if r.verdict == FAIL:
                bad.append(r.name)
        if bad and len(failures) < max_failures:
            small, still = shrink(model, checks) if shrink_failures else (model, bad)
            failures.append({"index": k, "checks": bad, "shrunk_checks": still, "model": small.to_dict()})
    return _summarize("fuzz", counts, failures, n_models, time.perf_counter() - start, seed)


# density and Cox model generators


def _random_base(rng: random.Random, max_outcomes: int, max_T: int):
    n = rng.randint(1, max_outcomes)
    T = rng.randint(min(1, max_T), max_T)
    labels = _random_filtration_labels(rng, n, T)
    w = [rng.randint(1, 4) for _ in range(n)]
    space = FiniteSpace(tuple(range(n)), tuple(Fraction(x, sum(w)) for x in w))
    return space, Filtration(Partition(lab) for lab in labels)


def _random_weights(rng: random.Random, keys) -> dict:
    raw = {k: rng.randint(1, 5) for k in keys}
    total = sum(raw.values())
    return {k: Fraction(v, total) for k, v in raw.items()}


def _normalized_density(rng, base, f, tuples, ref):
    """Random nonnegative terminal-measurable density, normalized per terminal block."""
    terminal = f[f.T]
    gamma = {}
    for block in terminal.blocks:
        raw = {a: (0 if rng.random() < 0.25 else rng.randint(1, 6)) for a in tuples}
        if not any(raw.values()):
            raw[tuples[0]] = 1
        total = sum(raw[a] * ref(a) for a in tuples)
        for a in tuples:
            for w in block:
                gamma[(a, w)] = Fraction(raw[a]) / total
    return gamma


def random_density_model(seed: int, k: int, max_outcomes: int = 8, max_T: int = 4, m: int = 1) -> DensityModel:
    rng = _model_rng(seed, k, f"density-{m}")
    base, f = _random_base(rng, max_outcomes, max_T)
    support = [u for u in list(range(f.T + 1)) + [INF] if rng.random() < (0.7 if m == 1 else 0.4)] or [INF]
    mu = _random_weights(rng, support)
    tuples = list(iter_product(sorted(support, key=_support_key), repeat=m))
    weight = lambda a: _prod(mu[u] for u in a)
    gamma = _normalized_density(rng, base, f, tuples, weight)
    return DensityModel(base, f, mu, gamma, m)


def random_marked_density_model(seed: int, k: int, max_outcomes: int = 8, max_T: int = 4,
                                max_alphabet: int = 3, m: int = 1) -> MarkedDensityModel:
    rng = _model_rng(seed, k, f"marked-density-{m}")
    base, f = _random_base(rng, max_outcomes, max_T)
    alphabet = ALPHABET[:rng.randint(1, max_alphabet)]
    keep = 0.6 if m == 1 else 0.25
    pairs = [(x, u) for x in alphabet for u in list(range(f.T + 1)) + [INF] if rng.random() < keep]
    pairs = pairs or [(alphabet[0], INF)]
    nu = _random_weights(rng, pairs)
    tuples = list(iter_product(sorted(pairs, key=lambda xu: (_support_key(xu[1]), xu[0])), repeat=m))
    weight = lambda a: _prod(nu[p] for p in a)
    gamma = _normalized_density(rng, base, f, tuples, weight)
    return MarkedDensityModel(base, f, nu, gamma, alphabet, m)


def _support_key(u):
    return (1, 0) if u == INF else (0, u)


def _prod(values):
    out = Fraction(1)
    for v in values:
        out *= v
    return out


def _random_payoff_table(rng, keys, n):
    return {(key, w): Fraction(rng.randint(-5, 5), rng.randint(1, 3)) for key in keys for w in range(n)}


def _split_on_built(name, built, marked):
    f = built.filtration
    if marked:
        g = enlarge_marked(f, built.times)
        y = generic_adapted_process(g)
        return split_report(name, y, split_marked(y, f, built.times), f)
    g = enlarge_multi(f, built.times)
    y = generic_adapted_process(g)
    return split_report(name, y, split_multi(y, f, built.times), f)


def density_fuzz(n_models: int = 200, seed: int = 0, max_outcomes: int = 8, max_T: int = 4,
                 max_times: int = 3) -> CheckReport:
    """Density formulas against brute force, and exact splits on density models with up to ``max_times`` times."""
    start = time.perf_counter()
    names = ("density-formula", "marked-density-formula", "density-splitting", "marked-density-splitting")
    counts = {c: {PASS: 0, FAIL: 0, VACUOUS: 0} for c in names}
    failures = []

    def record(rep, k):
        counts[rep.name][rep.verdict] += 1
        if rep.verdict == FAIL and len(failures) < 5:
            failures.append({"index": k, "check": rep.name, "witness": rep.witness})

    for k in range(n_models):
        dm = random_density_model(seed, k, max_outcomes, max_T)
        rng = _model_rng(seed, k, "density-payoff")
        table = _random_payoff_table(rng, dm.mu, dm.base.n)
        record(density_formula_report(dm, [lambda u, w, tb=table: tb[(u, w)], lambda u, w: Fraction(1)]), k)
        mdm = random_marked_density_model(seed, k, max_outcomes, max_T)
        table = _random_payoff_table(rng, mdm.nu, mdm.base.n)
        record(marked_density_formula_report(mdm, [lambda x, u, w, tb=table: tb[((x, u), w)]]), k)
        m = 1 + k % max_times
        small = (max_outcomes, max_T) if m == 1 else (min(max_outcomes, 4), min(max_T, 3))
        built = build_density_model(random_density_model(seed, k, *small, m=m))
        record(_split_on_built("density-splitting", built, False), k)
        built = build_marked_density_model(random_marked_density_model(seed, k, *small, m=m))
        record(_split_on_built("marked-density-splitting", built, True), k)
    return _summarize("density-fuzz", counts, failures, n_models, time.perf_counter() - start, seed)


def random_cox_model(seed: int, k: int, max_outcomes: int = 8, max_T: int = 4):
    rng = _model_rng(seed, k, "cox")
    base, f = _random_base(rng, max_outcomes, max_T)
    rows = [[Fraction(0)] * base.n]
    for t in range(1, f.T + 1):
        inc = {b: Fraction(rng.randint(0, 2), 2) for b in set(f[t].labels)}
        rows.append([rows[-1][w] + inc[f[t].labels[w]] for w in range(base.n)])
    hazard = Process(tuple(tuple(r) for r in rows))
    law = _random_weights(rng, sorted({Fraction(rng.randint(1, 4), 2) for _ in range(rng.randint(1, 3))}))
    return CoxSpec(hazard, law), f, base


def cox_fuzz(n_models: int = 200, seed: int = 0, max_outcomes: int = 8, max_T: int = 4) -> CheckReport:
    """Every Cox construction satisfies the immersion property."""
    start = time.perf_counter()
    counts = {"hypothesis-H": {PASS: 0, FAIL: 0, VACUOUS: 0}}
    failures = []
    for k in range(n_models):
        spec, f, base = random_cox_model(seed, k, max_outcomes, max_T)
        built = build_cox(spec, f, base)
        rep = hypothesis_H_check(built.filtration, enlarge_multi(built.filtration, built.times), built.space)
        counts[rep.name][rep.verdict] += 1
        if rep.verdict == FAIL:
            failures.append({"index": k, "witness": rep.witness})
    return _summarize("cox-fuzz", counts, failures, n_models, time.perf_counter() - start, seed)
