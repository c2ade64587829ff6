"""Named identity checks over a finite model, shared by scenarios and the fuzzer."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .core import INF, FiniteSpace, Filtration, Process, cond_exp, indicator, is_measurable
from .enlargement import enlarge_marked, enlarge_multi, enlarge_single, wedge_rv
from .models import (
    MeasureChange,
    covering_report,
    density_formula_report,
    hypothesis_H_check,
    marked_density_formula_report,
    verify_sH_measure,
)
from .reports import FAIL, PASS, VACUOUS, CheckReport, merge
from .splitting import (
    MeasurabilityError,
    check_F_tau_equality,
    check_graph_criterion,
    check_nmid_gap,
    check_pre_default_trace,
    check_right_continuity_identity,
    eval_param_at,
    generic_adapted_process,
    ordered_enlargement_report,
    reconstruct_predictable,
    split_marked,
    split_multi,
    split_multi_inductive,
    split_predictable,
    split_report,
    split_single,
)


@dataclass
class FiniteContext:
    """A finite model with its random times and the stopping times to probe.

    ``taus`` holds the times of the multi-time checks; the single-time
    checks use ``taus[0]``.  ``stopping`` lists extra stopping times of the
    enlarged filtration; the time itself and ``min(tau, t)`` for every grid
    ``t`` are always probed.
    """

    space: FiniteSpace
    filtration: Filtration
    taus: list
    mtaus: list | None = None
    stopping: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def tau(self) -> tuple:
        return tuple(self.taus[0])

    def probe_times(self) -> list:
        T, n = self.filtration.T, self.filtration.n
        out = [self.tau] + [wedge_rv(self.tau, t) for t in range(T + 1)] + [(INF,) * n]
        out += [tuple(r) for r in self.stopping]
        seen, uniq = set(), []
        for r in out:
            if r not in seen:
                seen.add(r)
                uniq.append(r)
        return uniq


def _no_times(name):
    rep = CheckReport(name)
    rep.add(VACUOUS, on="no random time")
    return rep.settle()


def osf_single(ctx: FiniteContext) -> CheckReport:
    g = enlarge_single(ctx.filtration, ctx.tau)
    y = generic_adapted_process(g)
    return split_report("osf-single", y, split_single(y, ctx.filtration, ctx.tau, ctx.space), ctx.filtration)


def osf_predictable(ctx: FiniteContext) -> CheckReport:
    f, tau = ctx.filtration, ctx.tau
    g = enlarge_single(f, tau)
    y = Process.from_function(lambda t, w: Fraction(f[0].labels[w]) if t == 0 else Fraction(1000 * t + g[t - 1].labels[w]),
                              f.T, f.n)
    pre, post = split_predictable(y, f, tau)
    rec = reconstruct_predictable(pre, post, tau)
    rep = CheckReport("osf-predictable")
    errs = [(t, w) for t in range(f.T + 1) for w in range(f.n) if rec[t][w] != y[t][w]]
    rep.add(FAIL if errs else PASS, item="reconstruction", mismatches=errs[:5])
    bad = [("pre", t) for t in range(1, f.T + 1) if not is_measurable(pre[t], f[t - 1])]
    bad += [(u, t) for u, s in post.slices.items() for t in range(1, f.T + 1) if not is_measurable(s[t], f[t - 1])]
    rep.add(FAIL if bad else PASS, item="components predictable", offending=bad[:5])
    return rep.settle()


def osf_multi(ctx: FiniteContext) -> CheckReport:
    g = enlarge_multi(ctx.filtration, ctx.taus)
    y = generic_adapted_process(g)
    return split_report("osf-multi", y, split_multi(y, ctx.filtration, ctx.taus), ctx.filtration)


def osf_inductive(ctx: FiniteContext) -> CheckReport:
    """Inductive construction against the direct read-off, compared on carrying sets only."""
    f = ctx.filtration
    g = enlarge_multi(f, ctx.taus)
    y = generic_adapted_process(g)
    ind = split_multi_inductive(y, f, ctx.taus, ctx.space)
    rep = split_report("osf-inductive", y, ind, f)
    direct = split_multi(y, f, ctx.taus)
    diff = []
    for t in range(f.T + 1):
        for w in range(f.n):
            i, p = direct.key(t, w)
            if direct.components[i].value(p, t, w) != ind.components[i].value(p, t, w):
                diff.append((t, w))
    rep.add(FAIL if diff else PASS, item="agrees with direct read-off on carrying sets", mismatches=diff[:5])
    return rep.settle()


def osf_marked(ctx: FiniteContext) -> CheckReport:
    if not ctx.mtaus:
        return _no_times("osf-marked")
    g = enlarge_marked(ctx.filtration, ctx.mtaus)
    y = generic_adapted_process(g)
    return split_report("osf-marked", y, split_marked(y, ctx.filtration, ctx.mtaus), ctx.filtration)


def pre_default_projection(ctx: FiniteContext) -> CheckReport:
    """Pre-default part of ``E[xi | G_t]`` equals ``E[xi 1{t<tau} | F_t] / P[t<tau | F_t]``."""
    f, tau, space = ctx.filtration, ctx.tau, ctx.space
    g = enlarge_single(f, tau)
    xi = tuple(Fraction(w * w + 1) for w in range(f.n))
    y = Process(tuple(cond_exp(xi, g[t], space) for t in range(f.T + 1)))
    pre = split_single(y, f, tau, space).pre
    rep = CheckReport("pre-default-projection")
    for t in range(f.T + 1):
        alive = indicator(t < v for v in tau)
        num = cond_exp(tuple(a * x for a, x in zip(alive, xi)), f[t], space)
        den = cond_exp(alive, f[t], space)
        bad = [w for w in range(f.n) if den[w] > 0 and pre[t][w] != num[w] / den[w]]
        if not any(alive):
            rep.add(VACUOUS, t=t)
        else:
            rep.add(FAIL if bad else PASS, t=t, outcomes=bad[:5])
    return rep.settle()


def right_continuity(ctx):
    return check_right_continuity_identity(ctx.filtration, ctx.tau)


def nmid_gap(ctx):
    return check_nmid_gap(ctx.filtration, ctx.tau)


def f_tau(ctx):
    return check_F_tau_equality(ctx.filtration, ctx.tau)


def _over_probes(name, fn, ctx):
    reps = []
    for r in ctx.probe_times():
        rep = fn(ctx.filtration, ctx.tau, r)
        for d in rep.details:
            d["r"] = list(r)
        reps.append(rep)
    return merge(name, reps)


def graph_criterion(ctx):
    return _over_probes("graph-criterion", check_graph_criterion, ctx)


def pre_default_trace(ctx):
    return _over_probes("pre-default-trace", check_pre_default_trace, ctx)


def eval_param(ctx: FiniteContext) -> CheckReport:
    """Post-default component evaluated at ``(tau, r)`` is measurable there and recovers ``y_r``."""
    f, tau = ctx.filtration, ctx.tau
    g = enlarge_single(f, tau)
    y = generic_adapted_process(g)
    post = split_single(y, f, tau, ctx.space).post
    rep = CheckReport("eval-param")
    for r in ctx.probe_times():
        after = tuple(u <= s != INF for u, s in zip(tau, r))
        if not any(after):
            rep.add(VACUOUS, r=list(r))
            continue
        try:
            val = eval_param_at(post, tau, r, f)
        except MeasurabilityError as exc:
            rep.add(FAIL, r=list(r), error=str(exc))
            continue
        bad = [w for w in range(f.n) if after[w] and val[w] != y[r[w]][w]]
        rep.add(FAIL if bad else PASS, r=list(r), outcomes=bad[:5])
    return rep.settle()


def ordered_enlargement(ctx):
    return ordered_enlargement_report(ctx.filtration, ctx.taus)


def hypothesis_h(ctx: FiniteContext) -> CheckReport:
    g = enlarge_multi(ctx.filtration, ctx.taus)
    return hypothesis_H_check(ctx.filtration, g, ctx.space)


def density_formula(ctx: FiniteContext) -> CheckReport:
    dm = ctx.extra.get("density_model")
    if dm is None:
        return _no_times("density-formula")
    return density_formula_report(dm, ctx.extra.get("payoffs") or [lambda u, w: Fraction(1) if u == INF else Fraction(u + w)])


def marked_density_formula(ctx: FiniteContext) -> CheckReport:
    mdm = ctx.extra.get("marked_density_model")
    if mdm is None:
        return _no_times("marked-density-formula")
    alpha = {x: k for k, x in enumerate(mdm.alphabet)}
    default = [lambda x, u, w: Fraction(alpha[x] + 1) * (Fraction(7) if u == INF else Fraction(u + 1)) + w]
    return marked_density_formula_report(mdm, ctx.extra.get("marked_payoffs") or default)


def covering(ctx: FiniteContext) -> CheckReport:
    fam = ctx.extra.get("covering")
    if fam is None:
        return _no_times("covering")
    return covering_report(fam, ctx.tau, ctx.filtration.T, ctx.filtration)


def sh_measure(ctx: FiniteContext) -> CheckReport:
    item = ctx.extra.get("sh_measure")
    if item is None:
        return _no_times("sh-measure")
    g = enlarge_multi(ctx.filtration, ctx.taus)
    return verify_sH_measure(MeasureChange(item["density"]), item["s"], item["t"], ctx.filtration, g, ctx.space)


@dataclass(frozen=True)
class CheckSpec:
    name: str
    description: str
    anchor: str
    run: Callable
    needs: str = "time"


CATALOG = {c.name: c for c in (
    CheckSpec("osf-single", "exact split of every adapted process at one time", "Definition df_splitting", osf_single),
    CheckSpec("osf-predictable", "predictable split with predictable components", "Lemma predictableSPLT",
              osf_predictable),
    CheckSpec("osf-multi", "exact split across the ordered times", "Definition df_1", osf_multi),
    CheckSpec("osf-inductive", "inductive split agrees with the direct read-off", "Theorem GmO", osf_inductive),
    CheckSpec("osf-marked", "exact split with stopped mark paths as parameters", "Definition df-marked-times",
              osf_marked, "marks"),
    CheckSpec("pre-default-projection", "pre-default part equals the survival-weighted ratio",
              "Theorem beforedefault", pre_default_projection),
    CheckSpec("right-continuity", "right-limit enlargement equals F_t joined with nmid(tau, t)",
              "Theorem right-continuity", right_continuity),
    CheckSpec("nmid-gap", "{tau = t} is seen through nmid(tau, t); gaps for min(tau, t) recorded",
              "Remark after Theorem right-continuity", nmid_gap),
    CheckSpec("f-tau", "F_tau and G_tau agree on {tau < inf}", "Theorem F-tau", f_tau),
    CheckSpec("graph-criterion", "G_r equals sigma(nmid(tau, r)) joined with F_r on {r < inf}", "Theorem graph",
              graph_criterion),
    CheckSpec("pre-default-trace", "G_r equals F_r on {r < tau}", "Corollary R<tau", pre_default_trace),
    CheckSpec("eval-param", "parametered component evaluated at (tau, r) is measurable and exact",
              "Lemma Ytau", eval_param),
    CheckSpec("ordered-enlargement", "ordered times generate a coarser enlargement", "Lemma re-ordering",
              ordered_enlargement),
    CheckSpec("hypothesis-H", "F-martingales remain martingales in the enlarged filtration", "Theorem HyH",
              hypothesis_h),
    CheckSpec("density-formula", "explicit conditional expectation under a density", "Lemma one-tau-density",
              density_formula, "density"),
    CheckSpec("marked-density-formula", "explicit conditional expectation under a marked density",
              "Lemma one-tau-density-marked", marked_density_formula, "marked-density"),
    CheckSpec("covering", "interval family covers the post-default region", "Theorem mrt_after_default", covering,
              "covering"),
    CheckSpec("sh-measure", "stopped F-martingale increments are martingales under the new measure",
              "Definition Hmeasure", sh_measure, "sh-measure"),
)}

MONTE_CARLO_CHECKS = {
    "barlow": ("last-zero sign is unpredictable before and certain after", "Barlow honest-time example"),
    "natural-euler": ("Euler solution converges to the closed-form exponential", "natural_u"),
    "natural-projection": ("frequency of survival matches Z_t across path bins", "Problem P* projection condition"),
    "natural-drift": ("drift-corrected increments are orthogonal to pre-t functionals", "decomposition-formula"),
    "natural-monotone": ("u -> M^u is nondecreasing up to a discretization budget", "natural_u"),
}

FUZZ_SUITE = ("osf-single", "osf-predictable", "osf-multi", "osf-inductive", "osf-marked", "pre-default-projection",
              "right-continuity", "nmid-gap", "f-tau", "graph-criterion", "pre-default-trace", "eval-param",
              "ordered-enlargement")


def list_checks() -> list[dict]:
    """Name, description and anchor of every check, in a fixed order."""
    out = [{"name": c.name, "description": c.description, "anchor": c.anchor} for c in CATALOG.values()]
    out += [{"name": k, "description": d, "anchor": a} for k, (d, a) in MONTE_CARLO_CHECKS.items()]
    return out


def run_checks(ctx: FiniteContext, names) -> list[CheckReport]:
    reps = []
    for name in names:
        if name not in CATALOG:
            raise KeyError(f"unknown check {name!r}")
        reps.append(CATALOG[name].run(ctx))
    return reps
