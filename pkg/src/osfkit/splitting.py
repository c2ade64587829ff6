"""Splitting decompositions of processes adapted to an enlarged filtration.

A process adapted to the progressive enlargement of ``F`` by a random time
is rewritten as an ``F``-adapted part used before the time together with a
family of ``F``-adapted processes, indexed by the observed value of the
time, used from the time on.  On finite models the components are read off
block by block: on an ``F_t``-block the set of outcomes sharing the same
observed history is a single enlarged-filtration atom, so the process is
constant there.

Component slices are canonically zero outside the atoms that carry them.
Two decompositions of the same process may differ off those atoms; only
values on carrying events are meaningful.

The ``check_*`` functions recompute each sigma-algebra identity from its
defining construction and return a :class:`~osfkit.reports.CheckReport`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Sequence

from .core import (INF, DimensionError, Filtration, FiniteSpace, Partition, Process,
                   adaptedness_defect, check_time_values, cond_exp, generated, is_adapted,
                   is_measurable, join, meet, sigma_at_random_time, sigma_at_stopping_time,
                   StoppingTimeError, stopping_time_defect)
from .enlargement import (MarkedTime, enlarge_marked, enlarge_multi, enlarge_single,
                          enlarge_wedge, interval_index, nmid, nmid_rv, order_statistic_function,
                          sigma_with_bounds, stopped_path, wedge_rv)
from .reports import FAIL, PASS, VACUOUS, CheckReport

ZERO = Fraction(0)


class AdaptednessError(ValueError):
    """The process is not measurable on an atom of the relevant filtration."""

    def __init__(self, t, block, message=None):
        super().__init__(message or f"process is not constant on block {list(block)} at time {t}")
        self.t = t
        self.block = tuple(block)


class ParameterError(KeyError):
    """A parametered process was evaluated at a parameter it does not define."""


class MeasurabilityError(ValueError):
    pass


def _zero_process(T: int, n: int) -> Process:
    return Process(((ZERO,) * n,) * (T + 1))


@dataclass(frozen=True, eq=False)
class ParamProcess:
    """A family of processes indexed by a hashable parameter.

    Indexing with ``[p]`` is strict; :meth:`get` returns the zero process for
    parameters that are not stored (the canonical off-support value).
    """

    slices: dict
    T: int
    n: int

    def __getitem__(self, p) -> Process:
        try:
            return self.slices[p]
        except KeyError:
            raise ParameterError(p) from None

    def get(self, p) -> Process:
        s = self.slices.get(p)
        return s if s is not None else _zero_process(self.T, self.n)

    def value(self, p, t, w):
        s = self.slices.get(p)
        return ZERO if s is None else s[t][w]

    @property
    def params(self) -> tuple:
        return tuple(self.slices)

    @classmethod
    def from_function(cls, fn, params, T: int, n: int) -> "ParamProcess":
        """``fn(p, t, w)`` evaluated for every parameter in ``params``."""
        return cls({p: Process.from_function(lambda t, w, p=p: fn(p, t, w), T, n) for p in params}, T, n)

    def is_adapted(self, f: Filtration) -> bool:
        return all(is_adapted(s, f) for s in self.slices.values())


@dataclass(frozen=True)
class SplitSingle:
    pre: Process
    post: ParamProcess
    tau: tuple

    def reconstruct(self) -> Process:
        return Process.from_function(
            lambda t, w: self.pre[t][w] if t < self.tau[w] else self.post.value(self.tau[w], t, w),
            self.pre.T, self.pre.n)


@dataclass(frozen=True)
class SplitMulti:
    components: tuple
    taus: tuple

    def key(self, t, w):
        return _multi_key(self.taus, t, w)

    def reconstruct(self) -> Process:
        c0 = self.components[0]
        return Process.from_function(
            lambda t, w: (lambda i, p: self.components[i].value(p, t, w))(*self.key(t, w)), c0.T, c0.n)


@dataclass(frozen=True)
class SplitMarked:
    components: tuple
    mtaus: tuple

    def key(self, t, w):
        return _marked_key(self.mtaus, self.components[0].T, t, w)

    def reconstruct(self) -> Process:
        c0 = self.components[0]
        return Process.from_function(
            lambda t, w: (lambda i, p: self.components[i].value(p, t, w))(*self.key(t, w)), c0.T, c0.n)


def _multi_key(taus, t, w):
    """Interval index ``i`` with ``sigma_i <= t < sigma_{i+1}`` and parameter ``(nmid(tau_h, sigma_i))_h``."""
    vals = [tau[w] for tau in taus]
    i = interval_index(vals, t)
    s = 0 if i == 0 else order_statistic_function(i, vals)
    return i, tuple(nmid(v, s) for v in vals)


def _marked_key(mtaus, T, t, w):
    vals = [mt.time[w] for mt in mtaus]
    i = interval_index(vals, t)
    s = 0 if i == 0 else order_statistic_function(i, vals)
    return i, tuple(stopped_path(mt, w, s, T) for mt in mtaus)


def _require_adapted(y: Process, g: Filtration):
    bad = adaptedness_defect(y, g)
    if bad is not None:
        raise AdaptednessError(*bad)


def _read_off(y: Process, f: Filtration, g: Filtration, key, n_components: int) -> list[ParamProcess]:
    """Fill component slices from the common value of ``y`` on each carrying set.

    ``key(t, w)`` returns ``(component, parameter)``.  Outcomes of one
    ``f[t]``-block sharing a key must form a single ``g[t]``-atom.
    """
    T, n = f.T, f.n
    rows: list[dict] = [{} for _ in range(n_components)]
    for t in range(T + 1):
        labels = f[t].labels
        blocks = f[t].blocks
        seen: dict = {}
        for w in range(n):
            i, p = key(t, w)
            k = (i, p, labels[w])
            v = y[t][w]
            prev = seen.setdefault(k, v)
            if prev != v:
                raise AdaptednessError(t, g[t].block_containing(w))
        for (i, p, b), v in seen.items():
            mat = rows[i].get(p)
            if mat is None:
                mat = rows[i][p] = [[ZERO] * n for _ in range(T + 1)]
            row = mat[t]
            for w in blocks[b]:
                row[w] = v
    return [ParamProcess({p: Process(tuple(map(tuple, mat))) for p, mat in comp.items()}, T, n)
            for comp in rows]


def _check_shape(y: Process, f: Filtration):
    if y.T != f.T or y.n != f.n:
        raise DimensionError(f"process of shape (T={y.T}, n={y.n}) against filtration (T={f.T}, n={f.n})")


def split_single(y: Process, f: Filtration, tau: Sequence, space: FiniteSpace) -> SplitSingle:
    """Split ``y`` at ``tau``.

    The pre-default part is the ratio ``E[y_t 1{t<tau} | F_t] / P[t<tau | F_t]``
    (zero where the denominator vanishes); the post-default slice for ``u``
    is the common value of ``y`` on each ``F_t``-block intersected with
    ``{tau = u}``, for ``u <= t``.
    """
    _check_shape(y, f)
    tau = tuple(tau)
    g = enlarge_single(f, tau)
    _require_adapted(y, g)
    T, n = f.T, f.n
    pre_rows = []
    for t in range(T + 1):
        alive = tuple(Fraction(1) if t < v else ZERO for v in tau)
        num = cond_exp(tuple(a * x for a, x in zip(alive, y[t])), f[t], space)
        den = cond_exp(alive, f[t], space)
        pre_rows.append(tuple(a / d if d > 0 else ZERO for a, d in zip(num, den)))
    post = _read_off(y, f, g, lambda t, w: (0, tau[w]) if tau[w] <= t else (1, None), 2)[0]
    slices = {u: post.get(u) for u in list(range(T + 1)) + [INF]}
    return SplitSingle(Process(tuple(pre_rows)), ParamProcess(slices, T, n), tau)


def split_predictable(y: Process, f: Filtration, tau: Sequence):
    """Predictable split ``y = Y' 1_[0,tau] + Y''(tau) 1_(tau,inf)``.

    ``y[0]`` must be ``F_0``-measurable and ``y[t]`` must be measurable for
    the enlarged filtration at ``t - 1``.  The components are predictable:
    their time-``t`` slices are ``F_{t-1}``-measurable.
    """
    _check_shape(y, f)
    tau = tuple(tau)
    g = enlarge_single(f, tau)
    T, n = f.T, f.n
    if not is_measurable(y[0], f[0]):
        raise AdaptednessError(0, next(b for b in f[0].blocks if len({y[0][i] for i in b}) > 1))
    pre = [list(y[0])] + [[ZERO] * n for _ in range(T)]
    post: dict = {}
    for t in range(1, T + 1):
        labels = f[t - 1].labels
        seen: dict = {}
        for w in range(n):
            k = ("pre" if tau[w] >= t else tau[w], labels[w])
            if seen.setdefault(k, y[t][w]) != y[t][w]:
                raise AdaptednessError(t, g[t - 1].block_containing(w),
                                       f"process at time {t} is not measurable at time {t - 1}")
        for (u, b), v in seen.items():
            if u == "pre":
                row = pre[t]
            else:
                mat = post.setdefault(u, [[ZERO] * n for _ in range(T + 1)])
                row = mat[t]
            for w in f[t - 1].blocks[b]:
                row[w] = v
    slices = {u: Process(tuple(map(tuple, post[u]))) if u in post else _zero_process(T, n)
              for u in list(range(T + 1)) + [INF]}
    return Process(tuple(map(tuple, pre))), ParamProcess(slices, T, n)


def reconstruct_predictable(pre: Process, post: ParamProcess, tau: Sequence) -> Process:
    return Process.from_function(lambda t, w: pre[t][w] if t <= tau[w] else post.value(tau[w], t, w),
                                 pre.T, pre.n)


def split_multi(y: Process, f: Filtration, taus: Sequence[Sequence]) -> SplitMulti:
    """Split ``y`` across the ordered times of ``taus`` by direct block read-off."""
    _check_shape(y, f)
    taus = tuple(tuple(tau) for tau in taus)
    g = enlarge_multi(f, taus)
    comps = _read_off(y, f, g, lambda t, w: _multi_key(taus, t, w), len(taus) + 1)
    return SplitMulti(tuple(comps), taus)


def split_marked(y: Process, f: Filtration, mtaus: Sequence[MarkedTime]) -> SplitMarked:
    """As :func:`split_multi`, with stopped mark paths as parameters."""
    _check_shape(y, f)
    mtaus = tuple(mtaus)
    g = enlarge_marked(f, mtaus)
    comps = _read_off(y, f, g, lambda t, w: _marked_key(mtaus, f.T, t, w), len(mtaus) + 1)
    return SplitMarked(tuple(comps), mtaus)


def split_multi_inductive(y: Process, f: Filtration, taus: Sequence[Sequence], space: FiniteSpace) -> SplitMulti:
    """Multi-time split built by induction on the number of times.

    Split at the last time with respect to the filtration already enlarged by
    the others, split both parts recursively, then reassemble the components
    on every parameter that occurs.
    """
    _check_shape(y, f)
    taus = tuple(tuple(tau) for tau in taus)
    T, n = f.T, f.n
    if len(taus) == 1:
        s = split_single(y, f, taus[0], space)
        return SplitMulti((ParamProcess({(INF,): s.pre}, T, n),
                           ParamProcess({(u,): p for u, p in s.post.slices.items()}, T, n)), taus)
    head, last = taus[:-1], taus[-1]
    outer = split_single(y, enlarge_multi(f, head), last, space)
    inner_pre = split_multi_inductive(outer.pre, f, head, space)
    inner_post = {u: split_multi_inductive(outer.post[u], f, head, space)
                  for u in sorted({v for v in last if v != INF})}

    def assembled(i, p, t, w):
        if p[-1] == INF:
            return inner_pre.components[i].value(p[:-1], t, w)
        s = 0 if i == 1 else order_statistic_function(i - 1, p[:-1])
        q = tuple(nmid(a, s) for a in p[:-1])
        return inner_post[p[-1]].components[i - 1].value(q, t, w)

    keys = [set() for _ in range(len(taus) + 1)]
    for t in range(T + 1):
        for w in range(n):
            i, p = _multi_key(taus, t, w)
            keys[i].add(p)
    comps = tuple(ParamProcess.from_function(lambda p, t, w, i=i: assembled(i, p, t, w), sorted(ks, key=repr), T, n)
                  for i, ks in enumerate(keys))
    return SplitMulti(comps, taus)


def eval_param_at(fp: ParamProcess, tau: Sequence, r: Sequence, f: Filtration | None = None) -> tuple:
    """``w -> fp(tau(w))[r(w)](w)`` on ``{r < inf}``, zero elsewhere.

    With ``f`` given, the result is asserted to be measurable for
    ``sigma(tau)`` joined with the sigma-algebra at ``r``.
    """
    if len(tau) != len(r):
        raise DimensionError("time and evaluation time have different lengths")
    out = []
    for w, (u, s) in enumerate(zip(tau, r)):
        if s == INF:
            out.append(ZERO)
            continue
        if not (isinstance(s, int) and 0 <= s <= fp.T):
            raise ParameterError(f"evaluation time {s!r} outside the grid")
        out.append(fp[u][s][w])
    out = tuple(out)
    if f is not None:
        target = join(generated(tau), sigma_at_random_time(r, f))
        if not is_measurable(out, target):
            raise MeasurabilityError("evaluated value is not measurable at (tau, r)")
    return out


# identity checks


def _blocks(trace: frozenset):
    return sorted(sorted(b) for b in trace)


def _compare_traces(report: CheckReport, left: Partition, right: Partition, event, **info):
    a, b = left.trace(event), right.trace(event)
    if not any(event):
        report.add(VACUOUS, **info)
    elif a == b:
        report.add(PASS, **info)
    else:
        only_left = _blocks(a - b)
        report.add(FAIL, **info, left_only=only_left, right_only=_blocks(b - a))


def check_right_continuity_identity(f: Filtration, tau: Sequence) -> CheckReport:
    """Compare the right-limit construction of the enlarged filtration with its collapse.

    For each grid ``t`` the literal ``intersection over s > t`` of
    ``F_s v sigma(min(tau, s))`` is computed as a meet over sample points in
    ``(t, t+1]`` and compared with ``F_t v sigma(nmid(tau, t))`` and with the
    engine's filtration.  Whether ``sigma(min(tau, t))`` already suffices is
    recorded as information only.
    """
    tau = tuple(tau)
    rep = CheckReport("right-continuity")
    g = enlarge_single(f, tau)
    for t in range(f.T + 1):
        literal = None
        for s in (t + Fraction(1, 2), t + Fraction(1, 4), Fraction(t + 1)):
            part = join(f.at(s), generated(wedge_rv(tau, s)))
            literal = part if literal is None else meet(literal, part)
        collapsed = join(f[t], generated(nmid_rv(tau, t)))
        wedge = join(f[t], generated(wedge_rv(tau, t)))
        info = {"t": t, "collapsed": [list(b) for b in collapsed.blocks], "wedge_suffices": wedge == collapsed}
        if literal == collapsed == g[t]:
            rep.add(PASS, **info)
        else:
            rep.add(FAIL, **info, literal=[list(b) for b in literal.blocks], engine=[list(b) for b in g[t].blocks])
    return rep.settle()


def check_nmid_gap(f: Filtration, tau: Sequence) -> CheckReport:
    """Whether ``{tau = t}`` is measurable with ``min(tau, t)`` versus ``nmid(tau, t)``.

    Measurability for the observable part is required; failure for the
    minimum is expected on some models and recorded as a gap.
    """
    tau = tuple(tau)
    rep = CheckReport("nmid-gap")
    gaps = []
    for t in range(f.T + 1):
        hit = tuple(v == t for v in tau)
        ok_nmid = is_measurable(hit, join(f[t], generated(nmid_rv(tau, t))))
        ok_wedge = is_measurable(hit, join(f[t], generated(wedge_rv(tau, t))))
        if not ok_wedge:
            gaps.append(t)
        rep.add(PASS if ok_nmid else FAIL, t=t, nmid_measurable=ok_nmid, wedge_measurable=ok_wedge)
    rep.estimates["gap_times"] = gaps
    return rep.settle()


def check_F_tau_equality(f: Filtration, tau: Sequence) -> CheckReport:
    """``F_tau`` against ``G_tau`` on ``{tau < inf}``, compared on each ``{tau = u}``."""
    tau = tuple(tau)
    rep = CheckReport("f-tau")
    g = enlarge_single(f, tau)
    f_tau = sigma_at_random_time(tau, f)
    g_tau = sigma_at_stopping_time(tau, g)
    finite = sorted({v for v in tau if v != INF})
    if not finite:
        rep.add(VACUOUS, on="tau<inf")
    for u in finite:
        _compare_traces(rep, g_tau, f_tau, tuple(v == u for v in tau), u=u)
    return rep.settle()


def _require_stopping(r, g: Filtration):
    t = stopping_time_defect(r, g)
    if t is not None:
        raise StoppingTimeError(t, f"{{r <= {t}}} is not measurable for the enlarged filtration")


def check_graph_criterion(f: Filtration, tau: Sequence, r: Sequence) -> CheckReport:
    """``{r<inf} n G_r`` against ``{r<inf} n (sigma(nmid(tau, r)) v F_r)``.

    ``r`` must be a stopping time of the enlarged filtration.  When ``r`` is
    ``tau`` itself, ``{tau<inf} n G_tau = {tau<inf} n F_tau`` is reported too.
    """
    tau, r = tuple(tau), tuple(r)
    check_time_values(r, f.T)
    g = enlarge_single(f, tau)
    _require_stopping(r, g)
    rep = CheckReport("graph-criterion")
    g_r = sigma_at_stopping_time(r, g)
    rhs = join(generated(nmid_rv(tau, r)), sigma_at_random_time(r, f))
    finite = sorted({v for v in r if v != INF})
    if not finite:
        rep.add(VACUOUS, on="r<inf")
    for s in finite:
        _compare_traces(rep, g_r, rhs, tuple(v == s for v in r), r=s)
    if r == tau:
        _compare_traces(rep, g_r, sigma_at_random_time(tau, f), tuple(v != INF for v in tau),
                        step="G_tau equals F_tau on {tau<inf}")
    return rep.settle()


def check_pre_default_trace(f: Filtration, tau: Sequence, r: Sequence) -> CheckReport:
    """``{r<tau} n G_r`` against ``{r<tau} n F_r``."""
    tau, r = tuple(tau), tuple(r)
    check_time_values(r, f.T)
    g = enlarge_single(f, tau)
    _require_stopping(r, g)
    rep = CheckReport("pre-default-trace")
    event = tuple(a < b for a, b in zip(r, tau))
    _compare_traces(rep, sigma_at_stopping_time(r, g), sigma_at_random_time(r, f), event, on="r<tau")
    return rep.settle()


def lo_membership(f: Filtration, tau: Sequence, A: Sequence[Sequence[bool]], y: Process | None = None) -> CheckReport:
    """Attempt the splitting read-off restricted to the optional set ``A``.

    ``A[t]`` must be measurable for the enlarged filtration at ``t``.  The
    process probed is ``y`` when given (it need not be adapted to the
    enlarged filtration), otherwise a process taking a distinct value on
    every enlarged atom, which certifies all adapted processes at once.
    Each ``F_t``-block meeting ``A`` is split into its pre-default part and
    its parts ``{tau = u}``; an obstruction is a part on which the probe is
    not constant.
    """
    tau = tuple(tau)
    g = enlarge_single(f, tau)
    rep = CheckReport("lo-membership")
    if y is None:
        y = Process.from_function(lambda t, w: Fraction(g[t].labels[w]), f.T, f.n)
    for t in range(f.T + 1):
        a_t = tuple(bool(v) for v in A[t])
        if not is_measurable(a_t, g[t]):
            raise MeasurabilityError(f"set is not optional at time {t}")
        if not any(a_t):
            continue
        parts: dict = {}
        for w in range(f.n):
            if a_t[w]:
                parts.setdefault((f[t].labels[w], "pre" if t < tau[w] else tau[w]), []).append(w)
        for (b, u), ws in parts.items():
            if len({y[t][w] for w in ws}) == 1:
                rep.add(PASS, t=t, part=u, atom=ws)
            else:
                rep.add(FAIL, t=t, part=u, atom=ws)
    if not rep.details:
        rep.add(VACUOUS, on="A empty")
    return rep.settle()


def ordered_enlargement_report(f: Filtration, taus: Sequence[Sequence]) -> CheckReport:
    """Compare enlargement by the ordered times with enlargement by the times themselves.

    The filtration generated by the order statistics is always contained in
    the one generated by the original times; the report records per time
    whether the inclusion is strict.  Containment failure is a bug.
    """
    taus = tuple(tuple(tau) for tau in taus)
    full = enlarge_multi(f, taus)
    ordered = enlarge_multi(f, sigma_with_bounds(taus)[1:-1])
    rep = CheckReport("ordered-enlargement")
    strict = []
    for t in range(f.T + 1):
        contained = full[t].refines(ordered[t])
        if ordered[t] != full[t]:
            strict.append(t)
        rep.add(PASS if contained else FAIL, t=t, strictly_smaller=ordered[t] != full[t])
    rep.estimates["strict_times"] = strict
    return rep.settle()


def generic_adapted_process(g: Filtration) -> Process:
    """A process with a different value on every atom of every ``g[t]``.

    Any ``g``-adapted process is a function of it at each time, so an exact
    split of this one certifies the read-off for every adapted process.
    """
    return Process.from_function(lambda t, w: Fraction(1000 * t + g[t].labels[w]), g.T, g.n)


def split_report(name: str, y: Process, split, f: Filtration) -> CheckReport:
    """Reconstruction error and component adaptedness for a computed split."""
    rep = CheckReport(name)
    rec = split.reconstruct()
    errs = [(t, w) for t in range(y.T + 1) for w in range(y.n) if rec[t][w] != y[t][w]]
    rep.add(FAIL if errs else PASS, item="reconstruction", mismatches=errs[:5])
    if isinstance(split, SplitSingle):
        named = [("pre", {None: split.pre}), ("post", split.post.slices)]
    else:
        named = [(i, c.slices) for i, c in enumerate(split.components)]
    bad = []
    for i, slices in named:
        for p, sl in slices.items():
            d = adaptedness_defect(sl, f)
            if d is not None:
                bad.append({"component": i, "param": p, "t": d[0], "block": list(d[1])})
    rep.add(FAIL if bad else PASS, item="component adaptedness", offending=bad[:5])
    return rep.settle()
