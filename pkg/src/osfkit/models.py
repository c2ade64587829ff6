"""Model constructors and hypothesis verifiers.

* Cox times: first passage of an adapted hazard over an independent threshold.
* Density models: product spaces ``base x time-tuple`` whose conditional law
  given the base has a density with respect to a product reference measure,
  with an optional mark attached to each time.
* Immersion (every ``F``-martingale stays a ``G``-martingale), changes of
  measure preserving stopped martingale increments over stochastic
  intervals, and covering families of intervals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable, NamedTuple, Sequence

from .core import (INF, DimensionError, Filtration, FiniteSpace, Partition, Process,
                   adaptedness_defect, as_fraction, check_time_values, cond_exp, doob_martingale,
                   indicator, is_measurable, martingale_defect, stopping_time_defect)
from .enlargement import MarkedTime, enlarge_marked, enlarge_single
from .reports import FAIL, PASS, VACUOUS, CheckReport

ZERO = Fraction(0)
ONE = Fraction(1)


class ConstructionError(ValueError):
    pass


class BuiltModel(NamedTuple):
    space: FiniteSpace
    filtration: Filtration
    times: list


def _lift(f: Filtration, origin: Sequence[int]) -> Filtration:
    """Pull a base filtration back along ``origin`` (product outcome -> base index)."""
    return Filtration(Partition(p.labels[w] for w in origin) for p in f)


def _check_base(space: FiniteSpace, f: Filtration):
    if space.n != f.n:
        raise DimensionError("base space and filtration have different sizes")


# Cox times


@dataclass(frozen=True)
class CoxSpec:
    """Hazard process on the base and a finitely supported positive threshold law."""

    hazard: Process
    threshold: dict

    def __post_init__(self):
        law = {as_fraction(k): as_fraction(v) for k, v in dict(self.threshold).items()}
        if not law:
            raise ValueError("the threshold law needs at least one atom")
        for x, p in law.items():
            if x <= 0:
                raise ValueError(f"threshold value {x} is not strictly positive")
            if p <= 0:
                raise ValueError(f"threshold value {x} has non-positive weight {p}")
        if sum(law.values()) != 1:
            raise ValueError("threshold weights do not sum to 1")
        h = self.hazard
        for w in range(h.n):
            if h[0][w] != 0:
                raise ValueError(f"hazard does not start at 0 on outcome {w}")
            for t in range(h.T):
                if h[t + 1][w] < h[t][w]:
                    raise ValueError(f"hazard decreases at time {t + 1} on outcome {w}")
        object.__setattr__(self, "threshold", dict(sorted(law.items())))


def build_cox(spec: CoxSpec, f: Filtration, space: FiniteSpace) -> BuiltModel:
    """Product of the base with the threshold; ``tau = min{t : hazard_t >= threshold}``."""
    _check_base(space, f)
    h = spec.hazard
    if h.T != f.T or h.n != f.n:
        raise DimensionError("hazard and filtration have different shapes")
    bad = adaptedness_defect(h, f)
    if bad is not None:
        raise ValueError(f"hazard is not adapted at time {bad[0]}")
    labels, probs, origin, tau = [], [], [], []
    for w, (lab, p) in enumerate(zip(space.outcomes, space.probs)):
        for x, q in spec.threshold.items():
            labels.append((lab, x))
            probs.append(p * q)
            origin.append(w)
            tau.append(next((t for t in range(f.T + 1) if h[t][w] >= x), INF))
    return BuiltModel(FiniteSpace(tuple(labels), tuple(probs)), _lift(f, origin), [tuple(tau)])


def azema(tau: Sequence, f: Filtration, space: FiniteSpace) -> Process:
    """Conditional survival ``Z_t = P[tau > t | F_t]``."""
    return Process(tuple(cond_exp(indicator(v > t for v in tau), f[t], space) for t in range(f.T + 1)))


def future_time_model() -> BuiltModel:
    """Two-step symmetric walk with ``tau`` the first time of its maximum.

    ``tau`` looks into the future, so immersion fails: knowing ``tau`` at
    time 0 reveals the direction of the first step.
    """
    steps = list(product((1, -1), repeat=2))
    walk = [(0, a, a + b) for a, b in steps]
    space = FiniteSpace.uniform(tuple("".join("+" if s > 0 else "-" for s in st) for st in steps))
    f = Filtration.natural(Process(tuple(tuple(path[t] for path in walk) for t in range(3))))
    tau = tuple(path.index(max(path)) for path in walk)
    return BuiltModel(space, f, [tau])


def hypothesis_H_check(f: Filtration, g: Filtration, space: FiniteSpace) -> CheckReport:
    """Immersion test on the Doob martingales of the terminal ``F``-atoms."""
    if not g.refines(f):
        raise ValueError("the larger filtration must refine the smaller one at every time")
    rep = CheckReport("hypothesis-H")
    for block in f[f.T].blocks:
        x = indicator(w in block for w in range(f.n))
        m = doob_martingale(x, f, space)
        d = martingale_defect(m, g, space)
        if d is None:
            rep.add(PASS, atom=list(block))
        else:
            rep.add(FAIL, atom=list(block), defect=d)
    return rep.settle()


# density models


def _check_mu(weights: dict, T: int, what: str) -> dict:
    out = {}
    for k, v in weights.items():
        out[k] = as_fraction(v)
        if out[k] <= 0:
            raise ConstructionError(f"{what} atom {k!r} has non-positive weight")
    if sum(out.values()) != 1:
        raise ConstructionError(f"{what} weights sum to {sum(out.values())}, not 1")
    return out


@dataclass(frozen=True)
class DensityModel:
    """Base model, reference weights ``mu`` on grid and infinity, density ``gamma``.

    ``gamma`` maps ``(times, w)`` to a nonnegative rational where ``times``
    is an ``m``-tuple and ``w`` a base index; missing entries are zero.
    """

    base: FiniteSpace
    filtration: Filtration
    mu: dict
    gamma: dict
    m: int = 1

    @classmethod
    def from_function(cls, base, filtration, mu, fn: Callable, m: int = 1) -> "DensityModel":
        support = sorted(mu, key=_time_key)
        gamma = {(a, w): as_fraction(fn(a, w)) for a in product(support, repeat=m) for w in range(base.n)}
        return cls(base, filtration, dict(mu), gamma, m)

    def tuples(self):
        return list(product(sorted(self.mu, key=_time_key), repeat=self.m))

    def density(self, a, w) -> Fraction:
        return as_fraction(self.gamma.get((a, w), 0))


def _time_key(u):
    return (1, 0) if u == INF else (0, u)


def _validate_density(base, f, tuples, ref, dens, what):
    """Shared checks: nonnegative, terminal-measurable and normalized per base outcome."""
    _check_base(base, f)
    for a in tuples:
        col = tuple(dens(a, w) for w in range(base.n))
        if any(v < 0 for v in col):
            raise ConstructionError(f"{what} is negative at {a!r}")
        if not is_measurable(col, f[f.T]):
            raise ConstructionError(f"{what} at {a!r} is not measurable at the terminal time")
    for w in range(base.n):
        total = sum((dens(a, w) * ref(a) for a in tuples), ZERO)
        if total != 1:
            raise ConstructionError(
                f"conditional law does not normalize on base outcome {base.outcomes[w]!r} (total {total})")


def _assemble(base, f, tuples, ref, dens):
    labels, probs, origin, coords = [], [], [], []
    for w, (lab, p) in enumerate(zip(base.outcomes, base.probs)):
        for a in tuples:
            q = p * dens(a, w) * ref(a)
            if q > 0:
                labels.append((lab, a))
                probs.append(q)
                origin.append(w)
                coords.append(a)
    space = FiniteSpace(tuple(labels), tuple(probs))
    lifted = _lift(f, origin)
    terminal = lifted[lifted.T]
    for a in set(coords):
        law = cond_exp(indicator(c == a for c in coords), terminal, space)
        for i, w in enumerate(origin):
            if law[i] != dens(a, w) * ref(a):
                raise ConstructionError(f"assembled conditional law disagrees at {a!r} on base outcome {w}")
    return space, lifted, origin, coords


def _product_weight(weights, a):
    out = ONE
    for c in a:
        out *= weights[c]
    return out


def build_density_model(dm: DensityModel) -> BuiltModel:
    """Assemble the product space; zero-mass outcomes are dropped."""
    mu = _check_mu(dm.mu, dm.filtration.T, "mu")
    check_time_values([u for u in mu], dm.filtration.T)
    tuples = dm.tuples()
    ref = lambda a: _product_weight(mu, a)
    _validate_density(dm.base, dm.filtration, tuples, ref, dm.density, "gamma")
    space, lifted, origin, coords = _assemble(dm.base, dm.filtration, tuples, ref, dm.density)
    times = [tuple(c[i] for c in coords) for i in range(dm.m)]
    return BuiltModel(space, lifted, times)


def product_origin(space: FiniteSpace, base: FiniteSpace) -> list[int]:
    """Base index of every outcome of an assembled product space."""
    where = {lab: i for i, lab in enumerate(base.outcomes)}
    return [where[lab[0]] for lab in space.outcomes]


def density_cond_exp(dm: DensityModel, h: Callable, t: int) -> tuple:
    """``E[h(tau) | G_t]`` for a single time from base-space quantities only.

    Before the time: ``E[h(tau) 1{t<tau} | F_t] / E[1{t<tau} | F_t]``;
    after it: ``E[h(u) gamma(u) | F_t] / E[gamma(u) | F_t]`` at ``u = tau``,
    set to zero where the denominator vanishes.  ``h(u, w)`` takes a time
    and a base index.
    """
    if dm.m != 1:
        raise ValueError("the explicit formula is for a single random time")
    mu = _check_mu(dm.mu, dm.filtration.T, "mu")
    base, ft = dm.base, dm.filtration[t]
    later = [u for u in mu if u > t]
    pre_num = cond_exp([sum((h(u, w) * dm.density((u,), w) * mu[u] for u in later), ZERO)
                        for w in range(base.n)], ft, base)
    pre_den = cond_exp([sum((dm.density((u,), w) * mu[u] for u in later), ZERO)
                        for w in range(base.n)], ft, base)
    post = {}
    for u in mu:
        if u <= t:
            num = cond_exp([h(u, w) * dm.density((u,), w) for w in range(base.n)], ft, base)
            den = cond_exp([dm.density((u,), w) for w in range(base.n)], ft, base)
            post[u] = [a / b if b > 0 else ZERO for a, b in zip(num, den)]
    built = build_density_model(dm)
    out = []
    for lab, w in zip(built.space.outcomes, product_origin(built.space, base)):
        (u,) = lab[1]
        if t < u:
            out.append(pre_num[w] / pre_den[w] if pre_den[w] > 0 else ZERO)
        else:
            out.append(post[u][w])
    return tuple(out)


@dataclass(frozen=True)
class MarkedDensityModel:
    """Density model over (mark, time) pairs with reference weights ``nu``.

    ``gamma`` maps ``(pairs, w)`` to a nonnegative rational, ``pairs`` being
    an ``m``-tuple of ``(mark, time)``.
    """

    base: FiniteSpace
    filtration: Filtration
    nu: dict
    gamma: dict
    alphabet: tuple
    m: int = 1

    @classmethod
    def from_function(cls, base, filtration, nu, fn: Callable, alphabet, m: int = 1) -> "MarkedDensityModel":
        support = sorted(nu, key=lambda xu: (_time_key(xu[1]), str(xu[0])))
        gamma = {(a, w): as_fraction(fn(a, w)) for a in product(support, repeat=m) for w in range(base.n)}
        return cls(base, filtration, dict(nu), gamma, tuple(alphabet), m)

    def tuples(self):
        support = sorted(self.nu, key=lambda xu: (_time_key(xu[1]), str(xu[0])))
        return list(product(support, repeat=self.m))

    def density(self, a, w) -> Fraction:
        return as_fraction(self.gamma.get((a, w), 0))


def build_marked_density_model(mdm: MarkedDensityModel) -> BuiltModel:
    """Assemble the product space and the marked times."""
    nu = _check_mu(mdm.nu, mdm.filtration.T, "nu")
    for x, u in nu:
        if x not in mdm.alphabet:
            raise ConstructionError(f"nu charges the undeclared mark {x!r}")
    check_time_values([u for _, u in nu], mdm.filtration.T)
    tuples = mdm.tuples()
    ref = lambda a: _product_weight(nu, a)
    _validate_density(mdm.base, mdm.filtration, tuples, ref, mdm.density, "gamma*")
    space, lifted, origin, coords = _assemble(mdm.base, mdm.filtration, tuples, ref, mdm.density)
    mtaus = [MarkedTime(tuple(c[i][1] for c in coords), tuple(c[i][0] for c in coords), mdm.alphabet)
             for i in range(mdm.m)]
    return BuiltModel(space, lifted, mtaus)


def marked_density_cond_exp(mdm: MarkedDensityModel, h: Callable, t: int) -> tuple:
    """``E[h(xi, tau) | G*_t]`` for one marked time from base-space quantities.

    ``h(x, u, w)`` takes a mark, a time and a base index.  After the time
    the ratio ``E[h(x,u) gamma*(x,u) | F_t] / E[gamma*(x,u) | F_t]`` is
    evaluated at the observed pair.
    """
    if mdm.m != 1:
        raise ValueError("the explicit formula is for a single marked time")
    nu = _check_mu(mdm.nu, mdm.filtration.T, "nu")
    base, ft = mdm.base, mdm.filtration[t]
    later = [xu for xu in nu if xu[1] > t]
    pre_num = cond_exp([sum((h(x, u, w) * mdm.density(((x, u),), w) * nu[(x, u)] for x, u in later), ZERO)
                        for w in range(base.n)], ft, base)
    pre_den = cond_exp([sum((mdm.density(((x, u),), w) * nu[(x, u)] for x, u in later), ZERO)
                        for w in range(base.n)], ft, base)
    post = {}
    for x, u in nu:
        if u <= t:
            num = cond_exp([h(x, u, w) * mdm.density(((x, u),), w) for w in range(base.n)], ft, base)
            den = cond_exp([mdm.density(((x, u),), w) for w in range(base.n)], ft, base)
            post[(x, u)] = [a / b if b > 0 else ZERO for a, b in zip(num, den)]
    built = build_marked_density_model(mdm)
    out = []
    for lab, w in zip(built.space.outcomes, product_origin(built.space, base)):
        ((x, u),) = lab[1]
        if t < u:
            out.append(pre_num[w] / pre_den[w] if pre_den[w] > 0 else ZERO)
        else:
            out.append(post[(x, u)][w])
    return tuple(out)


def density_formula_report(dm: DensityModel, payoffs: Sequence[Callable]) -> CheckReport:
    """Formula against brute-force conditional expectation on the assembled space."""
    built = build_density_model(dm)
    g = enlarge_single(built.filtration, built.times[0])
    origin = product_origin(built.space, dm.base)
    rep = CheckReport("density-formula")
    for k, h in enumerate(payoffs):
        x = tuple(as_fraction(h(lab[1][0], w)) for lab, w in zip(built.space.outcomes, origin))
        for t in range(g.T + 1):
            brute = cond_exp(x, g[t], built.space)
            formula = density_cond_exp(dm, h, t)
            if brute == formula:
                rep.add(PASS, payoff=k, t=t)
            else:
                bad = next(i for i in range(len(x)) if brute[i] != formula[i])
                rep.add(FAIL, payoff=k, t=t, outcome=built.space.outcomes[bad],
                        brute=brute[bad], formula=formula[bad])
    return rep.settle()


def marked_density_formula_report(mdm: MarkedDensityModel, payoffs: Sequence[Callable]) -> CheckReport:
    built = build_marked_density_model(mdm)
    g = enlarge_marked(built.filtration, built.times)
    origin = product_origin(built.space, mdm.base)
    rep = CheckReport("marked-density-formula")
    for k, h in enumerate(payoffs):
        x = tuple(as_fraction(h(lab[1][0][0], lab[1][0][1], w)) for lab, w in zip(built.space.outcomes, origin))
        for t in range(g.T + 1):
            brute = cond_exp(x, g[t], built.space)
            formula = marked_density_cond_exp(mdm, h, t)
            if brute == formula:
                rep.add(PASS, payoff=k, t=t)
            else:
                bad = next(i for i in range(len(x)) if brute[i] != formula[i])
                rep.add(FAIL, payoff=k, t=t, outcome=built.space.outcomes[bad],
                        brute=brute[bad], formula=formula[bad])
    return rep.settle()


# changes of measure and coverings


class NonEquivalentChange(ValueError):
    pass


@dataclass(frozen=True)
class MeasureChange:
    """Strictly positive density of the new measure with respect to the old one."""

    density: tuple

    def __post_init__(self):
        d = tuple(as_fraction(v) for v in self.density)
        bad = [w for w, v in enumerate(d) if v <= 0]
        if bad:
            raise NonEquivalentChange(f"density vanishes or is negative on outcomes {bad}")
        object.__setattr__(self, "density", d)

    def apply(self, space: FiniteSpace) -> FiniteSpace:
        if len(self.density) != space.n:
            raise DimensionError("density and space have different sizes")
        if space.expect(self.density) != 1:
            raise ValueError(f"density has mean {space.expect(self.density)}, not 1")
        return space.reweighted(self.density)


def _stopped_at(x: Process, r: Sequence) -> Process:
    """``t -> x_{min(r, t)}`` on the grid."""
    return Process.from_function(lambda t, w: x[min(r[w], t)][w], x.T, x.n)


def verify_sH_measure(change: MeasureChange, s: Sequence, t: Sequence, f: Filtration, g: Filtration,
                      space: FiniteSpace, require_f_stopping: bool = False) -> CheckReport:
    """Test that ``X^{S v T} - X^S`` is a ``G``-martingale under the changed measure.

    ``X`` ranges over the Doob martingales of the terminal ``F``-atoms, which
    span every martingale of ``F`` under the original measure.
    """
    s, t = tuple(s), tuple(t)
    for name, r, filt in (("S", s, g), ("T", t, g)) + ((("T", t, f),) if require_f_stopping else ()):
        bad = stopping_time_defect(r, filt)
        if bad is not None:
            raise ValueError(f"{name} is not a stopping time at time {bad}")
    new = change.apply(space)
    rep = CheckReport("sh-measure")
    if all(a >= b for a, b in zip(s, t)):
        rep.add(VACUOUS, interval="empty")
        return rep.settle()
    upper = tuple(max(a, b) for a, b in zip(s, t))
    for block in f[f.T].blocks:
        x = doob_martingale(indicator(w in block for w in range(f.n)), f, space)
        inc = _stopped_at(x, upper) - _stopped_at(x, s)
        d = martingale_defect(inc, g, new)
        if d is None:
            rep.add(PASS, atom=list(block))
        else:
            rep.add(FAIL, atom=list(block), defect=d)
    return rep.settle()


def _sample_points(T: int):
    """Half-integer lattice in ``(0, T]`` plus one point standing for ``(T, inf)``."""
    return [Fraction(k, 2) for k in range(1, 2 * T + 2)]


def covering_report(family: Sequence, tau: Sequence, T: int, f: Filtration | None = None) -> CheckReport:
    """Pointwise inclusion of ``(tau, inf)`` and ``[tau, inf) n (0, inf)`` in ``U (S_j, T_j)``.

    With endpoints on the grid or at infinity, membership of a real time in
    the union only depends on its position relative to the grid, so the
    half-integer points of ``(0, T]`` and one point past ``T`` decide it.
    """
    tau = tuple(tau)
    family = [(tuple(a), tuple(b)) for a, b in family]
    if f is not None:
        for j, (_, upper) in enumerate(family):
            bad = stopping_time_defect(upper, f)
            if bad is not None:
                raise ValueError(f"upper end of interval {j} is not a stopping time at time {bad}")
    rep = CheckReport("covering")
    points = _sample_points(T)
    for cond, start in (("after-default", lambda v, p: v < p), ("from-default", lambda v, p: v <= p)):
        missed = []
        for w, v in enumerate(tau):
            for p in points:
                if start(v, p) and not any(a[w] < p < b[w] for a, b in family):
                    missed.append((p if p <= T else INF, w))
        rep.add(FAIL if missed else PASS, condition=cond, uncovered=missed)
    return rep.settle()
