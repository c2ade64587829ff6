"""Random times, the observable-part operator, order statistics and enlarged filtrations.

For a grid time ``t`` the observable part of a random time is
``nmid(tau, t)``: the value of ``tau`` once it has happened, ``INF`` before.
It generates a strictly finer sigma-algebra than ``min(tau, t)`` because it
distinguishes ``{tau = t}`` from ``{tau > t}``.

Step filtrations make the progressive enlargement collapse to
``G_t = F_t v sigma(nmid(tau, t))``, which is what :func:`enlarge_single`
builds.  The literal right-limit definition is recomputed independently in
:mod:`osfkit.splitting` as a check.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Hashable, Sequence

from .core import (INF, DimensionError, Filtration, Partition, check_time_values, generated,
                   join)

PRE_DEFAULT = "△"


def as_random_time(values: Sequence, T: int) -> tuple:
    """Validate grid membership and return the values as a tuple."""
    values = tuple(values)
    check_time_values(values, T)
    return values


def nmid(a, b):
    """``a`` if ``a <= b`` else ``INF``."""
    return a if a <= b else INF


def nmid_rv(tau: Sequence, b) -> tuple:
    """Pointwise :func:`nmid`; ``b`` is a scalar or a per-outcome sequence."""
    if isinstance(b, (int, float)):
        return tuple(a if a <= b else INF for a in tau)
    if len(b) != len(tau):
        raise DimensionError("time and bound have different lengths")
    return tuple(a if a <= c else INF for a, c in zip(tau, b))


def wedge_rv(tau: Sequence, s) -> tuple:
    return tuple(min(a, s) for a in tau)


@dataclass(frozen=True)
class OrderingResult:
    """Ranks (1-based), their inverse (1-based indices) and sorted values."""

    ranks: tuple
    inverse: tuple
    sorted: tuple

    def order_statistic(self, j: int):
        if not 1 <= j <= len(self.sorted):
            raise IndexError(f"rank {j} outside 1..{len(self.sorted)}")
        return self.sorted[j - 1]


def rank(values: Sequence) -> OrderingResult:
    """Rank with ties broken by position: ``#{a_j < a_i} + #{j < i, a_j = a_i} + 1``."""
    values = tuple(values)
    k = len(values)
    if k == 0:
        raise ValueError("cannot rank an empty tuple")
    ranks = tuple(
        sum(1 for a in values if a < ai) + sum(1 for a in values[:i] if a == ai) + 1
        for i, ai in enumerate(values)
    )
    inverse = [0] * k
    for i, r in enumerate(ranks):
        inverse[r - 1] = i + 1
    return OrderingResult(ranks, tuple(inverse), tuple(values[i - 1] for i in inverse))


def order_statistic_function(j: int, values: Sequence):
    """The ``j``-th smallest value, via ``{s_j <= t} = U_{|I|=j} {a_h <= t for h in I}``.

    The smallest ``t`` for which some ``j``-subset lies entirely below ``t``
    is the minimum over ``j``-subsets of their maximum.
    """
    values = tuple(values)
    if not 1 <= j <= len(values):
        raise IndexError(f"rank {j} outside 1..{len(values)}")
    return min(max(values[h] for h in subset) for subset in combinations(range(len(values)), j))


def order_statistics(taus: Sequence[Sequence]) -> list[tuple]:
    """``sigma_{m,j}`` for ``j = 1..m`` as random times (pointwise ranking)."""
    n = len(taus[0])
    per_outcome = [rank([tau[w] for tau in taus]).sorted for w in range(n)]
    return [tuple(per_outcome[w][j] for w in range(n)) for j in range(len(taus))]


def sigma_with_bounds(taus: Sequence[Sequence]) -> list[tuple]:
    """``sigma_{m,0} = 0, sigma_{m,1}, ..., sigma_{m,m}, sigma_{m,m+1} = INF``."""
    n = len(taus[0])
    return [(0,) * n] + order_statistics(taus) + [(INF,) * n]


def interval_index(values: Sequence, t) -> int:
    """The ``i`` with ``sigma_i <= t < sigma_{i+1}`` for one outcome's times."""
    return sum(1 for v in values if v <= t)


@dataclass(frozen=True)
class MarkedTime:
    """A random time with a mark per outcome, drawn from ``alphabet``."""

    time: tuple
    mark: tuple
    alphabet: tuple

    def __post_init__(self):
        object.__setattr__(self, "time", tuple(self.time))
        object.__setattr__(self, "mark", tuple(self.mark))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        if len(self.time) != len(self.mark):
            raise DimensionError("one mark per outcome is required")
        if PRE_DEFAULT in self.alphabet:
            raise ValueError(f"the alphabet may not contain the reserved symbol {PRE_DEFAULT}")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ValueError("alphabet symbols must be distinct")
        for w, x in enumerate(self.mark):
            if x not in self.alphabet:
                raise ValueError(f"mark {x!r} on outcome {w} is not in the declared alphabet")

    def observed(self, t) -> tuple:
        """``H(t)``: the pre-default symbol before the time, the mark from then on."""
        return tuple(x if s <= t else PRE_DEFAULT for s, x in zip(self.time, self.mark))


def mark_path(mt: MarkedTime, T: int) -> tuple:
    """``H(t)`` for ``t = 0..T``, one tuple of symbols per time."""
    check_time_values(mt.time, T)
    return tuple(mt.observed(t) for t in range(T + 1))


def stopped_path(mt: MarkedTime, w: int, sigma, T: int) -> tuple:
    """``u -> H(min(u, sigma))`` on outcome ``w`` over the grid, as a tuple."""
    s, x = mt.time[w], mt.mark[w]
    return tuple(x if s <= min(u, sigma) else PRE_DEFAULT for u in range(T + 1))


def path_time(path: Sequence[Hashable]):
    """Recover ``nmid(tau, sigma)`` from a stopped path: its first non-pre-default time."""
    for u, h in enumerate(path):
        if h != PRE_DEFAULT:
            return u
    return INF


def _check_times(f: Filtration, taus):
    for tau in taus:
        if len(tau) != f.n:
            raise DimensionError(f"random time of length {len(tau)} on a space of size {f.n}")
        check_time_values(tau, f.T)


def enlarge_single(f: Filtration, tau: Sequence) -> Filtration:
    """``G_t = F_t v sigma(nmid(tau, t))``."""
    _check_times(f, [tau])
    return Filtration(join(f[t], generated(nmid_rv(tau, t))) for t in range(f.T + 1))


def enlarge_multi(f: Filtration, taus: Sequence[Sequence]) -> Filtration:
    """Progressive enlargement by several times, adding them in index order."""
    if not taus:
        raise ValueError("at least one random time is required")
    g = f
    for tau in taus:
        g = enlarge_single(g, tau)
    return g


def enlarge_wedge(f: Filtration, tau: Sequence) -> Filtration:
    """``F_t v sigma(min(tau, t))``: the coarser, non-right-continuous candidate."""
    _check_times(f, [tau])
    return Filtration(join(f[t], generated(wedge_rv(tau, t))) for t in range(f.T + 1))


def enlarge_marked(f: Filtration, mtaus: Sequence[MarkedTime]) -> Filtration:
    """Join ``F_t`` with the history ``H_i(s), s <= t`` of every marked time."""
    if not mtaus:
        raise ValueError("at least one marked time is required")
    _check_times(f, [mt.time for mt in mtaus])
    parts = []
    history = Partition.trivial(f.n)
    for t in range(f.T + 1):
        for mt in mtaus:
            history = join(history, generated(mt.observed(t)))
        parts.append(join(f[t], history))
    return Filtration(parts)
