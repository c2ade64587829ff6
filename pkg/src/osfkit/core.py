"""Exact probability calculus on finite outcome spaces.

Sub-sigma-algebras of a finite space are represented by partitions of the
outcome indices.  A partition stores a canonical label per outcome (blocks
numbered in order of first appearance), so equality of sigma-algebras is
plain tuple equality and joins are cheap.

All probabilities are :class:`fractions.Fraction` and every identity in this
module holds exactly, with no tolerance.

Time runs over the integer grid ``0..T`` plus the sentinel :data:`INF`.
Filtrations are step filtrations, constant on ``[t, t+1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Hashable, Iterable, Sequence

INF = math.inf

RandomVariable = tuple


class DimensionError(ValueError):
    """Objects built over different outcome spaces or grids were combined."""


class StoppingTimeError(ValueError):
    """A random time failed the stopping-time test of a filtration."""

    def __init__(self, t, message):
        super().__init__(message)
        self.t = t


def as_fraction(value) -> Fraction:
    """Convert ints, Fractions and ``"p/q"`` strings to a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        return Fraction(int(value))
    if isinstance(value, (int, str)):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r} is not a rational")
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a rational number")


def canonical_labels(values: Iterable[Hashable]) -> tuple[int, ...]:
    """Relabel a sequence so that labels appear as 0, 1, 2, ... in order."""
    seen: dict = {}
    out = []
    for v in values:
        lab = seen.get(v)
        if lab is None:
            lab = seen[v] = len(seen)
        out.append(lab)
    return tuple(out)


@dataclass(frozen=True)
class FiniteSpace:
    """Outcome labels with strictly positive rational weights summing to 1."""

    outcomes: tuple
    probs: tuple

    def __post_init__(self):
        outcomes = tuple(self.outcomes)
        probs = tuple(as_fraction(p) for p in self.probs)
        if len(outcomes) != len(probs):
            raise DimensionError("one probability per outcome is required")
        if not outcomes:
            raise ValueError("a probability space needs at least one outcome")
        if len(set(outcomes)) != len(outcomes):
            raise ValueError("outcome labels must be pairwise distinct")
        for lab, p in zip(outcomes, probs):
            if p <= 0:
                raise ValueError(f"outcome {lab!r} has non-positive mass {p}")
        if sum(probs) != 1:
            raise ValueError(f"probabilities sum to {sum(probs)}, not 1")
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, outcomes) -> "FiniteSpace":
        if isinstance(outcomes, int):
            outcomes = range(outcomes)
        outcomes = tuple(outcomes)
        return cls(outcomes, (Fraction(1, len(outcomes)),) * len(outcomes))

    @property
    def n(self) -> int:
        return len(self.outcomes)

    def index(self, label) -> int:
        return self.outcomes.index(label)

    def expect(self, x: Sequence) -> Fraction:
        _check_len(x, self.n)
        return sum((p * v for p, v in zip(self.probs, x)), Fraction(0))

    def prob(self, event: Sequence[bool]) -> Fraction:
        _check_len(event, self.n)
        return sum((p for p, e in zip(self.probs, event) if e), Fraction(0))

    def reweighted(self, density: Sequence) -> "FiniteSpace":
        """The space under the measure ``density * P`` (density must be positive)."""
        _check_len(density, self.n)
        return FiniteSpace(self.outcomes, tuple(p * as_fraction(d) for p, d in zip(self.probs, density)))


class Partition:
    """A partition of ``range(n)``, i.e. a sigma-algebra on a finite space."""

    __slots__ = ("labels", "_blocks")

    def __init__(self, labels: Iterable[Hashable]):
        self.labels = canonical_labels(labels)
        self._blocks = None

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], n: int) -> "Partition":
        labels = [None] * n
        for b, block in enumerate(blocks):
            block = list(block)
            if not block:
                raise ValueError("partition blocks must be nonempty")
            for i in block:
                if not 0 <= i < n:
                    raise DimensionError(f"index {i} outside a space of size {n}")
                if labels[i] is not None:
                    raise ValueError(f"index {i} appears in two blocks")
                labels[i] = b
        missing = [i for i, lab in enumerate(labels) if lab is None]
        if missing:
            raise ValueError(f"indices {missing} are not covered by any block")
        return cls(labels)

    @classmethod
    def trivial(cls, n: int) -> "Partition":
        return cls([0] * n)

    @classmethod
    def discrete(cls, n: int) -> "Partition":
        return cls(range(n))

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def n_blocks(self) -> int:
        return max(self.labels) + 1 if self.labels else 0

    @property
    def blocks(self) -> tuple[tuple[int, ...], ...]:
        if self._blocks is None:
            groups: list[list[int]] = [[] for _ in range(self.n_blocks)]
            for i, lab in enumerate(self.labels):
                groups[lab].append(i)
            self._blocks = tuple(tuple(g) for g in groups)
        return self._blocks

    def block_containing(self, i: int) -> tuple[int, ...]:
        return self.blocks[self.labels[i]]

    def refines(self, other: "Partition") -> bool:
        """True when every block of ``self`` lies inside a block of ``other``."""
        _check_same(self, other)
        image: dict = {}
        for a, b in zip(self.labels, other.labels):
            if image.setdefault(a, b) != b:
                return False
        return True

    def trace(self, event: Sequence[bool]) -> frozenset:
        """The trace sigma-algebra on ``event``, as the set of its atoms."""
        _check_len(event, self.n)
        groups: dict = {}
        for i, (lab, e) in enumerate(zip(self.labels, event)):
            if e:
                groups.setdefault(lab, []).append(i)
        return frozenset(frozenset(g) for g in groups.values())

    def __eq__(self, other):
        return isinstance(other, Partition) and self.labels == other.labels

    def __hash__(self):
        return hash(self.labels)

    def __repr__(self):
        inner = ", ".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks)
        return f"Partition({inner})"


def _check_len(x, n):
    if len(x) != n:
        raise DimensionError(f"expected {n} values, got {len(x)}")


def _check_same(p1: Partition, p2: Partition):
    if p1.n != p2.n:
        raise DimensionError(f"partitions over spaces of size {p1.n} and {p2.n}")


def join(p1: Partition, p2: Partition) -> Partition:
    """Coarsest common refinement (the sigma-algebra generated by both)."""
    _check_same(p1, p2)
    return Partition(zip(p1.labels, p2.labels))


def join_all(parts: Iterable[Partition], n: int) -> Partition:
    out = Partition.trivial(n)
    for p in parts:
        out = join(out, p)
    return out


def meet(p1: Partition, p2: Partition) -> Partition:
    """Finest common coarsening (the intersection of the two sigma-algebras)."""
    _check_same(p1, p2)
    parent = list(range(p1.n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for p in (p1, p2):
        for block in p.blocks:
            root = find(block[0])
            for i in block[1:]:
                parent[find(i)] = root
    return Partition(find(i) for i in range(p1.n))


def generated(x: Sequence[Hashable]) -> Partition:
    """The partition into level sets of ``x``."""
    return Partition(x)


def is_measurable(x: Sequence, p: Partition) -> bool:
    """True iff ``x`` is constant on every block of ``p``."""
    _check_len(x, p.n)
    value: dict = {}
    for lab, v in zip(p.labels, x):
        if value.setdefault(lab, v) != v:
            return False
    return True


def cond_exp(x: Sequence, p: Partition, space: FiniteSpace) -> RandomVariable:
    """Block-wise probability-weighted average of ``x``."""
    _check_len(x, p.n)
    _check_len(space.probs, p.n)
    mass = [Fraction(0)] * p.n_blocks
    total = [Fraction(0)] * p.n_blocks
    for lab, q, v in zip(p.labels, space.probs, x):
        mass[lab] += q
        total[lab] += q * v
    avg = [t / m for t, m in zip(total, mass)]
    return tuple(avg[lab] for lab in p.labels)


class Filtration:
    """One partition per grid time ``0..T``, each refining its predecessor."""

    __slots__ = ("partitions",)

    def __init__(self, partitions: Iterable[Partition]):
        parts = tuple(partitions)
        if not parts:
            raise ValueError("a filtration needs at least the time-0 partition")
        for t in range(len(parts) - 1):
            _check_same(parts[t], parts[t + 1])
            if not parts[t + 1].refines(parts[t]):
                raise ValueError(f"partition at time {t + 1} does not refine time {t}")
        self.partitions = parts

    @classmethod
    def trivial(cls, n: int, T: int) -> "Filtration":
        return cls([Partition.trivial(n)] * (T + 1))

    @classmethod
    def discrete(cls, n: int, T: int) -> "Filtration":
        return cls([Partition.discrete(n)] * (T + 1))

    @classmethod
    def natural(cls, process: "Process") -> "Filtration":
        """The filtration generated by the history of ``process``."""
        parts = []
        cur = Partition.trivial(process.n)
        for t in range(process.T + 1):
            cur = join(cur, generated(process[t]))
            parts.append(cur)
        return cls(parts)

    @property
    def T(self) -> int:
        return len(self.partitions) - 1

    @property
    def n(self) -> int:
        return self.partitions[0].n

    def __getitem__(self, t) -> Partition:
        return self.partitions[t]

    def at(self, t) -> Partition:
        """Partition in force at real time ``t >= 0`` (``INF`` gives the terminal one)."""
        if t < 0:
            raise ValueError("negative time")
        if t == INF or t >= self.T:
            return self.partitions[-1]
        return self.partitions[int(math.floor(t))]

    def __len__(self):
        return len(self.partitions)

    def __iter__(self):
        return iter(self.partitions)

    def __eq__(self, other):
        return isinstance(other, Filtration) and self.partitions == other.partitions

    def __hash__(self):
        return hash(self.partitions)

    def refines(self, other: "Filtration") -> bool:
        return self.T == other.T and all(a.refines(b) for a, b in zip(self, other))

    def __repr__(self):
        return f"Filtration(T={self.T}, n={self.n})"


@dataclass(frozen=True)
class Process:
    """Values indexed by (grid time, outcome), with an optional time-infinity slice."""

    values: tuple
    inf: Any = None

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.values)
        if not rows:
            raise DimensionError("a process needs at least one time slice")
        n = len(rows[0])
        for row in rows:
            _check_len(row, n)
        object.__setattr__(self, "values", rows)
        if self.inf is not None:
            inf = tuple(self.inf)
            _check_len(inf, n)
            object.__setattr__(self, "inf", inf)

    @classmethod
    def from_function(cls, fn: Callable[[int, int], Any], T: int, n: int) -> "Process":
        return cls(tuple(tuple(fn(t, w) for w in range(n)) for t in range(T + 1)))

    @classmethod
    def zeros(cls, T: int, n: int) -> "Process":
        return cls(((Fraction(0),) * n,) * (T + 1))

    @property
    def T(self) -> int:
        return len(self.values) - 1

    @property
    def n(self) -> int:
        return len(self.values[0])

    def __getitem__(self, t):
        if t == INF:
            return self.inf if self.inf is not None else self.values[-1]
        return self.values[t]

    def __len__(self):
        return len(self.values)

    def _zip(self, other, op):
        if (self.T, self.n) != (other.T, other.n):
            raise DimensionError("processes of different shapes")
        return Process(tuple(tuple(op(a, b) for a, b in zip(r, s)) for r, s in zip(self.values, other.values)))

    def __add__(self, other):
        return self._zip(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._zip(other, lambda a, b: a - b)


def _check_process(y: Process, f: Filtration):
    if y.T != f.T or y.n != f.n:
        raise DimensionError(f"process of shape (T={y.T}, n={y.n}) against filtration (T={f.T}, n={f.n})")


def adaptedness_defect(y: Process, f: Filtration):
    """First ``(t, block)`` on which ``y[t]`` is not constant, else None."""
    _check_process(y, f)
    for t in range(f.T + 1):
        row = y[t]
        for block in f[t].blocks:
            v = row[block[0]]
            if any(row[i] != v for i in block):
                return t, block
    return None


def is_adapted(y: Process, f: Filtration) -> bool:
    return adaptedness_defect(y, f) is None


def martingale_defect(y: Process, f: Filtration, space: FiniteSpace):
    """Diagnostic for the martingale test, or None when ``y`` is a martingale.

    The result is a dict naming the failing time and block.
    """
    _check_process(y, f)
    _check_len(space.probs, f.n)
    bad = adaptedness_defect(y, f)
    if bad is not None:
        return {"reason": "not adapted", "t": bad[0], "block": list(bad[1])}
    for t in range(f.T):
        ce = cond_exp(y[t + 1], f[t], space)
        for block in f[t].blocks:
            i = block[0]
            if ce[i] != y[t][i]:
                return {"reason": "conditional mean differs", "t": t, "block": list(block),
                        "expected": ce[i], "actual": y[t][i]}
    return None


def is_martingale(y: Process, f: Filtration, space: FiniteSpace) -> bool:
    return martingale_defect(y, f, space) is None


def is_supermartingale(y: Process, f: Filtration, space: FiniteSpace) -> bool:
    if not is_adapted(y, f):
        return False
    return all(a <= b for t in range(f.T) for a, b in zip(cond_exp(y[t + 1], f[t], space), y[t]))


def doob_martingale(x: Sequence, f: Filtration, space: FiniteSpace) -> Process:
    return Process(tuple(cond_exp(x, f[t], space) for t in range(f.T + 1)))


def compensator(a: Process, f: Filtration, space: FiniteSpace) -> Process:
    """Discrete predictable dual projection of a nondecreasing process.

    ``A_0 = E[a_0 | F_0]`` and ``A_t - A_{t-1} = E[a_t - a_{t-1} | F_{t-1}]``.
    For adapted ``a`` the difference ``a - A`` is a martingale; otherwise the
    optional projection of ``a`` minus ``A`` is.
    """
    _check_process(a, f)
    for t in range(a.T):
        for w in range(a.n):
            if a[t + 1][w] < a[t][w]:
                raise ValueError(f"process decreases at time {t + 1} on outcome {w}")
    rows = [cond_exp(a[0], f[0], space)]
    for t in range(1, a.T + 1):
        inc = cond_exp(tuple(u - v for u, v in zip(a[t], a[t - 1])), f[t - 1], space)
        rows.append(tuple(r + d for r, d in zip(rows[-1], inc)))
    return Process(tuple(rows))


def optional_projection(y: Process, f: Filtration, space: FiniteSpace) -> Process:
    _check_process(y, f)
    return Process(tuple(cond_exp(y[t], f[t], space) for t in range(f.T + 1)))


def check_time_values(r: Sequence, T: int):
    for w, v in enumerate(r):
        if v != INF and not (isinstance(v, int) and not isinstance(v, bool) and 0 <= v <= T):
            raise DimensionError(f"time value {v!r} on outcome {w} is outside 0..{T} and infinity")


def stopping_time_defect(r: Sequence, f: Filtration):
    """First grid time ``t`` at which ``{r <= t}`` is not ``f[t]``-measurable."""
    _check_len(r, f.n)
    check_time_values(r, f.T)
    for t in range(f.T + 1):
        if not is_measurable(tuple(v <= t for v in r), f[t]):
            return t
    return None


def is_stopping_time(r: Sequence, f: Filtration) -> bool:
    return stopping_time_defect(r, f) is None


def sigma_at_random_time(r: Sequence, f: Filtration) -> Partition:
    """The sigma-algebra generated by ``X_r 1_{r<inf}`` for adapted ``X``.

    On ``{r = t}`` the atoms are the traces of ``f[t]``, and ``{r = inf}``
    is a single atom.  No stopping-time property is required.
    """
    _check_len(r, f.n)
    check_time_values(r, f.T)
    return Partition(("inf",) if v == INF else (v, f[v].labels[w]) for w, v in enumerate(r))


def sigma_at_stopping_time(r: Sequence, f: Filtration) -> Partition:
    """The stopping-time sigma-algebra of a stopping time of ``f``."""
    t = stopping_time_defect(r, f)
    if t is not None:
        raise StoppingTimeError(t, f"{{r <= {t}}} is not measurable at time {t}")
    return sigma_at_random_time(r, f)


def indicator(event: Iterable[bool]) -> RandomVariable:
    return tuple(Fraction(1) if e else Fraction(0) for e in event)
