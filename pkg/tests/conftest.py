from fractions import Fraction

from hypothesis import settings, strategies as st

from osfkit.core import INF, Filtration, FiniteSpace, Partition

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@st.composite
def spaces(draw, max_n=12, min_n=1):
    n = draw(st.integers(min_n, max_n))
    w = draw(st.lists(st.integers(1, 5), min_size=n, max_size=n))
    total = sum(w)
    return FiniteSpace(tuple(range(n)), tuple(Fraction(x, total) for x in w))


@st.composite
def partitions(draw, n):
    return Partition(draw(st.lists(st.integers(0, 3), min_size=n, max_size=n)))


@st.composite
def filtrations(draw, n, max_T=4):
    T = draw(st.integers(0, max_T))
    labels = [tuple(draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))]
    for _ in range(T):
        split = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
        labels.append(tuple(zip(labels[-1], split)))
    return Filtration(Partition(lab) for lab in labels)


def random_times(n, T):
    return st.lists(st.sampled_from(list(range(T + 1)) + [INF]), min_size=n, max_size=n).map(tuple)


@st.composite
def models(draw, max_n=10, max_T=4):
    space = draw(spaces(max_n))
    f = draw(filtrations(space.n, max_T))
    return space, f


def rv(n):
    return st.lists(st.integers(-5, 5).map(Fraction), min_size=n, max_size=n).map(tuple)
