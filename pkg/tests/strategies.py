from hypothesis import strategies as st

from cardmed.model import UNBOUNDED, Interval


def intervals(max_bound=50, unbounded=True):
    bounded = st.tuples(st.integers(0, max_bound), st.integers(0, max_bound)).map(
        lambda t: Interval(min(t), max(t))
    )
    if not unbounded:
        return bounded
    open_ended = st.integers(0, max_bound).map(lambda lo: Interval(lo, UNBOUNDED))
    return st.one_of(bounded, open_ended)
