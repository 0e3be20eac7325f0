import pytest
from hypothesis import given, settings, strategies as st

from gcpls.counters import ExactCounter, FreqCounter, LossyCounter, make_counter


def literal_frequency_counting(stream, v, eps):
    """Step-by-step transcription of the capacity-bounded counting loop."""
    H = {}
    for ab in stream:
        if H.get(ab, 0) != 0:
            H[ab] += 1
        else:
            if len(H) >= v:
                while v * (1 - eps / 100) < len(H):
                    for k in list(H):
                        H[k] -= 1
                        if H[k] == 0:
                            del H[k]
            H[ab] = 1
    return H


def literal_lossy_counting(stream, ell):
    H = {}
    N = 0
    delta = 0
    for ab in stream:
        N += 1
        if H.get(ab, 0) != 0:
            H[ab] += 1
        else:
            H[ab] = delta + 1
        if N // ell != delta:
            delta = N // ell
            for k in list(H):
                if H[k] < delta:
                    del H[k]
    return H


def exact(stream):
    H = {}
    for ab in stream:
        H[ab] = H.get(ab, 0) + 1
    return H


streams = st.lists(st.sampled_from("ABCDEFGH"), max_size=300)


def test_freq_hand_trace():
    c = FreqCounter(capacity=2, vacancy=50)
    for x in "AAAB":
        c.observe(x)
    assert c.as_dict() == {"A": 3, "B": 1}
    c.observe("C")
    assert c.as_dict() == {"A": 2, "C": 1}
    assert literal_frequency_counting("AAABC", 2, 50) == {"A": 2, "C": 1}


@given(streams, st.integers(1, 10), st.sampled_from([10.0, 30.0, 50.0, 90.0]))
def test_freq_matches_literal_and_bounded(stream, v, eps):
    c = FreqCounter(v, eps)
    for x in stream:
        c.observe(x)
        assert len(c) <= v
    assert c.as_dict() == literal_frequency_counting(stream, v, eps)
    assert c.peak_size <= v


@given(streams)
def test_freq_large_capacity_is_exact(stream):
    c = FreqCounter(len(set(stream)) + 1, 30).observe_all(stream)
    assert c.as_dict() == exact(stream)
    c = FreqCounter(max(len(set(stream)), 1), 30).observe_all(stream)
    assert c.as_dict() == exact(stream)


@given(streams, st.integers(1, 40))
def test_lossy_matches_literal(stream, ell):
    c = LossyCounter(ell)
    for x in stream:
        c.observe(x)
        if c.N % ell == 0:
            assert all(v >= c.delta for v in c.table.values())
    assert c.as_dict() == literal_lossy_counting(stream, ell)
    assert c.min_boundary_slack >= 0


@given(streams)
def test_lossy_single_interval_is_exact(stream):
    c = LossyCounter(max(len(stream), 1)).observe_all(stream)
    assert c.as_dict() == exact(stream)


def test_lossy_eviction_example():
    # interval 2: "A B" closes interval 1 (delta=1), nothing below 1;
    # "C D" closes interval 2: C and D entered at 2, A and B (1) are evicted
    c = LossyCounter(2).observe_all("ABCD")
    assert c.as_dict() == {"C": 2, "D": 2}
    assert c.delta == 2


def test_exact_counter():
    c = ExactCounter().observe_all([(1, 2), (2, 1), (1, 2)])
    assert c.as_dict() == {(1, 2): 2, (2, 1): 1}
    assert c[(9, 9)] == 0


def test_make_counter_validation():
    with pytest.raises(ValueError):
        make_counter("lossy")
    with pytest.raises(ValueError):
        make_counter("freq", capacity=0, vacancy=30)
    with pytest.raises(ValueError):
        make_counter("freq", capacity=4, vacancy=100)
    with pytest.raises(ValueError):
        make_counter("bogus")
