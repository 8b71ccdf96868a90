from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ilpminer.loglib import EventLog
from ilpminer.measures import dependency_measures
from ilpminer.relations import RelationCounts, count_relations


def counts_from(direct, repeat2=None):
    direct = np.asarray(direct, dtype=np.int64)
    n = len(direct)
    rep = np.zeros((n, n), np.int64) if repeat2 is None else np.asarray(repeat2, dtype=np.int64)
    return RelationCounts(direct.sum(axis=1), direct, rep)


def test_abab_exact():
    m = dependency_measures(count_relations(EventLog.from_sequences([list("ababa")])))
    assert abs(m.d[0, 1]) <= 1e-12 and abs(m.d[1, 0]) <= 1e-12
    assert abs(m.l[0, 1] - 0.75) <= 1e-12 and abs(m.l[1, 0] - 0.75) <= 1e-12
    assert np.all(np.abs(m.s) <= 1e-12)


def test_one_sided_succession():
    m = dependency_measures(counts_from([[0, 5], [0, 0]]))
    assert abs(m.d[0, 1] - 5 / 6) <= 1e-12
    assert abs(m.d[1, 0] + 5 / 6) <= 1e-12


def test_balanced_succession_is_zero():
    assert dependency_measures(counts_from([[0, 4], [4, 0]])).d[0, 1] == 0.0


def test_loop_measures():
    m = dependency_measures(counts_from([[0, 3], [3, 0]], [[0, 3], [1, 0]]))
    assert abs(m.l[0, 1] - 0.8) <= 1e-12
    assert m.s[0] == 0.0
    m = dependency_measures(counts_from([[7, 0], [0, 0]]))
    assert abs(m.s[0] - 7 / 8) <= 1e-12


count_mats = st.integers(2, 6).flatmap(
    lambda n: st.tuples(arrays(np.int64, (n, n), elements=st.integers(0, 500)),
                        arrays(np.int64, (n, n), elements=st.integers(0, 500))))


@given(count_mats)
@settings(max_examples=200, deadline=None)
def test_exact_against_fractions(mats):
    direct, rep = mats
    m = dependency_measures(counts_from(direct, rep))
    n = len(direct)
    for i in range(n):
        s = Fraction(int(direct[i, i]), int(direct[i, i]) + 1)
        assert abs(m.s[i] - float(s)) <= 1e-12
        for j in range(n):
            if i == j:
                continue
            ab, ba = int(direct[i, j]), int(direct[j, i])
            assert abs(m.d[i, j] - float(Fraction(ab - ba, ab + ba + 1))) <= 1e-12
            r = int(rep[i, j]) + int(rep[j, i])
            assert abs(m.l[i, j] - float(Fraction(r, r + 1))) <= 1e-12


@given(count_mats)
@settings(max_examples=200, deadline=None)
def test_symmetries_and_ranges(mats):
    direct, rep = mats
    m = dependency_measures(counts_from(direct, rep))
    assert np.array_equal(m.d + m.d.T, np.zeros_like(m.d))
    assert np.array_equal(m.l, m.l.T)
    assert (np.abs(m.d) < 1).all()
    assert ((m.s >= 0) & (m.s < 1)).all() and ((m.l >= 0) & (m.l < 1)).all()


@given(count_mats, st.data())
@settings(max_examples=100, deadline=None)
def test_monotone_in_forward_count(mats, data):
    direct, _ = mats
    n = len(direct)
    i = data.draw(st.integers(0, n - 1))
    j = data.draw(st.sampled_from([k for k in range(n) if k != i]))
    bumped = direct.copy()
    bumped[i, j] += 1
    assert dependency_measures(counts_from(bumped)).d[i, j] > dependency_measures(counts_from(direct)).d[i, j]
