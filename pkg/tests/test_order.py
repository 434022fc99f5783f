import itertools
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seriation.order import (
    Ordering,
    check_aligned,
    kendall_tau,
    l1_distance,
    linf_distance,
    merge_orderings,
    ordering_from_values,
    reverse,
)


def brute_kendall(r):
    r = list(r)
    return sum(1 for i, j in itertools.combinations(range(len(r)), 2) if r[i] > r[j])


perms = st.integers(1, 60).flatmap(lambda n: st.permutations(list(range(1, n + 1))))


def test_from_values_examples():
    assert ordering_from_values({1: 0.1, 2: 0.2, 3: 0.3}).as_dict() == {1: 1, 2: 2, 3: 3}
    assert ordering_from_values({1: 0.3, 2: 0.2, 3: 0.1}).as_dict() == {1: 3, 2: 2, 3: 1}
    assert ordering_from_values({1: 0.5, 2: 0.5, 3: 0.1}).as_dict() == {3: 1, 1: 2, 2: 3}
    with pytest.raises(ValueError):
        ordering_from_values({})
    with pytest.raises(ValueError):
        ordering_from_values([1, 1], [0.0, 1.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=1, max_size=30))
def test_from_values_rank_formula_and_monotone_invariance(vals):
    v = np.arange(1, len(vals) + 1) * 7
    f = np.array(vals, dtype=float)
    o = ordering_from_values(v, f)
    # rank(i) = #{j : f(j) < f(i)} + #{j <= i : f(j) == f(i)} under id tie-breaking
    for k in range(len(vals)):
        expect = int(np.sum(f < f[k]) + np.sum((f == f[k]) & (v <= v[k])))
        assert o.ranks[k] == expect
    assert ordering_from_values(v, np.exp(f) * 3 + 1) == o


def test_ordering_validation():
    with pytest.raises(ValueError):
        Ordering(np.array([1, 2]), np.array([1, 1]))
    with pytest.raises(ValueError):
        Ordering(np.array([2, 1]), np.array([1, 2]))
    with pytest.raises(ValueError):
        Ordering(np.array([], dtype=int), np.array([], dtype=int))


def test_reverse_examples():
    idn = Ordering.identity([1, 2, 3])
    assert reverse(idn).as_dict() == {1: 3, 2: 2, 3: 1}
    single = Ordering.identity([4])
    assert reverse(single) == single


@settings(max_examples=200, deadline=None)
@given(perms)
def test_reverse_involution_and_symmetrized_invariance(p):
    a = Ordering.from_sequence(p)
    b = Ordering.identity(range(1, len(p) + 1))
    assert reverse(reverse(a)) == a
    assert l1_distance(reverse(a), b) == l1_distance(a, b)
    assert linf_distance(reverse(a), b) == linf_distance(a, b)


def test_distance_examples():
    idn = Ordering.identity([1, 2, 3, 4])
    b = Ordering.from_line("2 1 4 3")
    assert l1_distance(idn, b, symmetrized=False) == 4
    assert linf_distance(idn, b, symmetrized=False) == 1
    assert l1_distance(idn, idn) == 0 and linf_distance(idn, idn) == 0
    assert l1_distance(reverse(idn), idn) == 0
    assert linf_distance(reverse(idn), idn) == 0
    assert l1_distance(reverse(idn), idn, symmetrized=False) == 8
    with pytest.raises(ValueError):
        l1_distance(idn, Ordering.identity([1, 2, 3, 5]))


def test_kendall_examples():
    assert kendall_tau(Ordering.identity(range(1, 9))) == 0
    assert kendall_tau([5, 4, 3, 2, 1]) == 10
    for n in (1, 2, 17, 300):
        assert kendall_tau(np.arange(n, 0, -1)) == n * (n - 1) // 2


@settings(max_examples=300, deadline=None)
@given(perms)
def test_kendall_brute_force_and_sandwich(p):
    d = kendall_tau(p)
    assert d == brute_kendall(p)
    l1 = int(np.abs(np.array(p) - np.arange(1, len(p) + 1)).sum())
    assert d <= l1 <= 2 * d


def test_kendall_sandwich_random_permutations():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        n = int(rng.integers(1, 200))
        p = rng.permutation(n) + 1
        d = kendall_tau(p)
        l1 = int(np.abs(p - np.arange(1, n + 1)).sum())
        assert d <= l1 <= 2 * d


def test_merge_examples():
    parts = [Ordering.identity([1, 4]), Ordering.identity([2, 5]), Ordering.identity([3, 6])]
    assert merge_orderings(parts, 6) == Ordering.identity(range(1, 7))
    single = [Ordering.identity([9 - 6]), Ordering.identity([1]), Ordering.identity([2])]
    m = merge_orderings(single, 3)
    assert m.as_dict() == {3: 1, 1: 2, 2: 3}


def test_merge_rejects_bad_inputs():
    with pytest.raises(ValueError):
        merge_orderings([Ordering.identity([1, 2, 3]), Ordering.identity([4]), Ordering.identity([5])], 5)
    with pytest.raises(ValueError):
        merge_orderings([Ordering.identity([1, 2]), Ordering.identity([3, 4]), Ordering.identity([5, 7])], 6)
    with pytest.raises(ValueError):
        merge_orderings([Ordering.identity([1, 2])] * 2, 4)


def test_merge_bijective_random():
    rng = np.random.default_rng(11)
    for _ in range(100):
        perm = rng.permutation(10) + 1
        parts = [perm[:4], perm[4:7], perm[7:]]
        ords = [ordering_from_values(p, rng.random(p.size)) for p in parts]
        m = merge_orderings(ords, 10)
        assert sorted(m.ranks) == list(range(1, 11))
        # interleave rule: rank k+1 in part j lands at 3k + j
        for j, o in enumerate(ords, start=1):
            np.testing.assert_array_equal(m.rank_of(o.support), 3 * (o.ranks - 1) + j)


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 80), st.randoms(use_true_random=False))
def test_merge_of_identity_restrictions(n, rnd):
    perm = list(range(1, n + 1))
    rnd.shuffle(perm)
    m, r = divmod(n, 3)
    a, b = m + (r >= 1), 2 * m + (r >= 1) + (r >= 2)
    parts = [sorted(perm[:a]), sorted(perm[a:b]), sorted(perm[b:])]
    idn = Ordering.identity(range(1, n + 1))
    ords = [idn.restrict(p) for p in parts]
    merged = merge_orderings(ords, n)
    assert sorted(merged.ranks) == list(range(1, n + 1))


def test_restrict_sequence_line_round_trip():
    o = Ordering.from_sequence([3, 1, 4, 2])
    assert o.as_dict() == {3: 1, 1: 2, 4: 3, 2: 4}
    np.testing.assert_array_equal(o.sequence(), [3, 1, 4, 2])
    assert o.restrict([2, 3]).as_dict() == {3: 1, 2: 2}
    assert Ordering.from_line(o.to_line()) == o
    with pytest.raises(ValueError):
        o.rank_of([7])


def test_alignment_examples(caplog):
    # the reversed side is 1 - 1/|S|, so |S| > 1000 is needed to clear CLOSE_HI
    a = Ordering.identity(range(1, 2002))
    al = check_aligned(a, a)
    assert al.aligned and al.direct == 0.0 and al.closely_aligned
    rv = check_aligned(reverse(a), a)
    assert not rv.aligned and not rv.closely_aligned
    disjoint = check_aligned(Ordering.identity([1, 2]), Ordering.identity([3, 4]))
    assert disjoint.aligned and disjoint.overlap == 0


def test_alignment_tie_counts_as_aligned():
    a = Ordering.identity([1, 2, 3])
    b = Ordering.identity([2])
    # common support {2}: direct = |1/3 - 1|, reversed = |3/3 - 1|... compute by hand
    al = check_aligned(a, b)
    assert al.direct == pytest.approx(abs(2 / 3 - 1))
    assert al.reversed == pytest.approx(abs(2 / 3 - 1))
    assert al.aligned


def test_alignment_warns_when_not_clean(caplog):
    rng = np.random.default_rng(0)
    a = ordering_from_values(np.arange(1, 101), rng.random(100))
    b = Ordering.identity(range(1, 101))
    with caplog.at_level(logging.WARNING, logger="seriation.order"):
        check_aligned(a, b)
    assert "not clean" in caplog.text


def test_alignment_hand_computed():
    # a on {1..4}; b on {2,3,4,5}; common {2,3,4}
    a = Ordering.from_line("1 2 3 4")
    b = Ordering(np.array([2, 3, 4, 5]), np.array([4, 3, 2, 1]))
    al = check_aligned(a, b)
    direct = max(abs(2 / 4 - 4 / 4), abs(3 / 4 - 3 / 4), abs(4 / 4 - 2 / 4))
    rev = max(abs(3 / 4 - 4 / 4), abs(2 / 4 - 3 / 4), abs(1 / 4 - 2 / 4))
    assert al.direct == pytest.approx(direct) and al.reversed == pytest.approx(rev)
    assert al.aligned is (direct <= rev)
