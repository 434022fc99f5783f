import itertools
import logging
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seriation.graphon import Graphon, SampledGraph, model_matrix, sample_graph
from seriation.order import Ordering, check_aligned, linf_distance, merge_orderings, reverse
from seriation.postproc import (
    GoodPartition,
    NeighborStats,
    SplitConfig,
    comparison_matrix,
    default_grid,
    empirical_cutoffs,
    estimate_extremes,
    fhat_compare,
    full_postprocess,
    learn_alpha_beta,
    neighbor_stats,
    postprocess_trace,
    sample_good_partition,
    score_and_order,
    split_postprocess,
)
from seriation.spectral import spectral_seriation


@pytest.fixture(autouse=True)
def _quiet_alignment():
    logging.getLogger("seriation.order").setLevel(logging.ERROR)
    yield
    logging.getLogger("seriation.order").setLevel(logging.NOTSET)


def stats_with(psiR, psiL, cR, cL, S=None):
    psiR = np.asarray(psiR, float)
    S = np.arange(1, psiR.size + 1) if S is None else np.asarray(S)
    e = np.array([], dtype=np.int64)
    return NeighborStats(S, psiR, np.asarray(psiL, float), e, e, 10, cR, cL)


def relabelled_model(graphon, n, seed):
    """Weighted noise-free graph with a random labelling; returns (matrix, truth)."""
    P = model_matrix(graphon, n)
    np.fill_diagonal(P, 0.0)
    pi = np.random.default_rng(seed).permutation(n)
    B = np.zeros_like(P)
    B[np.ix_(pi, pi)] = P
    pos = np.empty(n, dtype=np.int64)
    pos[pi] = np.arange(1, n + 1)
    return B, Ordering(np.arange(1, n + 1), pos)


def test_split_config():
    cfg = SplitConfig(0.05, 0.31)
    assert cfg.mu == (0.05 + 0.31) / 2
    for a, b in [(0.0, 0.3), (0.3, 0.3), (0.1, 0.5), (0.4, 0.2)]:
        with pytest.raises(ValueError):
            SplitConfig(a, b)


def test_extremes_examples():
    R, L = estimate_extremes(Ordering.identity(range(1, 21)), 0.05)
    assert R.tolist() == [20] and L.tolist() == [1]
    R, L = estimate_extremes(Ordering.identity(range(1, 11)), 0.2)
    assert sorted(L) == [1, 2] and sorted(R) == [9, 10]
    with pytest.raises(ValueError):
        estimate_extremes(Ordering.identity(range(1, 11)), 0.5)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 400), st.floats(0.001, 0.499))
def test_extremes_sizes(t, alpha):
    o = Ordering.from_sequence(np.random.default_rng(t).permutation(t) + 1)
    R, L = estimate_extremes(o, alpha)
    assert np.intersect1d(R, L).size == 0
    assert abs(R.size - math.ceil(alpha * t)) <= 1 and abs(L.size - math.ceil(alpha * t)) <= 1
    assert R.size == L.size


def test_neighbor_stats_examples():
    n = 40
    K = np.ones((n, n), bool) & ~np.eye(n, dtype=bool)
    S = np.arange(11, 21)
    st_ = neighbor_stats(K, np.array([1, 2, 3]), np.array([4, 5]), S, 30)
    np.testing.assert_allclose(st_.psiR, 0.1)
    np.testing.assert_allclose(st_.psiL, 2 / 30)
    empty = neighbor_stats(SampledGraph.from_edges(n, []), [1, 2], [3], S, 30)
    assert not empty.psiR.any() and not empty.psiL.any()
    none = neighbor_stats(K, [], [4], S, 30)
    assert not none.psiR.any()
    with pytest.raises(ValueError):
        neighbor_stats(K, [11], [4], S, 30)


def test_neighbor_stats_scaled_counts_are_integers():
    g = sample_graph(Graphon.affine(0.8), 90, 0.6, 8)
    st_ = neighbor_stats(g, np.arange(1, 5), np.arange(85, 91), np.arange(20, 60), 30)
    for v in (st_.psiR * 30, st_.psiL * 30):
        np.testing.assert_allclose(v, np.round(v), atol=1e-12)


def test_cutoff_examples():
    s = stats_with([0.1, 0.2, 0.3, 0.4], [0.4, 0.3, 0.2, 0.1], None, None)
    assert empirical_cutoffs(s, 0.25) == (0.3, 0.3)
    c = stats_with([0.2] * 5, [0.7] * 5, None, None)
    assert empirical_cutoffs(c, 0.31) == (0.2, 0.7)
    # ceil((1 - beta) * 4) = 3 for every beta in [0.25, 0.5)
    assert empirical_cutoffs(s, 0.4999)[0] == 0.3
    with pytest.raises(ValueError):
        empirical_cutoffs(stats_with([], [], None, None), 0.3)
    with pytest.raises(ValueError):
        empirical_cutoffs(s, 0.5)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 20), min_size=1, max_size=40), st.floats(0.01, 0.49))
def test_cutoff_is_infimum_of_definition(counts, beta):
    vals = np.array(counts) / 20
    cR, _ = empirical_cutoffs(stats_with(vals, vals, None, None), beta)
    need = (1 - beta) * vals.size
    assert np.sum(vals <= cR) >= need - 1e-9
    smaller = vals[vals < cR]
    if smaller.size:
        assert np.sum(vals <= smaller.max()) < need - 1e-9


def test_fhat_examples():
    s = stats_with([0.1, 0.2], [0.5, 0.5], cR=0.25, cL=0.9)
    assert fhat_compare(s, 1, 2) == 1 and fhat_compare(s, 2, 1) == -1
    s2 = stats_with([0.3, 0.4], [0.3, 0.1], cR=0.25, cL=0.35)
    assert fhat_compare(s2, 1, 2) == 1
    with pytest.raises(ValueError):
        fhat_compare(s, 1, 1)
    with pytest.raises(ValueError):
        fhat_compare(stats_with([0.1, 0.2], [0.1, 0.2], None, None), 1, 2)


def _branch_oracle(rU, rV, lU, lV, cR, cL):
    """Four mutually exclusive events for u < v, written out one by one."""
    fired = []
    if rU < cR and rV < cR:
        fired.append(1 - 2 * (rU > rV))
    if not (rU < cR and rV < cR) and lU < cL and lV < cL:
        fired.append(1 - 2 * (lU < lV))
    if not (rU < cR and rV < cR) and not (lU < cL and lV < cL) and rU < cR:
        fired.append(1)
    if not (rU < cR and rV < cR) and not (lU < cL and lV < cL) and not rU < cR:
        fired.append(-1)
    return fired


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 25), st.integers(0, 2**32 - 1))
def test_fhat_antisymmetry_and_branch_totality(m, seed):
    rng = np.random.default_rng(seed)
    r = rng.integers(0, 6, m) / 10
    l = rng.integers(0, 6, m) / 10
    s = stats_with(r, l, None, None, S=np.sort(rng.choice(500, m, replace=False) + 1))
    cR, cL = empirical_cutoffs(s, 0.3)
    s = replace(s, cR=cR, cL=cL)
    F = comparison_matrix(s)
    assert np.array_equal(F, -F.T) and not np.diag(F).any()
    for i, j in itertools.combinations(range(m), 2):
        fired = _branch_oracle(r[i], r[j], l[i], l[j], cR, cL)
        assert len(fired) == 1
        assert F[i, j] == fired[0] == fhat_compare(s, s.S[i], s.S[j])
        assert fhat_compare(s, s.S[j], s.S[i]) == -fired[0]


def test_score_brute_force_small_instance():
    # psiR increasing except two swapped pairs; everything below the cutoff
    r = np.array([0.1, 0.3, 0.2, 0.4, 0.6, 0.5])
    s = stats_with(r, np.zeros(6), cR=1.0, cL=1.0)
    f = {v: sum(fhat_compare(s, u, v) for u in range(1, 7) if u != v) for v in range(1, 7)}
    ranked = sorted(range(1, 7), key=lambda v: (f[v], v))
    assert score_and_order(s) == Ordering.from_sequence(ranked)
    assert score_and_order(s).sequence().tolist() == [1, 3, 2, 4, 6, 5]


def test_score_degenerate_and_perfect():
    z = stats_with(np.zeros(5), np.zeros(5), cR=0.0, cL=0.0, S=[2, 4, 6, 8, 10])
    o = score_and_order(z)
    assert sorted(o.ranks) == [1, 2, 3, 4, 5]
    p = stats_with(np.linspace(0.1, 0.2, 7), np.zeros(7), cR=1.0, cL=1.0)
    assert score_and_order(p) == Ordering.identity(range(1, 8))


def test_good_partition_sizes():
    for n, sizes in [(6, (2, 2, 2)), (7, (3, 2, 2)), (8, (3, 3, 2))]:
        assert sample_good_partition(n, 1).sizes() == sizes
    with pytest.raises(ValueError):
        sample_good_partition(2, 0)
    with pytest.raises(ValueError):
        GoodPartition((np.array([1, 2, 3]), np.array([4]), np.array([5])))


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 500), st.integers(0, 2**63 - 1))
def test_good_partition_chain(n, seed):
    P = sample_good_partition(n, seed)
    m = n // 3
    s1, s2, s3 = P.sizes()
    assert m <= s3 <= s2 <= s1 <= m + 1
    assert np.array_equal(np.sort(np.concatenate(P.parts)), np.arange(1, n + 1))


def test_split_singleton_and_overlap():
    A = model_matrix(Graphon.affine(0.8), 20)
    np.fill_diagonal(A, 0)
    o = split_postprocess(A, np.arange(1, 20), [20])
    assert o.as_dict() == {20: 1}
    with pytest.raises(ValueError):
        split_postprocess(A, np.arange(1, 11), np.arange(10, 21))


@pytest.mark.parametrize("graphon", [Graphon.affine(0.8), Graphon.rbf(0.3)], ids=lambda g: g.name)
def test_split_noiseless_exact(graphon):
    n = 150
    B, truth = relabelled_model(graphon, n, 21)
    P = sample_good_partition(n, 5)
    o = split_postprocess(B, P[0], P[1])
    t = truth.restrict(P[1])
    assert o == t or o == reverse(t)


def test_split_is_bijection_on_sample():
    g = sample_graph(Graphon.affine(0.8), 300, 1.0, 2)
    P = sample_good_partition(300, 3)
    o = split_postprocess(g, P[2], P[0])
    assert np.array_equal(o.support, P[0]) and sorted(o.ranks) == list(range(1, P[0].size + 1))


@pytest.mark.parametrize("n", [60, 150])
def test_full_noiseless_parts_exact_and_consistent(n):
    # the interleaving merge only reproduces the identity for perfectly
    # interleaved parts, so exactness is checked part by part
    B, truth = relabelled_model(Graphon.affine(0.8), n, n)
    tr = postprocess_trace(B, seed=n)
    exact = [truth.restrict(tr.partition[j]) for j in range(3)]
    same = all(o == t for o, t in zip(tr.part_orders, exact))
    flipped = all(o == reverse(t) for o, t in zip(tr.part_orders, exact))
    assert same or flipped
    assert tr.ordering == merge_orderings(list(tr.part_orders), n)
    assert linf_distance(tr.ordering, truth) <= 3 * math.sqrt(n * math.log(n))


def test_full_deterministic_and_seed_dependent():
    g = sample_graph(Graphon.affine(0.8), 240, 1.0, 17)
    a, b = full_postprocess(g, seed=4), full_postprocess(g, seed=4)
    assert a == b
    assert sorted(a.ranks) == list(range(1, 241))
    assert postprocess_trace(g, seed=5).partition[0].tolist() != postprocess_trace(g, seed=4).partition[0].tolist()


def test_full_minimum_n():
    with pytest.raises(ValueError):
        full_postprocess(model_matrix(Graphon.affine(0.8), 29))


def test_merge_alignment_round_trip():
    n = 90
    idn = Ordering.identity(range(1, n + 1))
    P = sample_good_partition(n, 12)
    ref = idn.restrict(sample_good_partition(n, 13)[1])
    parts = [idn.restrict(P[0]), reverse(idn.restrict(P[1])), reverse(idn.restrict(P[2]))]
    fixed = [o if check_aligned(o, ref).aligned else reverse(o) for o in parts]
    merged = merge_orderings(fixed, n)
    assert merged == merge_orderings([idn.restrict(P[j]) for j in range(3)], n)
    # with interleaved parts the round trip is exactly the identity
    inter = [np.arange(j, n + 1, 3) for j in (1, 2, 3)]
    parts = [idn.restrict(inter[0]), reverse(idn.restrict(inter[1])), idn.restrict(inter[2])]
    fixed = [o if check_aligned(o, ref).aligned else reverse(o) for o in parts]
    assert merge_orderings(fixed, n) == idn


def test_psi_respects_order_left_of_mu():
    # for x(u) < x(v) <= 1 - mu separated by more than 5 sqrt(log N / N),
    # psiR should almost always respect the order
    N = 2000
    g = sample_graph(Graphon.affine(0.8), N, 1.0, 64)
    A = g.adjacency()
    P = sample_good_partition(N, 64)
    T, S = P[0], P[1]
    oT = spectral_seriation(A[np.ix_(T - 1, T - 1)], vertices=T)
    R, L = estimate_extremes(oT, 0.05)
    if R.mean() < L.mean():
        R, L = L, R
    stats = neighbor_stats(A, R, L, S, T.size)
    x = S / N
    keep = x <= 1 - SplitConfig().mu
    xs, ps = x[keep], stats.psiR[keep]
    sep = (xs[None, :] - xs[:, None]) > 5 * math.sqrt(math.log(N) / N)
    frac = np.mean((ps[None, :] >= ps[:, None])[sep])
    assert frac > 0.99


def test_default_grid():
    grid = default_grid()
    assert grid[0] == (0.02, 0.07) and (0.14, 0.44) in grid
    assert all(0 < a < b <= 0.45 for a, b in grid)
    assert sorted({a for a, _ in grid}) == [0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.14]


def test_learn_alpha_beta():
    g = sample_graph(Graphon.affine(0.8), 2000, 1.0, 2000)
    grid = default_grid() + [(0.05, 0.31)]
    ab = learn_alpha_beta(g, grid, delta=0.01)
    assert ab is not None and ab in grid
    c = sample_graph(Graphon.constant(0.5), 600, 1.0, 1)
    assert learn_alpha_beta(c, grid, delta=0.01) is None
    assert learn_alpha_beta(g, [], delta=0.01) is None
    with pytest.raises(ValueError):
        learn_alpha_beta(g, [(0.3, 0.2)])


def _sup_error_on(o: Ordering, S: np.ndarray) -> float:
    truth = Ordering.identity(S)
    return linf_distance(o.restrict(S), truth)


@pytest.mark.xfail(strict=True, reason="pre-asymptotic at N=1200: split wins 0 of 50 measured trials")
def test_split_beats_spectral_n1200():
    wins = 0
    for t in range(50):
        g = sample_graph(Graphon.affine(0.8), 1200, 1.0, 1200 + t)
        P = sample_good_partition(1200, t)
        split = split_postprocess(g, P[0], P[1])
        plain = spectral_seriation(g)
        wins += _sup_error_on(split, P[1]) <= _sup_error_on(plain, P[1])
    assert wins >= 40


@pytest.mark.xfail(strict=True, reason="pre-asymptotic at N=3000: median sup error / N is about 0.3")
def test_full_postprocess_sup_error_n3000():
    good = 0
    idn = Ordering.identity(range(1, 3001))
    for t in range(20):
        g = sample_graph(Graphon.affine(0.8), 3000, 1.0, 3000 + t)
        good += linf_distance(full_postprocess(g, seed=t), idn) / 3000 <= 0.05
    assert good >= 18
