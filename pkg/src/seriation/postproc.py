"""Post-processing of the spectral estimate.

:func:`split_postprocess` orders a vertex set ``S`` by counting each
vertex's neighbours among the estimated right-most and left-most vertices
of a disjoint set ``T``.  :func:`full_postprocess` runs it on the three
cyclic pairs of a random good partition, aligns the three part orderings
against a reference built from an independent partition and interleaves
them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .graphon import SampledGraph
from .order import Ordering, check_aligned, merge_orderings, ordering_from_values, reverse
from .seeding import derive_seed, rng
from .spectral import DEFAULT_TOL, spectral_seriation

logger = logging.getLogger(__name__)

__all__ = [
    "SplitConfig",
    "GoodPartition",
    "NeighborStats",
    "PostprocessTrace",
    "estimate_extremes",
    "neighbor_stats",
    "empirical_cutoffs",
    "fhat_compare",
    "comparison_matrix",
    "score_and_order",
    "split_postprocess",
    "sample_good_partition",
    "full_postprocess",
    "postprocess_trace",
    "default_grid",
    "learn_alpha_beta",
]

MIN_N = 30
MAX_PARTITION_RETRIES = 16


@dataclass(frozen=True)
class SplitConfig:
    alpha: float = 0.05
    beta: float = 0.31

    def __post_init__(self):
        if not (0.0 < self.alpha < self.beta < 0.5):
            raise ValueError(f"need 0 < alpha < beta < 0.5, got ({self.alpha}, {self.beta})")

    @property
    def mu(self) -> float:
        return (self.alpha + self.beta) / 2


@dataclass(frozen=True, eq=False)
class GoodPartition:
    """Three disjoint sorted vertex arrays with ``m <= |S3| <= |S2| <= |S1| <= m + 1``."""

    parts: tuple[np.ndarray, np.ndarray, np.ndarray]

    def __post_init__(self):
        parts = tuple(np.sort(np.asarray(p, dtype=np.int64)) for p in self.parts)
        if len(parts) != 3:
            raise ValueError("a good partition has exactly three parts")
        n = sum(p.size for p in parts)
        m = n // 3
        s1, s2, s3 = (p.size for p in parts)
        if not (m <= s3 <= s2 <= s1 <= m + 1):
            raise ValueError(f"part sizes {(s1, s2, s3)} violate the good-partition chain")
        if not np.array_equal(np.sort(np.concatenate(parts)), np.arange(1, n + 1)):
            raise ValueError("parts must partition 1..n")
        object.__setattr__(self, "parts", parts)

    @property
    def n(self) -> int:
        return sum(p.size for p in self.parts)

    def __getitem__(self, j: int) -> np.ndarray:
        return self.parts[j]

    def sizes(self) -> tuple[int, int, int]:
        return tuple(p.size for p in self.parts)


@dataclass(frozen=True, eq=False)
class NeighborStats:
    S: np.ndarray
    psiR: np.ndarray
    psiL: np.ndarray
    R: np.ndarray
    L: np.ndarray
    t_size: int
    cR: float | None = None
    cL: float | None = None

    def index(self, v: int) -> int:
        k = int(np.searchsorted(self.S, v))
        if k >= self.S.size or self.S[k] != v:
            raise ValueError(f"vertex {v} not in S")
        return k


def estimate_extremes(order_T: Ordering, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Vertices in the top and bottom ``alpha`` fraction of ``order_T``.

    ``L`` holds ranks ``<= alpha |T|`` and ``R`` is the same set taken from
    the reversed ordering, so the two are mirror images.
    """
    if not (0.0 < alpha < 0.5):
        raise ValueError(f"alpha must lie in (0, 0.5), got {alpha}")
    t = len(order_T)
    k = math.floor(alpha * t + 1e-9)
    L = order_T.support[order_T.ranks <= k]
    R = order_T.support[order_T.ranks > t - k]
    return R, L


def neighbor_stats(g, R, L, S, t_size: int) -> NeighborStats:
    """Fraction-of-``T`` neighbour counts of each ``v`` in ``S`` within ``R`` and ``L``.

    ``g`` is a :class:`SampledGraph` or a dense boolean adjacency matrix.
    """
    A = g.adjacency() if isinstance(g, SampledGraph) else np.asarray(g)
    S = np.sort(np.asarray(S, dtype=np.int64))
    R = np.sort(np.asarray(R, dtype=np.int64))
    L = np.sort(np.asarray(L, dtype=np.int64))
    if np.intersect1d(S, np.union1d(R, L)).size:
        raise ValueError("S must be disjoint from R and L")
    if t_size < 1:
        raise ValueError("t_size must be positive")
    rows = A[S - 1]
    psiR = rows[:, R - 1].sum(axis=1) / t_size if R.size else np.zeros(S.size)
    psiL = rows[:, L - 1].sum(axis=1) / t_size if L.size else np.zeros(S.size)
    return NeighborStats(S, psiR.astype(float), psiL.astype(float), R, L, int(t_size))


def _quantile_cutoff(values: np.ndarray, beta: float) -> float:
    # smallest c with |{v : value <= c}| >= (1 - beta)|S|, i.e. an order statistic
    k = math.ceil((1.0 - beta) * values.size - 1e-9)
    k = min(max(k, 1), values.size)
    return float(np.sort(values)[k - 1])


def empirical_cutoffs(stats: NeighborStats, beta: float) -> tuple[float, float]:
    if not (0.0 < beta < 0.5):
        raise ValueError(f"beta must lie in (0, 0.5), got {beta}")
    if stats.S.size == 0:
        raise ValueError("cannot take quantiles over an empty S")
    return _quantile_cutoff(stats.psiR, beta), _quantile_cutoff(stats.psiL, beta)


def _fhat_upper(rU, rV, lU, lV, cR, cL):
    """The four-branch comparison for ``u < v`` (vectorised)."""
    in_r = (rU < cR) & (rV < cR)
    in_l = ~in_r & (lU < cL) & (lV < cL)
    out = np.where(rU < cR, 1, -1)
    out = np.where(in_l, 1 - 2 * (lU < lV), out)
    out = np.where(in_r, 1 - 2 * (rU > rV), out)
    return out.astype(np.int8)


def fhat_compare(stats: NeighborStats, u: int, v: int) -> int:
    if u == v:
        raise ValueError("fhat_compare needs two distinct vertices")
    if stats.cR is None or stats.cL is None:
        raise ValueError("cutoffs are not set")
    if u > v:
        return -fhat_compare(stats, v, u)
    i, j = stats.index(u), stats.index(v)
    return int(_fhat_upper(stats.psiR[i], stats.psiR[j], stats.psiL[i], stats.psiL[j],
                           stats.cR, stats.cL))


def comparison_matrix(stats: NeighborStats) -> np.ndarray:
    """Antisymmetric ``F[i, j] = F_hat(S[i], S[j])`` with a zero diagonal."""
    if stats.cR is None or stats.cL is None:
        raise ValueError("cutoffs are not set")
    r, l = stats.psiR, stats.psiL
    F = _fhat_upper(r[:, None], r[None, :], l[:, None], l[None, :], stats.cR, stats.cL)
    F = np.triu(F, 1)
    return F - F.T


def score_and_order(stats: NeighborStats) -> Ordering:
    """Rank ``S`` by ``f_hat(v) = sum_u F_hat(u, v)``."""
    f = comparison_matrix(stats).sum(axis=0, dtype=np.int64)
    return ordering_from_values(stats.S, f)


def split_postprocess(g, T, S, cfg: SplitConfig = SplitConfig(),
                      tolerance: float = DEFAULT_TOL) -> Ordering:
    """Order ``S`` using neighbourhood statistics computed against ``T``."""
    A = g.adjacency() if isinstance(g, SampledGraph) else np.asarray(g)
    T = np.sort(np.asarray(T, dtype=np.int64))
    S = np.sort(np.asarray(S, dtype=np.int64))
    if np.intersect1d(T, S).size:
        raise ValueError("T and S must be disjoint")
    if S.size == 1:
        return Ordering(S, np.array([1]))
    order_T = spectral_seriation(A[np.ix_(T - 1, T - 1)], tolerance, vertices=T)
    R, L = estimate_extremes(order_T, cfg.alpha)
    stats = neighbor_stats(A, R, L, S, T.size)
    cR, cL = empirical_cutoffs(stats, cfg.beta)
    return score_and_order(replace(stats, cR=cR, cL=cL))


def sample_good_partition(n: int, seed: int) -> GoodPartition:
    """Uniformly random good partition: shuffle ``1..n`` and cut.

    Remainders go to ``S1`` first, then ``S2``; for a given ``n`` this is
    the only size pattern the good-partition chain allows.
    """
    if n < 3:
        raise ValueError(f"a good partition needs n >= 3, got {n}")
    m, r = divmod(n, 3)
    sizes = (m + (r >= 1), m + (r >= 2), m)
    perm = rng(seed).permutation(n) + 1
    a, b = sizes[0], sizes[0] + sizes[1]
    return GoodPartition((perm[:a], perm[a:b], perm[b:]))


@dataclass(frozen=True, eq=False)
class PostprocessTrace:
    ordering: Ordering
    partition: GoodPartition
    reference_partition: GoodPartition
    part_orders: tuple[Ordering, Ordering, Ordering]
    reference: Ordering
    reversed_parts: tuple[bool, bool, bool]
    partition_retries: int = 0
    closely_aligned: tuple[bool, bool, bool] = field(default=(False, False, False))


def postprocess_trace(g, cfg: SplitConfig = SplitConfig(), seed: int = 0,
                      tolerance: float = DEFAULT_TOL) -> PostprocessTrace:
    """:func:`full_postprocess` with every intermediate object kept."""
    A = g.adjacency() if isinstance(g, SampledGraph) else np.asarray(g)
    n = A.shape[0]
    if n < MIN_N:
        raise ValueError(f"full post-processing needs N >= {MIN_N}, got {n}")
    P = sample_good_partition(n, derive_seed(seed, "partition", 0))
    for retry in range(MAX_PARTITION_RETRIES + 1):
        Q = sample_good_partition(n, derive_seed(seed, "partition", 1, retry))
        if all(np.intersect1d(P[j], Q[1]).size >= 2 for j in range(3)):
            break
    else:
        raise RuntimeError(
            f"reference part overlaps some S_j in fewer than 2 vertices after "
            f"{MAX_PARTITION_RETRIES} resamples")
    # pair (T, S) orders S with statistics from T
    pairs = ((P[2], P[0]), (P[0], P[1]), (P[1], P[2]))
    parts = [split_postprocess(A, T, S, cfg, tolerance) for T, S in pairs]
    ref = split_postprocess(A, Q[0], Q[1], cfg, tolerance)
    flips, close = [], []
    for j, o in enumerate(parts):
        al = check_aligned(o, ref)
        flips.append(not al.aligned)
        if not al.aligned:
            parts[j] = reverse(o)
        close.append(al.closely_aligned or (al.reversed < 0.001 and al.direct > 0.999))
    merged = merge_orderings(parts, n)
    return PostprocessTrace(merged, P, Q, tuple(parts), ref, tuple(flips), retry, tuple(close))


def full_postprocess(g, cfg: SplitConfig = SplitConfig(), seed: int = 0,
                     tolerance: float = DEFAULT_TOL) -> Ordering:
    return postprocess_trace(g, cfg, seed, tolerance).ordering


def default_grid() -> list[tuple[float, float]]:
    grid = []
    for i in range(1, 8):
        a = round(0.02 * i, 10)
        b = round(a + 0.05, 10)
        while b <= 0.45 + 1e-9:
            grid.append((a, b))
            b = round(b + 0.05, 10)
    return grid


def _nearest(xs: np.ndarray, target: float) -> int:
    return int(np.argmin(np.abs(xs - target)))


def _passes_mdi(x, psiR, psiL, alpha, beta, delta) -> bool:
    right = x >= 1.0 - alpha - delta
    left = x <= alpha + delta
    if not right.any() or not left.any():
        return False
    ok_r = psiR[right].min() > psiR[_nearest(x, 1.0 - beta)] + delta
    ok_l = psiL[left].min() > psiL[_nearest(x, beta)] + delta
    return bool(ok_r and ok_l)


def _smooth(values: np.ndarray, window: int) -> np.ndarray:
    if window <= 1:
        return values
    kernel = np.ones(window) / window
    pad = window // 2
    padded = np.pad(values, (pad, window - 1 - pad), mode="edge")
    return np.convolve(padded, kernel, mode="valid")


def learn_alpha_beta(g, grid: Iterable[tuple[float, float]] | None = None,
                     delta: float = 0.01, seed: int = 0, smooth: int = 1,
                     tolerance: float = DEFAULT_TOL) -> tuple[float, float] | None:
    """First ``(alpha, beta)`` in ``grid`` passing the empirical mean-distance test.

    One split ``(T, S)`` is drawn.  ``T`` is seriated once; for each alpha
    the neighbour statistics of ``S`` are computed and tested at estimated
    positions of ``S`` (its ranks in the whole-graph spectral order,
    oriented to agree with ``T``'s).  With ``smooth > 1`` the statistics
    are first averaged over that many rank-consecutive vertices.  Returns
    ``None`` when no pair passes.
    """
    grid = list(default_grid() if grid is None else grid)
    if not grid:
        return None
    for a, b in grid:
        SplitConfig(a, b)
    A = g.adjacency() if isinstance(g, SampledGraph) else np.asarray(g)
    n = A.shape[0]
    P = sample_good_partition(n, derive_seed(seed, "learn"))
    T, S = P[0], P[1]
    order_T = spectral_seriation(A[np.ix_(T - 1, T - 1)], tolerance, vertices=T)
    order_V = spectral_seriation(A, tolerance)
    if not check_aligned(order_V, order_T).aligned:
        order_V = reverse(order_V)
    order_S = order_V.restrict(S)
    by_rank = np.argsort(order_S.ranks)
    x = np.sort(order_S.ranks).astype(float) / S.size
    window = max(1, int(smooth))
    cache = {}
    for a, b in grid:
        if a not in cache:
            R, L = estimate_extremes(order_T, a)
            st = neighbor_stats(A, R, L, S, T.size)
            cache[a] = (_smooth(st.psiR[by_rank], window), _smooth(st.psiL[by_rank], window))
        psiR, psiL = cache[a]
        if _passes_mdi(x, psiR, psiL, a, b, delta):
            return (a, b)
    return None
