"""Orderings of vertex sets and the error metrics used to score them.

An :class:`Ordering` is a bijection from a finite set of integer vertex
identifiers onto ranks ``1..|S|``.  Metrics return raw rank-unit counts;
any normalisation is the caller's business.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "Ordering",
    "Alignment",
    "ordering_from_values",
    "reverse",
    "l1_distance",
    "linf_distance",
    "kendall_tau",
    "merge_orderings",
    "check_aligned",
]

CLOSE_LO = 0.001
CLOSE_HI = 0.999


@dataclass(frozen=True, eq=False)
class Ordering:
    """``support`` is sorted ascending; ``ranks[k]`` is the rank of ``support[k]``."""

    support: np.ndarray
    ranks: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=np.int64)
        r = np.asarray(self.ranks, dtype=np.int64)
        if s.ndim != 1 or s.shape != r.shape:
            raise ValueError("support and ranks must be 1-d arrays of equal length")
        if s.size == 0:
            raise ValueError("an ordering needs a nonempty support")
        if np.any(np.diff(s) <= 0):
            raise ValueError("support must be strictly increasing")
        if not np.array_equal(np.sort(r), np.arange(1, s.size + 1)):
            raise ValueError("ranks must be a bijection onto 1..|S|")
        s.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "ranks", r)

    @classmethod
    def identity(cls, support) -> "Ordering":
        s = np.sort(np.asarray(support, dtype=np.int64))
        return cls(s, np.arange(1, s.size + 1))

    @classmethod
    def from_sequence(cls, vertices: Sequence[int]) -> "Ordering":
        """Ordering whose rank-``k`` vertex is ``vertices[k-1]``."""
        v = np.asarray(vertices, dtype=np.int64)
        return ordering_from_values(v, np.arange(1, v.size + 1))

    def __len__(self) -> int:
        return int(self.support.size)

    def __eq__(self, other):
        if not isinstance(other, Ordering):
            return NotImplemented
        return (np.array_equal(self.support, other.support)
                and np.array_equal(self.ranks, other.ranks))

    def __hash__(self):
        return hash((self.support.tobytes(), self.ranks.tobytes()))

    def __repr__(self):
        if len(self) <= 12:
            pairs = ", ".join(f"{s}:{r}" for s, r in zip(self.support, self.ranks))
            return f"Ordering({{{pairs}}})"
        return f"Ordering(|S|={len(self)})"

    def as_dict(self) -> dict[int, int]:
        return {int(s): int(r) for s, r in zip(self.support, self.ranks)}

    def rank_of(self, vertices) -> np.ndarray:
        """Ranks of the given vertices (must belong to the support)."""
        v = np.asarray(vertices, dtype=np.int64)
        idx = np.searchsorted(self.support, v)
        if np.any(idx >= self.support.size) or np.any(self.support[np.minimum(idx, self.support.size - 1)] != v):
            raise ValueError("vertex not in support")
        return self.ranks[idx]

    def sequence(self) -> np.ndarray:
        """Vertices listed by increasing rank (the inverse permutation)."""
        out = np.empty_like(self.support)
        out[self.ranks - 1] = self.support
        return out

    def restrict(self, subset) -> "Ordering":
        """The induced ordering on ``subset``, re-ranked to ``1..|subset|``."""
        sub = np.unique(np.asarray(subset, dtype=np.int64))
        return ordering_from_values(sub, self.rank_of(sub))

    def to_line(self) -> str:
        """Space-separated ranks listed in vertex (support) order."""
        return " ".join(str(int(r)) for r in self.ranks)

    @classmethod
    def from_line(cls, line: str, support=None) -> "Ordering":
        ranks = np.array([int(t) for t in line.split()], dtype=np.int64)
        if support is None:
            support = np.arange(1, ranks.size + 1)
        return cls(np.asarray(support, dtype=np.int64), ranks)


def ordering_from_values(vertices, values=None) -> Ordering:
    """Rank vertices by value, ``rank(i) = |{j : f(j) <= f(i)}|``.

    Accepts either a mapping ``vertex -> value`` or two parallel arrays.
    Ties are broken by ascending vertex identifier.
    """
    if values is None:
        if not isinstance(vertices, Mapping):
            raise TypeError("pass a mapping or (vertices, values)")
        items = list(vertices.items())
        if not items:
            raise ValueError("cannot order an empty set")
        v = np.array([k for k, _ in items], dtype=np.int64)
        f = np.array([x for _, x in items], dtype=float)
    else:
        v = np.asarray(vertices, dtype=np.int64)
        f = np.asarray(values, dtype=float)
        if v.shape != f.shape or v.ndim != 1:
            raise ValueError("vertices and values must be 1-d and of equal length")
        if v.size == 0:
            raise ValueError("cannot order an empty set")
    if np.any(np.isnan(f)):
        raise ValueError("values contain NaN")
    order = np.lexsort((v, f))
    ranks = np.empty(v.size, dtype=np.int64)
    ranks[order] = np.arange(1, v.size + 1)
    srt = np.argsort(v, kind="stable")
    if np.any(np.diff(v[srt]) == 0):
        raise ValueError("duplicate vertex identifiers")
    return Ordering(v[srt], ranks[srt])


def reverse(o: Ordering) -> Ordering:
    return Ordering(o.support, len(o) + 1 - o.ranks)


def _same_support(a: Ordering, b: Ordering) -> None:
    if not np.array_equal(a.support, b.support):
        raise ValueError("orderings have different supports")


def l1_distance(a: Ordering, b: Ordering, symmetrized: bool = True) -> int:
    """``sum_i |a(i) - b(i)|``; symmetrized takes the min over ``a`` and ``rev(a)``."""
    _same_support(a, b)
    d = int(np.abs(a.ranks - b.ranks).sum())
    if symmetrized:
        d = min(d, int(np.abs(len(a) + 1 - a.ranks - b.ranks).sum()))
    return d


def linf_distance(a: Ordering, b: Ordering, symmetrized: bool = True) -> int:
    _same_support(a, b)
    d = int(np.abs(a.ranks - b.ranks).max())
    if symmetrized:
        d = min(d, int(np.abs(len(a) + 1 - a.ranks - b.ranks).max()))
    return d


def kendall_tau(pi) -> int:
    """Number of discordant pairs ``|{i < j : pi(i) > pi(j)}|``.

    ``pi`` is an :class:`Ordering` (read in support order) or a rank
    sequence.  Counted with a Fenwick tree in ``O(N log N)``.
    """
    r = pi.ranks if isinstance(pi, Ordering) else np.asarray(pi, dtype=np.int64)
    n = int(r.size)
    # compress to 1..n so arbitrary distinct values also work
    ranks = np.empty(n, dtype=np.int64)
    ranks[np.argsort(r, kind="stable")] = np.arange(1, n + 1)
    tree = [0] * (n + 1)
    inversions = 0
    for seen, x in enumerate(ranks.tolist()):
        # count previously seen values <= x
        k, le = x, 0
        while k > 0:
            le += tree[k]
            k -= k & -k
        inversions += seen - le
        k = x
        while k <= n:
            tree[k] += 1
            k += k & -k
    return inversions


def merge_orderings(parts: Sequence[Ordering], n_total: int) -> Ordering:
    """Interleave three part-orderings of a good partition.

    The vertex of rank ``k + 1`` in part ``j`` (``j = 1, 2, 3``) receives
    overall rank ``3k + j``.  Vertex identifiers are used directly, so no
    rescaling from latent positions is involved.
    """
    if len(parts) != 3:
        raise ValueError("merge needs exactly three part orderings")
    sizes = [len(p) for p in parts]
    m = n_total // 3
    if not (m <= sizes[2] <= sizes[1] <= sizes[0] <= m + 1) or sum(sizes) != n_total:
        raise ValueError(f"part sizes {sizes} do not form a good partition of {n_total}")
    allv = np.concatenate([p.support for p in parts])
    if not np.array_equal(np.sort(allv), np.arange(1, n_total + 1)):
        raise ValueError("parts must partition 1..n_total")
    vertices, ranks = [], []
    for j, p in enumerate(parts, start=1):
        vertices.append(p.support)
        ranks.append(3 * (p.ranks - 1) + j)
    return ordering_from_values(np.concatenate(vertices), np.concatenate(ranks))


@dataclass(frozen=True)
class Alignment:
    aligned: bool
    closely_aligned: bool
    direct: float
    reversed: float
    overlap: int

    def __bool__(self) -> bool:
        return self.aligned


def check_aligned(a: Ordering, b: Ordering) -> Alignment:
    """Compare normalised ranks of ``a`` and ``b`` on their common support.

    ``direct`` is ``max |a(i)/|A| - b(i)/|B||`` and ``reversed`` the same
    with ``rev(a)``; the pair is aligned iff ``direct <= reversed``.
    Disjoint supports count as aligned.
    """
    common = np.intersect1d(a.support, b.support, assume_unique=True)
    if common.size == 0:
        return Alignment(True, False, 0.0, 0.0, 0)
    ra = a.rank_of(common).astype(float)
    rb = b.rank_of(common).astype(float) / len(b)
    direct = float(np.abs(ra / len(a) - rb).max())
    rev = float(np.abs((len(a) + 1 - ra) / len(a) - rb).max())
    closely = direct < CLOSE_LO and rev > CLOSE_HI
    closely_rev = rev < CLOSE_LO and direct > CLOSE_HI
    if not (closely or closely_rev):
        logger.warning("alignment not clean: direct=%.4f reversed=%.4f on %d common vertices",
                       direct, rev, common.size)
    return Alignment(direct <= rev, closely, direct, rev, int(common.size))
