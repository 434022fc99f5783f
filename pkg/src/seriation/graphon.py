"""Graphon models, derived functionals and random-graph sampling.

Vertices are labelled ``1..n`` and vertex ``i`` sits at latent position
``i / n``.  Edge coins come from a Philox4x64 counter-based stream keyed by
the 64-bit seed, consumed in row-major order over the strict upper triangle,
so coin ``k`` is a pure function of ``(seed, k)`` on every platform.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
from scipy.interpolate import RegularGridInterpolator

__all__ = [
    "Family",
    "Graphon",
    "SampledGraph",
    "EdgeListError",
    "evaluate",
    "model_matrix",
    "sample_graph",
    "noiseless_graph",
    "banded_graph",
    "degree_function",
    "psi_functions",
    "graphon_from_config",
    "builtin_nice_graphons",
]

SEED_MASK = (1 << 64) - 1
Kernel = Callable[[np.ndarray, np.ndarray], np.ndarray]


class Family(str, enum.Enum):
    AFFINE = "affine-distance"
    RBF = "rbf"
    STEP = "step"
    CONSTANT = "constant"
    CUSTOM = "custom"


def _affine(x, y, a, b):
    return 1.0 - a * np.abs(x - y) ** b


def _rbf(x, y, s):
    d = x - y
    return np.exp(-(d * d) / (2.0 * s * s))


def _step(x, y, p, c):
    return np.where(np.abs(x - y) <= c, p, 0.0)


def _constant(x, y, c):
    return np.full(np.broadcast(x, y).shape, float(c))


def _tabulated(table: np.ndarray) -> Kernel:
    m = table.shape[0]
    grid = np.linspace(0.0, 1.0, m)
    interp = RegularGridInterpolator((grid, grid), table, method="linear")

    def kernel(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        pts = np.stack([x.ravel(), y.ravel()], axis=-1)
        return interp(pts).reshape(x.shape)

    return kernel


@dataclass(frozen=True)
class Graphon:
    """A symmetric kernel ``w: [0,1]^2 -> [0,1]`` plus descriptive metadata.

    ``kernel`` must accept broadcastable arrays.  Use the classmethod
    constructors rather than building one by hand; they validate parameters
    and fill in the Lipschitz constant where it is known in closed form.
    """

    kernel: Kernel = field(repr=False, compare=False)
    family: Family
    params: Mapping[str, float] = field(default_factory=dict)
    lipschitz_K: float | None = None
    # only the deterministic grid embedding v_i = i/n is implemented
    embedding: str = "grid"

    @classmethod
    def affine(cls, a: float, b: float = 1.0) -> "Graphon":
        """``w(x, y) = 1 - a |x - y|^b``."""
        if not 0.0 <= a <= 1.0:
            raise ValueError(f"affine-distance needs 0 <= a <= 1, got a={a}")
        if b <= 0.0:
            raise ValueError(f"affine-distance needs b > 0, got b={b}")
        # sup |d/dt a t^b| on [0, 1]; unbounded for b < 1
        K = a * b if b >= 1.0 else None
        return cls(partial(_affine, a=a, b=b), Family.AFFINE, {"a": a, "b": b}, K)

    @classmethod
    def rbf(cls, s: float) -> "Graphon":
        """``w(x, y) = exp(-(x - y)^2 / (2 s^2))``."""
        if s <= 0.0:
            raise ValueError(f"rbf needs s > 0, got s={s}")
        t = min(s, 1.0)
        K = t / (s * s) * math.exp(-t * t / (2.0 * s * s))
        return cls(partial(_rbf, s=s), Family.RBF, {"s": s}, K)

    @classmethod
    def step(cls, p: float, c: float = 0.5) -> "Graphon":
        """``w(x, y) = p * 1[|x - y| <= c]``; not Lipschitz for 0 < c < 1."""
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"step needs 0 <= p <= 1, got p={p}")
        if c < 0.0:
            raise ValueError(f"step needs c >= 0, got c={c}")
        K = 0.0 if (p == 0.0 or c >= 1.0) else None
        return cls(partial(_step, p=p, c=c), Family.STEP, {"p": p, "c": c}, K)

    @classmethod
    def constant(cls, c: float) -> "Graphon":
        if not 0.0 <= c <= 1.0:
            raise ValueError(f"constant graphon needs 0 <= c <= 1, got {c}")
        return cls(partial(_constant, c=c), Family.CONSTANT, {"c": c}, 0.0)

    @classmethod
    def from_table(cls, table, lipschitz_K: float | None = None) -> "Graphon":
        """Bilinear interpolation of a square table on ``linspace(0, 1, m)``.

        The table is symmetrised as ``(T + T.T) / 2`` at load.
        """
        table = np.asarray(table, dtype=float)
        if table.ndim != 2 or table.shape[0] != table.shape[1] or table.shape[0] < 2:
            raise ValueError(f"kernel table must be square with side >= 2, got {table.shape}")
        if np.any(table < 0.0) or np.any(table > 1.0):
            raise ValueError("kernel table entries must lie in [0, 1]")
        table = 0.5 * (table + table.T)
        return cls(_tabulated(table), Family.CUSTOM, {"m": table.shape[0]}, lipschitz_K)

    @classmethod
    def custom(cls, kernel: Kernel, lipschitz_K: float | None = None, **params) -> "Graphon":
        """Wrap an arbitrary vectorised kernel, symmetrised by averaging."""

        def sym(x, y):
            return 0.5 * (kernel(x, y) + kernel(y, x))

        return cls(sym, Family.CUSTOM, dict(params), lipschitz_K)

    def __call__(self, x, y):
        return self.kernel(x, y)

    @property
    def name(self) -> str:
        args = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.family.value}({args})"


def _check_unit(name: str, v: float) -> None:
    if not (0.0 <= v <= 1.0):
        raise ValueError(f"{name}={v} outside [0, 1]")


def evaluate(graphon: Graphon, x: float, y: float) -> float:
    _check_unit("x", x)
    _check_unit("y", y)
    # route through the array path so results match model_matrix bit for bit
    out = graphon.kernel(np.array([x], dtype=float), np.array([y], dtype=float))
    return float(np.asarray(out).ravel()[0])


def grid_points(n: int) -> np.ndarray:
    return np.arange(1, n + 1, dtype=float) / n


def model_matrix(graphon: Graphon, n: int) -> np.ndarray:
    """``P[i-1, j-1] = w(i/n, j/n)`` for ``i, j = 1..n``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    v = grid_points(n)
    P = np.asarray(graphon.kernel(v[:, None], v[None, :]), dtype=float)
    return np.broadcast_to(P, (n, n)).copy()


def triu_size(n: int) -> int:
    return n * (n - 1) // 2


def _coin_stream(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & SEED_MASK))


class EdgeListError(ValueError):
    """Malformed edge-list text; ``line`` is 1-based."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True, eq=False)
class SampledGraph:
    """Immutable simple undirected graph on vertices ``1..n``.

    The adjacency is stored as the bit-packed strict upper triangle in
    row-major order (the same order the sampling coins are drawn in).
    """

    n: int
    bits: bytes = field(repr=False)
    rho: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not (0.0 < self.rho <= 1.0):
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if len(self.bits) != (triu_size(self.n) + 7) // 8:
            raise ValueError("packed adjacency has the wrong length")

    @classmethod
    def from_upper(cls, n: int, upper: np.ndarray, rho: float = 1.0, seed: int = 0):
        upper = np.asarray(upper, dtype=bool)
        if upper.shape != (triu_size(n),):
            raise ValueError("upper-triangle vector has the wrong length")
        return cls(n, np.packbits(upper).tobytes(), rho, seed)

    @classmethod
    def from_adjacency(cls, adjacency, rho: float = 1.0, seed: int = 0):
        A = np.asarray(adjacency)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(A, A.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(A) != 0):
            raise ValueError("adjacency must have an empty diagonal")
        n = A.shape[0]
        return cls.from_upper(n, A[np.triu_indices(n, 1)] != 0, rho, seed)

    @classmethod
    def from_edges(cls, n: int, edges, rho: float = 1.0, seed: int = 0):
        """``edges`` holds 1-based ``(i, j)`` pairs."""
        A = np.zeros((n, n), dtype=bool)
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 1 or e.max() > n):
            raise ValueError("edge endpoint outside 1..n")
        if np.any(e[:, 0] == e[:, 1]):
            raise ValueError("self-loops are not allowed")
        A[e[:, 0] - 1, e[:, 1] - 1] = True
        A[e[:, 1] - 1, e[:, 0] - 1] = True
        return cls.from_adjacency(A, rho, seed)

    def upper(self) -> np.ndarray:
        raw = np.frombuffer(self.bits, dtype=np.uint8)
        return np.unpackbits(raw, count=triu_size(self.n)).astype(bool)

    def adjacency(self) -> np.ndarray:
        """Dense symmetric boolean adjacency matrix."""
        A = np.zeros((self.n, self.n), dtype=bool)
        A[np.triu_indices(self.n, 1)] = self.upper()
        return A | A.T

    def induced(self, vertices) -> np.ndarray:
        """Dense adjacency of the subgraph induced by 1-based ``vertices``."""
        idx = np.asarray(vertices, dtype=np.int64) - 1
        return self.adjacency()[np.ix_(idx, idx)]

    def edges(self) -> np.ndarray:
        iu, ju = np.triu_indices(self.n, 1)
        mask = self.upper()
        return np.stack([iu[mask] + 1, ju[mask] + 1], axis=1)

    @property
    def n_edges(self) -> int:
        return int(np.unpackbits(np.frombuffer(self.bits, dtype=np.uint8)).sum())

    @property
    def positions(self) -> np.ndarray:
        return grid_points(self.n)

    def __eq__(self, other):
        if not isinstance(other, SampledGraph):
            return NotImplemented
        return (self.n, self.bits, self.rho, self.seed) == (
            other.n, other.bits, other.rho, other.seed)

    def __hash__(self):
        return hash((self.n, self.bits, self.rho, self.seed))

    # -- edge-list text format: "n m rho seed" then m lines "i j" (1-based)

    def to_edgelist(self) -> str:
        e = self.edges()
        lines = [f"{self.n} {len(e)} {self.rho!r} {self.seed}"]
        lines.extend(f"{i} {j}" for i, j in e)
        return "\n".join(lines) + "\n"

    def write_edgelist(self, path) -> None:
        Path(path).write_text(self.to_edgelist(), encoding="utf-8")

    @classmethod
    def parse_edgelist(cls, text: str) -> "SampledGraph":
        lines = text.splitlines()
        if not lines:
            raise EdgeListError(1, "empty input, expected header 'n m rho seed'")
        head = lines[0].split()
        if len(head) != 4:
            raise EdgeListError(1, "header must be 'n m rho seed'")
        try:
            n, m, rho, seed = int(head[0]), int(head[1]), float(head[2]), int(head[3])
        except ValueError as exc:
            raise EdgeListError(1, f"bad header field ({exc})") from None
        if n < 1 or m < 0:
            raise EdgeListError(1, "n must be >= 1 and m >= 0")
        body = [(k + 2, ln) for k, ln in enumerate(lines[1:]) if ln.strip()]
        if len(body) != m:
            raise EdgeListError(len(lines) + 1, f"expected {m} edges, found {len(body)}")
        edges = np.empty((m, 2), dtype=np.int64)
        seen = set()
        for r, (lineno, ln) in enumerate(body):
            parts = ln.split()
            if len(parts) != 2:
                raise EdgeListError(lineno, "edge line must be 'i j'")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise EdgeListError(lineno, f"non-integer vertex in {ln.strip()!r}") from None
            if not (1 <= i <= n and 1 <= j <= n):
                raise EdgeListError(lineno, f"vertex outside 1..{n}")
            if i == j:
                raise EdgeListError(lineno, "self-loop")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise EdgeListError(lineno, f"duplicate edge {key}")
            seen.add(key)
            edges[r] = key
        try:
            return cls.from_edges(n, edges, rho, seed)
        except ValueError as exc:
            raise EdgeListError(1, str(exc)) from None

    @classmethod
    def read_edgelist(cls, path) -> "SampledGraph":
        return cls.parse_edgelist(Path(path).read_text(encoding="utf-8"))


def sample_graph(graphon: Graphon, n: int, rho: float = 1.0, seed: int = 0) -> SampledGraph:
    """Draw ``G ~ rho * w`` on the grid embedding.

    Pair ``(i, j)``, ``i < j``, is an edge iff its coin ``U < rho * P_ij``.
    Coins are generated row by row; the Philox stream is consumed
    sequentially, so coin ``k`` is the ``k``-th double of the stream.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not (0.0 < rho <= 1.0):
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    rng = _coin_stream(seed)
    v = grid_points(n)
    upper = np.empty(triu_size(n), dtype=bool)
    pos = 0
    for i in range(n - 1):
        cnt = n - 1 - i
        p = np.asarray(graphon.kernel(np.full(cnt, v[i]), v[i + 1:]), dtype=float)
        upper[pos:pos + cnt] = rng.random(cnt) < rho * p
        pos += cnt
    return SampledGraph.from_upper(n, upper, rho, int(seed) & SEED_MASK)


def banded_graph(n: int, bandwidth: int) -> SampledGraph:
    """Noiseless Robinsonian graph: ``i ~ j`` iff ``0 < |i - j| <= bandwidth``."""
    iu, ju = np.triu_indices(n, 1)
    return SampledGraph.from_upper(n, (ju - iu) <= bandwidth)


def _midpoints(lo: float, hi: float, panels: int) -> np.ndarray:
    return lo + (np.arange(panels) + 0.5) * (hi - lo) / panels


def degree_function(graphon: Graphon, x, quad_points: int = 2000):
    """``d(x) = int_0^1 w(x, y) dy`` by the composite midpoint rule."""
    if quad_points < 2:
        raise ValueError(f"quad_points must be >= 2, got {quad_points}")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any((xs < 0.0) | (xs > 1.0)):
        raise ValueError("x outside [0, 1]")
    y = _midpoints(0.0, 1.0, quad_points)
    d = np.asarray(graphon.kernel(xs[:, None], y[None, :])).mean(axis=1)
    return float(d[0]) if np.ndim(x) == 0 else d


def psi_functions(graphon: Graphon, alpha: float, x, quad_points: int = 400):
    """Expected neighbour mass in the right-most / left-most ``alpha`` strip.

    Returns ``(psi_R(x), psi_L(x))`` with
    ``psi_R(x) = int_{1-alpha}^1 w(x, y) dy`` and
    ``psi_L(x) = int_0^alpha w(x, y) dy``.
    """
    if not (0.0 < alpha < 0.5):
        raise ValueError(f"alpha must lie in (0, 0.5), got {alpha}")
    if quad_points < 2:
        raise ValueError(f"quad_points must be >= 2, got {quad_points}")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any((xs < 0.0) | (xs > 1.0)):
        raise ValueError("x outside [0, 1]")
    yr = _midpoints(1.0 - alpha, 1.0, quad_points)
    yl = _midpoints(0.0, alpha, quad_points)
    pr = alpha * np.asarray(graphon.kernel(xs[:, None], yr[None, :])).mean(axis=1)
    pl = alpha * np.asarray(graphon.kernel(xs[:, None], yl[None, :])).mean(axis=1)
    if np.ndim(x) == 0:
        return float(pr[0]), float(pl[0])
    return pr, pl


def builtin_nice_graphons() -> list[Graphon]:
    """The nice family exercised by the validation suite."""
    out = [Graphon.affine(a, b) for a in (0.5, 0.8, 1.0) for b in (1.0, 2.0)]
    out += [Graphon.rbf(s) for s in (0.3, 0.5)]
    return out


_PARAMS = {
    Family.AFFINE: ("a", "b"),
    Family.RBF: ("s",),
    Family.STEP: ("p", "c"),
    Family.CONSTANT: ("c",),
}


def graphon_from_config(cfg: Mapping, base_dir: Path | None = None) -> Graphon:
    """Build a graphon from a ``[graphon]`` config table.

    Keys: ``family`` (one of the :class:`Family` values), the family's
    parameters, optional ``lipschitz_K`` and ``embedding`` (only ``"grid"``).
    ``custom`` takes ``table``, a path to a whitespace-separated square matrix.
    """
    cfg = dict(cfg)
    try:
        family = Family(cfg.pop("family"))
    except KeyError:
        raise ValueError("graphon config needs a 'family' key") from None
    except ValueError:
        names = ", ".join(f.value for f in Family)
        raise ValueError(f"unknown graphon family; expected one of {names}") from None
    embedding = cfg.pop("embedding", "grid")
    if embedding != "grid":
        raise ValueError(f"embedding {embedding!r} not supported; only 'grid' is implemented")
    K = cfg.pop("lipschitz_K", None)
    if family is Family.CUSTOM:
        path = cfg.pop("table", None)
        if path is None:
            raise ValueError("custom graphon needs a 'table' path")
        p = Path(path)
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        g = Graphon.from_table(np.loadtxt(p, ndmin=2), lipschitz_K=K)
    else:
        names = _PARAMS[family]
        missing = [k for k in names if k not in cfg and not (family is Family.AFFINE and k == "b")
                   and not (family is Family.STEP and k == "c")]
        if missing:
            raise ValueError(f"{family.value} graphon missing parameter(s): {', '.join(missing)}")
        kwargs = {k: float(cfg.pop(k)) for k in names if k in cfg}
        ctor = {Family.AFFINE: Graphon.affine, Family.RBF: Graphon.rbf,
                Family.STEP: Graphon.step, Family.CONSTANT: Graphon.constant}[family]
        g = ctor(**kwargs)
        if K is not None:
            g = Graphon(g.kernel, g.family, g.params, float(K), g.embedding)
    if cfg:
        raise ValueError(f"unknown graphon key(s): {', '.join(sorted(cfg))}")
    return g


def noiseless_graph(graphon: Graphon, n: int, threshold: float = 0.5) -> SampledGraph:
    """Deterministic Robinsonian graph ``i ~ j`` iff ``w(i/n, j/n) >= threshold``."""
    if not (0.0 < threshold <= 1.0):
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    P = model_matrix(graphon, n)
    iu, ju = np.triu_indices(n, 1)
    return SampledGraph.from_upper(n, P[iu, ju] >= threshold)
