"""Graph Laplacians, the Fiedler pair and spectral seriation.

Small problems (``n <= DENSE_LIMIT``) use LAPACK's symmetric solver on the
three lowest eigenpairs.  Larger ones run Lanczos restricted to the
orthogonal complement of the constant vector, which is the known kernel of
every Laplacian, with full reorthogonalisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .graphon import Graphon, SampledGraph, model_matrix
from .order import Ordering, ordering_from_values

__all__ = [
    "LaplacianMatrix",
    "SpectralResult",
    "DisconnectedGraphError",
    "SolverError",
    "laplacian",
    "fiedler_pair",
    "spectral_seriation",
    "tie_classes",
    "discretized_graphon_laplacian",
    "operator_norm_diff",
    "dump_matrix",
]

DENSE_LIMIT = 2048
DEFAULT_TOL = 1e-8
DEGENERATE_GAP = 1e-10
# Fiedler entries closer than this (relative to max |phi|) are treated as ties
TIE_TOL = 1e-10


class DisconnectedGraphError(ValueError):
    """The zero eigenvalue is not simple."""


class SolverError(RuntimeError):
    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class LaplacianMatrix:
    """``L = D - W`` for a symmetric nonnegative ``W``, optionally divided by ``n``.

    ``kernel`` keeps ``W`` itself (diagonal included) when the matrix came
    from a model matrix; :func:`operator_norm_diff` needs it.
    """

    entries: np.ndarray = field(repr=False)
    scale: float = 1.0
    kernel: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def norm_bound(self) -> float:
        """Gershgorin bound on the spectral norm."""
        return float(2.0 * np.abs(np.diag(self.entries)).max()) if self.n else 0.0


@dataclass(frozen=True, eq=False)
class SpectralResult:
    eigenvalues: np.ndarray
    fiedler: np.ndarray = field(repr=False)
    gap2: float
    gap3: float
    solver_tolerance: float
    residual: float
    method: str
    degenerate: bool = False

    @property
    def fiedler_value(self) -> float:
        return float(self.eigenvalues[1])


def laplacian(matrix, scale: float = 1.0, keep_kernel: bool = False) -> LaplacianMatrix:
    """``diag(row sums) - W``, multiplied by ``scale``."""
    W = np.asarray(matrix, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("Laplacian input must be a square matrix")
    if not np.array_equal(W, W.T):
        raise ValueError("Laplacian input must be symmetric")
    if np.any(W < 0):
        raise ValueError("Laplacian input must be nonnegative")
    L = -W.copy()
    # the diagonal of W cancels in D - W
    np.fill_diagonal(L, 0.0)
    np.fill_diagonal(L, -L.sum(axis=1))
    if scale != 1.0:
        L *= scale
    return LaplacianMatrix(L, scale, W if keep_kernel else None)


def _orient(phi: np.ndarray) -> np.ndarray:
    idx = np.arange(1, phi.size + 1, dtype=float)
    s = float(idx @ phi)
    if abs(s) <= 1e-12 * phi.size:
        nz = np.flatnonzero(np.abs(phi) > 1e-12)
        s = -phi[nz[0]] if nz.size else 0.0
    return -phi if s < 0 else phi


def _dense_lowest(L: np.ndarray, k: int):
    vals, vecs = sla.eigh(L, subset_by_index=[0, k - 1], driver="evr")
    return vals, vecs


def _lanczos_complement(L: np.ndarray, k: int, tol: float, scale: float,
                        max_iter: int, seed: int = 0):
    """Lowest ``k`` eigenpairs of ``L`` on ``{x : sum(x) = 0}``."""
    n = L.shape[0]
    m_max = min(max_iter, n - 1)
    rng = np.random.Generator(np.random.Philox(key=seed))
    Q = np.zeros((m_max + 1, n))
    alpha = np.zeros(m_max)
    beta = np.zeros(m_max)
    q = rng.standard_normal(n)
    q -= q.mean()
    q /= np.linalg.norm(q)
    Q[0] = q
    theta = s = None
    for j in range(m_max):
        w = L @ Q[j]
        w -= w.mean()
        alpha[j] = Q[j] @ w
        w -= alpha[j] * Q[j]
        if j > 0:
            w -= beta[j - 1] * Q[j - 1]
        for _ in range(2):
            w -= Q[: j + 1].T @ (Q[: j + 1] @ w)
            w -= w.mean()
        beta[j] = np.linalg.norm(w)
        m = j + 1
        if m >= k and (m % 10 == 0 or m == m_max or beta[j] <= tol * scale):
            theta, s = sla.eigh_tridiagonal(alpha[:m], beta[: m - 1])
            res = np.abs(beta[j] * s[-1, :k])
            if np.all(res <= tol * scale) or beta[j] <= tol * scale:
                return theta[:k], Q[:m].T @ s[:, :k], m
        if beta[j] <= tol * scale:
            break
        Q[j + 1] = w / beta[j]
    if m_max >= n - 1 and theta is not None:
        # Krylov space exhausted the complement; Ritz pairs are exact
        return theta[:k], Q[:m_max].T @ s[:, :k], m_max
    raise SolverError("Lanczos did not converge", m_max)


def fiedler_pair(L: LaplacianMatrix, tolerance: float = DEFAULT_TOL,
                 method: str = "auto", max_iter: int = 1000) -> SpectralResult:
    """Second-smallest eigenpair of a Laplacian.

    The vector is unit norm, orthogonal to constants and oriented so that
    ``sum_i i * phi_i >= 0``.  Raises :class:`DisconnectedGraphError` when
    ``lambda_2 - lambda_1`` falls below ``tolerance`` times the norm scale.
    """
    A = L.entries
    n = L.n
    if n < 2:
        raise ValueError("need at least two vertices for a Fiedler pair")
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "lanczos"
    scale = max(1.0, L.norm_bound())
    k = min(3, n)
    if method == "dense":
        vals, vecs = _dense_lowest(A, k)
        lam1 = float(vals[0])
        vals_c, vecs_c = vals[1:], vecs[:, 1:]
    elif method == "lanczos":
        kc = min(2, n - 1)
        vals_c, vecs_c, _ = _lanczos_complement(A, kc, tolerance, scale, max_iter)
        lam1 = 0.0
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")
    lam2 = float(vals_c[0])
    gap2 = lam2 - lam1
    if gap2 < tolerance * scale:
        raise DisconnectedGraphError(
            f"graph is disconnected: lambda_2 - lambda_1 = {gap2:.3e} below tolerance")
    phi = vecs_c[:, 0].copy()
    phi -= phi.mean()
    phi /= np.linalg.norm(phi)
    phi = _orient(phi)
    lam3 = float(vals_c[1]) if len(vals_c) > 1 else np.inf
    gap3 = lam3 - lam2
    residual = float(np.linalg.norm(A @ phi - lam2 * phi))
    eig = np.array([lam1, lam2, lam3][:k])
    return SpectralResult(eig, phi, gap2, gap3, tolerance, residual, method,
                          degenerate=bool(gap3 < DEGENERATE_GAP * scale))


def spectral_seriation(g, tolerance: float = DEFAULT_TOL, vertices=None,
                       method: str = "auto") -> Ordering:
    """Order vertices by their Fiedler-vector entries.

    ``g`` is a :class:`SampledGraph` or a dense adjacency matrix; in the
    latter case ``vertices`` names the rows (default ``1..n``).
    """
    if isinstance(g, SampledGraph):
        A = g.adjacency()
        if vertices is not None:
            raise ValueError("vertices is only meaningful for a raw adjacency matrix")
        vertices = np.arange(1, g.n + 1)
    else:
        A = np.asarray(g)
        if vertices is None:
            vertices = np.arange(1, A.shape[0] + 1)
    vertices = np.asarray(vertices, dtype=np.int64)
    if vertices.size == 1:
        return Ordering(vertices, np.array([1]))
    res = fiedler_pair(laplacian(A.astype(float)), tolerance, method=method)
    return ordering_from_values(vertices, tie_classes(res.fiedler))


def tie_classes(values: np.ndarray, rel: float = TIE_TOL) -> np.ndarray:
    """Replace each value by the index of its run of near-equal neighbours.

    Vertices with identical neighbourhoods get Fiedler entries that differ
    only by rounding; grouping them lets the ascending-id tie-break apply.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return v.astype(np.int64)
    eps = rel * max(float(np.abs(v).max()), np.finfo(float).tiny)
    idx = np.argsort(v, kind="stable")
    jumps = np.diff(v[idx]) > eps
    cls = np.empty(v.size, dtype=np.int64)
    cls[idx] = np.concatenate(([0], np.cumsum(jumps)))
    return cls


def discretized_graphon_laplacian(graphon: Graphon, resolution: int) -> LaplacianMatrix:
    """Noise-free Laplacian of the model matrix, divided by the resolution.

    Acting on step functions over ``resolution`` equal cells, this is
    exactly the Laplacian operator of the step graphon ``w_n``.
    """
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    P = model_matrix(graphon, resolution)
    return laplacian(P, scale=1.0 / resolution, keep_kernel=True)


def _operator(W: np.ndarray) -> np.ndarray:
    n = W.shape[0]
    L = -W / n
    np.fill_diagonal(L, np.diag(L) + W.sum(axis=1) / n)
    return L


def operator_norm_diff(L1: LaplacianMatrix, L2: LaplacianMatrix) -> float:
    """``||L_{n1} - L_{n2}||`` as operators on ``L^2[0, 1]``.

    ``L1``'s kernel is replicated blockwise to ``L2``'s resolution; both
    operators then act on the same step-function space, where the operator
    norm is the matrix spectral norm.
    """
    if L1.kernel is None or L2.kernel is None:
        raise ValueError("operator_norm_diff needs Laplacians built from a kernel")
    n1, n2 = L1.n, L2.n
    if n2 % n1:
        raise ValueError(f"resolution {n2} is not a multiple of {n1}")
    r = n2 // n1
    W1 = np.kron(L1.kernel, np.ones((r, r))) if r > 1 else L1.kernel
    D = _operator(W1) - _operator(L2.kernel)
    if not np.any(D):
        return 0.0
    # symmetric, so the spectral norm is the largest |eigenvalue|
    return float(np.abs(sla.eigvalsh(D)).max())


def dump_matrix(L: LaplacianMatrix, path) -> None:
    """Row-major, space-separated plain-text dump for external cross-checks."""
    np.savetxt(Path(path), L.entries, fmt="%.17g", delimiter=" ")
