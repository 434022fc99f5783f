"""Grid checks of the regularity conditions seriation guarantees rest on.

Every check works on a finite grid, so a pass certifies the condition
only up to grid resolution.  Failed flags carry the grid points that
witness the failure.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla

from .graphon import (
    Graphon,
    degree_function,
    grid_points,
    model_matrix,
    psi_functions,
    sample_graph,
)
from .postproc import SplitConfig
from .seeding import derive_seed
from .spectral import (
    DisconnectedGraphError,
    discretized_graphon_laplacian,
    fiedler_pair,
    laplacian,
    operator_norm_diff,
)

__all__ = [
    "AssumptionReport",
    "check_assumptions",
    "ConvergenceStudy",
    "laplacian_convergence_study",
    "ConsistencyStudy",
    "fiedler_consistency_study",
    "loglog_slope",
]

ROBINSON_GRID = 150
LIPSCHITZ_GROWTH = 1.1
DERIV_TOL = 1e-8
DERIV_FRACTION = 0.99
MDI_MARGIN = 1e-12
GAP_MARGIN = 1e-9


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.asarray(ys, dtype=float))
    X = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return float(coef[0])


@dataclass
class AssumptionReport:
    graphon: str
    alpha: float
    beta: float
    resolution: int
    # Lipschitz continuity
    lipschitz_estimate: float
    lipschitz_coarse: float
    lipschitz_ok: bool
    lipschitz_witness: tuple | None
    # Robinsonian (diagonally increasing)
    robinsonian_ok: bool
    robinsonian_worst: tuple | None
    # nonvanishing partial derivative
    derivative_fraction: float
    derivative_nonzero_ok: bool
    derivative_witness: list = field(default_factory=list)
    # isolated critical points of the degree function
    degree_critical_points: int = 0
    degree_ok: bool = True
    degree_witness: list = field(default_factory=list)
    # Fiedler value against the essential spectrum
    fiedler_value: float = float("nan")
    min_degree: float = float("nan")
    gap_ok: bool = True
    # mean distance and distinguishability inequalities
    mdi_ok: bool = True
    mdi_margin_right: float = float("nan")
    mdi_margin_left: float = float("nan")
    mdi_witness: list = field(default_factory=list)
    distinguishability_d1: float = float("nan")
    distinguishability_ok: bool = True
    distinguishability_witness: tuple | None = None
    # discretized Fiedler vector
    fiedler_monotone_ok: bool = True
    fiedler_min_slope: float = float("nan")
    fiedler_monotone_witness: tuple | None = None
    fiedler_gap: float = float("nan")

    FLAGS = ("lipschitz_ok", "robinsonian_ok", "derivative_nonzero_ok", "degree_ok",
             "gap_ok", "mdi_ok", "distinguishability_ok", "fiedler_monotone_ok")

    @property
    def passed(self) -> bool:
        return all(getattr(self, f) for f in self.FLAGS)

    def failures(self) -> list[str]:
        return [f[:-3] for f in self.FLAGS if not getattr(self, f)]

    def as_row(self) -> dict:
        row = {}
        for k, v in asdict(self).items():
            if isinstance(v, (list, tuple)):
                v = ";".join(_fmt(x) for x in _flatten(v)) if v else ""
            elif v is None:
                v = ""
            row[k] = v
        return row

    def to_text(self) -> str:
        """Flat ``key = value`` block, one field per line."""
        lines = []
        for k, v in self.as_row().items():
            lines.append(f"{k} = {_fmt(v)}")
        lines.append(f"passed = {self.passed}")
        return "\n".join(lines) + "\n"


def _flatten(v):
    for x in v:
        if isinstance(x, (list, tuple)):
            yield "(" + " ".join(_fmt(y) for y in x) + ")"
        else:
            yield x


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _lipschitz(graphon: Graphon, n: int):
    P = model_matrix(graphon, n)
    d = np.abs(np.diff(P, axis=0)) * n
    i, j = np.unravel_index(int(np.argmax(d)), d.shape)
    return float(d[i, j]), ((i + 1) / n, (i + 2) / n, (j + 1) / n)


def _robinsonian(graphon: Graphon, resolution: int):
    """Worst violation of ``w(x,y) <= min(w(x,z), w(z,y))`` for ``y < z < x``."""
    # pairwise monotonicity of rows at full resolution
    P = model_matrix(graphon, resolution)
    lower = np.tril(P)
    # along each row, entries left of the diagonal must not decrease toward it
    steps = np.diff(lower, axis=1)
    mask = np.tril(np.ones_like(steps, dtype=bool), -1)
    bad = np.where(mask, -steps, -np.inf)
    worst_pair = float(bad.max()) if bad.size else -np.inf
    # exhaustive triples on a coarse grid
    m = min(ROBINSON_GRID, resolution)
    x = np.linspace(0.0, 1.0, m)
    M = np.broadcast_to(graphon.kernel(x[:, None], x[None, :]), (m, m))
    worst, where = -np.inf, None
    for j in range(m):
        for i in range(j + 2, m):
            z = np.arange(j + 1, i)
            v = M[i, j] - np.minimum(M[i, z], M[z, j])
            k = int(np.argmax(v))
            if v[k] > worst:
                worst, where = float(v[k]), (x[i], x[j], x[z[k]], float(v[k]))
    if worst_pair > worst and worst_pair > 0:
        i, c = np.unravel_index(int(np.argmax(bad)), bad.shape)
        where = ((i + 1) / resolution, (c + 1) / resolution, (c + 2) / resolution, worst_pair)
        worst = worst_pair
    ok = worst <= 1e-12
    return ok, (None if ok else where)


def _derivative(graphon: Graphon, n: int):
    h = 1.0 / n
    x = grid_points(n)
    X, Y = np.meshgrid(x[1:-1], x, indexing="ij")
    D = (graphon.kernel(X + h, Y) - graphon.kernel(X - h, Y)) / (2 * h)
    # skip points whose stencil straddles the diagonal
    off = np.abs(X - Y) > 1.5 * h
    nonzero = (np.abs(D) > DERIV_TOL) & off
    frac = float(nonzero.sum() / off.sum())
    zi, zj = np.nonzero(off & ~nonzero)
    witness = [(float(X[a, b]), float(Y[a, b])) for a, b in zip(zi[:5], zj[:5])]
    return frac, witness


def _degree_critical(graphon: Graphon, n: int):
    x = np.linspace(0.0, 1.0, n + 1)
    d = degree_function(graphon, x, quad_points=max(4000, 8 * n))
    dp = np.gradient(d, x)
    tol = 1e-6 * max(1.0, float(np.abs(d).max()))
    flat = np.abs(dp) <= tol
    runs, start = [], None
    for k, f in enumerate(np.append(flat, False)):
        if f and start is None:
            start = k
        elif not f and start is not None:
            runs.append((start, k))
            start = None
    # each flat run is one critical point, and so is each sign change
    # between adjacent non-flat points
    sign = np.sign(np.where(flat, 0.0, dp))
    count = len(runs) + int(np.sum(sign[:-1] * sign[1:] < 0))
    long_runs = [(float(x[a]), float(x[b - 1])) for a, b in runs if b - a > 2]
    return count, not long_runs, long_runs[:5]


def _mean_zero_lowest(L: np.ndarray) -> float:
    n = L.shape[0]
    Q = sla.null_space(np.ones((1, n)))
    H = Q.T @ L @ Q
    return float(sla.eigh(H, subset_by_index=[0, 0], eigvals_only=True)[0])


def _mdi(graphon: Graphon, alpha: float, beta: float, n: int):
    x = grid_points(n)
    right = np.union1d(x[x >= 1 - alpha], [1 - alpha, 1.0])
    left = np.union1d(x[x <= alpha], [0.0, alpha])
    pr_r, _ = psi_functions(graphon, alpha, right)
    _, pl_l = psi_functions(graphon, alpha, left)
    ref_r, ref_l = psi_functions(graphon, alpha, np.array([1 - beta, beta]))
    mr = float(pr_r.min() - ref_r[0])
    ml = float(pl_l.min() - ref_l[1])
    witness = []
    if mr <= MDI_MARGIN:
        witness.append(("right", float(right[int(np.argmin(pr_r))]), 1 - beta))
    if ml <= MDI_MARGIN:
        witness.append(("left", float(left[int(np.argmin(pl_l))]), beta))
    return mr, ml, not witness, witness


def _distinguishability(graphon: Graphon, alpha: float, beta: float, n: int):
    """Smallest ``|w(y,z) - w(x,z)| / |x - y|`` over admissible grid triples.

    Only triples with ``x`` and ``y`` on the same side of ``z`` are
    examined; mirror pairs around ``z`` give equal values of any
    ``R(|x - y|)`` kernel and would make the minimum zero.
    """
    m = min(ROBINSON_GRID, n)
    g = np.linspace(0.0, 1.0, m)
    c = (beta - alpha) / 2
    best, where = np.inf, None
    for z in g:
        for side in (g[g >= z + c - 1e-12], g[g <= z - c + 1e-12]):
            if side.size < 2:
                continue
            f = graphon.kernel(side, np.full(side.size, z))
            df = np.abs(f[:, None] - f[None, :])
            dx = np.abs(side[:, None] - side[None, :])
            iu = np.triu_indices(side.size, 1)
            r = df[iu] / dx[iu]
            k = int(np.argmin(r))
            if r[k] < best:
                best = float(r[k])
                where = (float(side[iu[0][k]]), float(side[iu[1][k]]), float(z))
    if where is None:
        return float("inf"), True, None
    ok = best > 1e-9
    return best, ok, (None if ok else where)


def check_assumptions(graphon: Graphon, cfg: SplitConfig = SplitConfig(),
                      resolution: int = 1000) -> AssumptionReport:
    """Evaluate every regularity condition on a ``resolution`` grid."""
    if resolution < 100:
        raise ValueError(f"resolution must be >= 100, got {resolution}")
    n = resolution
    K, wK = _lipschitz(graphon, n)
    K_half, _ = _lipschitz(graphon, n // 2)
    lip_ok = K <= LIPSCHITZ_GROWTH * K_half + 1e-12
    if graphon.lipschitz_K is not None:
        lip_ok = lip_ok and K <= graphon.lipschitz_K * (1 + 1e-6) + 1e-12
    rob_ok, rob_w = _robinsonian(graphon, n)
    frac, dwit = _derivative(graphon, n)
    crit, deg_ok, deg_w = _degree_critical(graphon, n)

    Lap = discretized_graphon_laplacian(graphon, n)
    lam2 = _mean_zero_lowest(Lap.entries)
    dmin = float(degree_function(graphon, grid_points(n), quad_points=max(4000, 8 * n)).min())

    mr, ml, mdi_ok, mdi_w = _mdi(graphon, cfg.alpha, cfg.beta, n)
    d1, dist_ok, dist_w = _distinguishability(graphon, cfg.alpha, cfg.beta, n)

    try:
        fp = fiedler_pair(Lap)
        phi = fp.fiedler
        diffs = np.diff(phi)
        k = int(np.argmin(diffs))
        mono_ok = bool(diffs[k] > 0)
        slope = float(diffs[k] * math.sqrt(n) * n)
        mono_w = None if mono_ok else ((k + 1) / n, (k + 2) / n)
        gap = float(fp.gap3)
    except DisconnectedGraphError:
        mono_ok, slope, mono_w, gap = False, float("nan"), None, 0.0

    return AssumptionReport(
        graphon=graphon.name, alpha=cfg.alpha, beta=cfg.beta, resolution=n,
        lipschitz_estimate=K, lipschitz_coarse=K_half, lipschitz_ok=bool(lip_ok),
        lipschitz_witness=None if lip_ok else wK,
        robinsonian_ok=rob_ok, robinsonian_worst=rob_w,
        derivative_fraction=frac, derivative_nonzero_ok=frac >= DERIV_FRACTION,
        derivative_witness=[] if frac >= DERIV_FRACTION else dwit,
        degree_critical_points=crit, degree_ok=deg_ok, degree_witness=deg_w,
        fiedler_value=lam2, min_degree=dmin, gap_ok=lam2 < dmin - GAP_MARGIN * max(1.0, dmin),
        mdi_ok=mdi_ok, mdi_margin_right=mr, mdi_margin_left=ml, mdi_witness=mdi_w,
        distinguishability_d1=d1, distinguishability_ok=dist_ok,
        distinguishability_witness=dist_w,
        fiedler_monotone_ok=mono_ok, fiedler_min_slope=slope,
        fiedler_monotone_witness=mono_w, fiedler_gap=gap,
    )


@dataclass
class ConvergenceStudy:
    """``rows[k] = (n_k, ||L_{n_k} - L_{n_{k+1}}||)``; ``bound`` is ``4K/n`` when K is known."""

    rows: list
    slope: float | None
    bound: list | None = None

    def within_bound(self) -> bool | None:
        if self.bound is None:
            return None
        return all(d <= b for (_, d), b in zip(self.rows, self.bound))


def laplacian_convergence_study(graphon: Graphon, resolutions) -> ConvergenceStudy:
    res = [int(r) for r in resolutions]
    if len(res) < 2:
        raise ValueError("need at least two resolutions")
    for a, b in zip(res, res[1:]):
        if b <= a or b % a:
            raise ValueError(f"resolutions must be nested: {b} is not a proper multiple of {a}")
    laps = [discretized_graphon_laplacian(graphon, r) for r in res]
    rows = [(a, operator_norm_diff(La, Lb)) for a, La, Lb in zip(res, laps, laps[1:])]
    diffs = [d for _, d in rows]
    slope = None
    if len(rows) >= 2 and all(d > 0 for d in diffs):
        slope = loglog_slope([n for n, _ in rows], diffs)
    bound = None
    if graphon.lipschitz_K is not None:
        bound = [4 * graphon.lipschitz_K / n for n, _ in rows]
    return ConvergenceStudy(rows, slope, bound)


@dataclass
class ConsistencyStudy:
    """``rows[k] = (n, median L2 distance, trials used, disconnected samples)``."""

    rows: list
    reference_resolution: int

    def decreasing(self) -> bool:
        d = [r[1] for r in self.rows]
        return all(b < a for a, b in zip(d, d[1:]))


def _step_on(vec: np.ndarray, m: int) -> np.ndarray:
    """Unit-L2 step function with cell values ``vec`` sampled on ``m`` cells."""
    n = vec.size
    return np.repeat(vec * math.sqrt(n), m // n)


def _l2_match(f: np.ndarray, ref: np.ndarray) -> float:
    cands = (f, -f, f[::-1], -f[::-1])
    return min(float(np.sqrt(np.mean((c - ref) ** 2))) for c in cands)


def fiedler_consistency_study(graphon: Graphon, n_list, rho_exponent: float = 0.0,
                              trials: int = 5, seed: int = 0,
                              reference_resolution: int | None = None,
                              noise_free: bool = False) -> ConsistencyStudy:
    """L2 distance between sampled and limiting Fiedler functions.

    The limit is approximated by the noise-free discretization at
    ``reference_resolution``, which must be a multiple of every ``n``
    (default: the least common multiple scaled up to at least twice the
    largest ``n``).  With ``noise_free`` the model matrix replaces the
    sampled graph, isolating discretization error.
    """
    ns = [int(n) for n in n_list]
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not (0.0 <= rho_exponent < 1.0):
        raise ValueError("rho_exponent must lie in [0, 1)")
    if not ns or min(ns) < 2:
        raise ValueError("n_list must hold integers >= 2")
    if reference_resolution is None:
        base = math.lcm(*ns)
        reference_resolution = base * max(1, math.ceil(2 * max(ns) / base))
    M = int(reference_resolution)
    for n in ns:
        if M % n:
            raise ValueError(f"reference resolution {M} is not a multiple of {n}")
    ref = _step_on(fiedler_pair(discretized_graphon_laplacian(graphon, M)).fiedler, M)
    rows = []
    for n in ns:
        rho = float(n) ** (-rho_exponent)
        dists, bad = [], 0
        for t in range(trials):
            if noise_free:
                W = rho * model_matrix(graphon, n)
            else:
                W = sample_graph(graphon, n, rho, derive_seed(seed, n, t)).adjacency()
            try:
                phi = fiedler_pair(laplacian(W.astype(float))).fiedler
            except DisconnectedGraphError:
                bad += 1
                continue
            dists.append(_l2_match(_step_on(phi, M), ref))
        med = float(np.median(dists)) if dists else float("nan")
        rows.append((n, med, len(dists), bad))
    return ConsistencyStudy(rows, M)
