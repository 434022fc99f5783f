"""Seeded Monte Carlo harness for seriation error rates.

Each ``(n, trial)`` pair gets its own graph seed, derived from the master
seed alone, so runs are reproducible and independent of scheduling or of
the order of ``n_list``.  Results go to three files:

``<output>``
    one :class:`TrialRecord` per row (schema version 1)
``<output stem>.summary.csv``
    per-``n`` medians and fitted log-log slopes, in long format
``<output>.timing.csv``
    wall-clock seconds per trial; kept apart so the main CSV is
    byte-identical between runs
"""

from __future__ import annotations

import csv
import logging
import math
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.sparse import csgraph

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .graphon import graphon_from_config, noiseless_graph, sample_graph
from .order import Ordering, kendall_tau, l1_distance, linf_distance
from .postproc import SplitConfig, full_postprocess, learn_alpha_beta
from .seeding import derive_seed
from .spectral import DEFAULT_TOL, fiedler_pair, laplacian, spectral_seriation
from .validate import loglog_slope

logger = logging.getLogger(__name__)

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "ExperimentConfig",
    "TrialRecord",
    "ExperimentResult",
    "fit_slope",
    "run_experiment",
    "read_trials",
    "summary_path",
    "timing_path",
]

SCHEMA_VERSION = 1
ALGORITHMS = ("spectral", "postprocessed")
MAX_RESAMPLES = 50


class ConfigError(ValueError):
    """Invalid experiment configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


def fit_slope(points, min_points: int = 3) -> float:
    """Least-squares slope of ``log value`` against ``log n``."""
    pts = [(float(n), float(v)) for n, v in points]
    if len(pts) < min_points:
        raise ValueError(f"need at least {min_points} points, got {len(pts)}")
    if any(n <= 0 or v <= 0 for n, v in pts):
        raise ValueError("log-log fit needs positive n and values")
    return loglog_slope([n for n, _ in pts], [v for _, v in pts])


@dataclass(frozen=True)
class ExperimentConfig:
    graphon: Mapping
    n_list: tuple
    trials: int = 20
    rho_exponent: float = 0.0
    algorithm: str = "spectral"
    alpha_beta: tuple | str = (0.05, 0.31)
    gamma: float = 1.1
    seed: int = 0
    output: Path = Path("results.csv")
    workers: int = 1
    noiseless: bool = False
    tolerance: float = DEFAULT_TOL
    base_dir: Path | None = None

    def __post_init__(self):
        ns = tuple(int(n) for n in self.n_list)
        object.__setattr__(self, "n_list", ns)
        object.__setattr__(self, "output", Path(self.output))
        if not ns:
            raise ConfigError("n_list must not be empty")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("n_list must be strictly increasing")
        if ns[0] < 2:
            raise ConfigError("every n must be >= 2")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not (0.0 <= self.rho_exponent < 1.0):
            raise ConfigError("rho_exponent must lie in [0, 1)")
        if self.gamma <= 1.0:
            raise ConfigError("gamma must be > 1")
        if self.algorithm not in ALGORITHMS + ("both",):
            raise ConfigError(f"algorithm must be spectral, postprocessed or both, got {self.algorithm!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.runs_postprocessed():
            if self.rho_exponent > 0:
                raise ConfigError("post-processing is only covered for dense graphs; "
                                  "set rho_exponent = 0")
            if self.alpha_beta != "learn":
                a, b = self.alpha_beta
                try:
                    SplitConfig(float(a), float(b))
                except ValueError as e:
                    raise ConfigError(str(e)) from None
                object.__setattr__(self, "alpha_beta", (float(a), float(b)))
        # building the graphon validates its table
        try:
            graphon_from_config(self.graphon, self.base_dir)
        except (ValueError, OSError) as e:
            raise ConfigError(f"graphon: {e}") from None

    def algorithms(self) -> tuple[str, ...]:
        return ALGORITHMS if self.algorithm == "both" else (self.algorithm,)

    def runs_postprocessed(self) -> bool:
        return "postprocessed" in self.algorithms()

    @classmethod
    def from_mapping(cls, data: Mapping, base_dir: Path | None = None,
                     text: str | None = None) -> "ExperimentConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown key {unknown[0]!r}", _find_line(text, unknown[0]))
        for key in ("graphon", "n_list"):
            if key not in data:
                raise ConfigError(f"missing required key {key!r}")
        ab = data.get("alpha_beta", (0.05, 0.31))
        if not (ab == "learn" or (isinstance(ab, (list, tuple)) and len(ab) == 2)):
            raise ConfigError("alpha_beta must be a pair or \"learn\"", _find_line(text, "alpha_beta"))
        data["alpha_beta"] = ab if ab == "learn" else tuple(ab)
        try:
            return cls(base_dir=base_dir, **data)
        except ConfigError as e:
            if e.line is None and text is not None:
                key = _key_in_message(str(e), known)
                if key:
                    raise ConfigError(str(e), _find_line(text, key)) from None
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        p = Path(path)
        text = p.read_text(encoding="utf-8")
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            m = re.search(r"line (\d+)", str(e))
            if m:
                line = int(m.group(1))
            else:
                # "at end of document": blame the last line
                line = max(1, len(text.splitlines()))
            raise ConfigError(f"malformed config: {e}", line) from None
        return cls.from_mapping(data, base_dir=p.parent, text=text)

    def replace(self, **changes) -> "ExperimentConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig(**d)


def _find_line(text: str | None, key: str) -> int | None:
    if text is None:
        return None
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for k, line in enumerate(text.splitlines(), start=1):
        if pat.match(line):
            return k
    return None


def _key_in_message(msg: str, keys) -> str | None:
    for key in sorted(keys, key=len, reverse=True):
        if key in msg:
            return key
    return None


@dataclass
class TrialRecord:
    """One algorithm run on one sampled graph.

    ``*_sym`` columns are minimised over reversal of the estimate;
    ``*_raw`` columns use the estimate as returned.  ``kendall_raw`` and
    ``l1_raw`` satisfy ``kendall <= l1 <= 2 kendall``.
    """

    schema_version: int
    n: int
    trial: int
    seed: int
    algorithm: str
    alpha: float
    beta: float
    rho: float
    l1_sym: float
    linf_sym: float
    l1_raw: float
    linf_raw: float
    kendall_raw: float
    l1_norm: float
    linf_norm: float
    linf_scaled: float
    resamples: int
    degenerate: int
    status: str
    message: str = ""

    def as_row(self) -> list[str]:
        return [_cell(getattr(self, f.name)) for f in fields(self)]

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_row(cls, row: Mapping[str, str]) -> "TrialRecord":
        kw = {}
        for f in fields(cls):
            raw = row[f.name]
            kind = f.type if isinstance(f.type, str) else f.type.__name__
            if kind == "int":
                kw[f.name] = int(raw)
            elif kind == "float":
                kw[f.name] = float(raw)
            else:
                kw[f.name] = raw
        return cls(**kw)


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ExperimentResult:
    records: list
    summary: list
    output: Path
    summary_output: Path
    timing_output: Path
    timings: list = field(default_factory=list)

    def slope(self, algorithm: str, metric: str = "l1_sym") -> float | None:
        for alg, n, q, v in self.summary:
            if alg == algorithm and q == f"slope_{metric}":
                return v
        return None


def summary_path(output: Path) -> Path:
    output = Path(output)
    return output.with_name(output.stem + ".summary.csv")


def timing_path(output: Path) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".timing.csv")


def _connected(A: np.ndarray) -> bool:
    k, _ = csgraph.connected_components(A, directed=False)
    return k == 1


def _metrics(o: Ordering, n: int, gamma: float) -> dict:
    idn = Ordering.identity(np.arange(1, n + 1))
    l1s, lis = l1_distance(o, idn), linf_distance(o, idn)
    return dict(
        l1_sym=float(l1s), linf_sym=float(lis),
        l1_raw=float(l1_distance(o, idn, symmetrized=False)),
        linf_raw=float(linf_distance(o, idn, symmetrized=False)),
        kendall_raw=float(kendall_tau(o)),
        l1_norm=l1s / n**2, linf_norm=lis / n,
        linf_scaled=lis / math.sqrt(n * math.log(n) ** gamma),
    )


_NAN_METRICS = dict.fromkeys(
    ("l1_sym", "linf_sym", "l1_raw", "linf_raw", "kendall_raw",
     "l1_norm", "linf_norm", "linf_scaled"), float("nan"))


def _run_trial(cfg: ExperimentConfig, n: int, trial: int):
    """Sample one graph and run every configured algorithm on it."""
    graphon = graphon_from_config(cfg.graphon, cfg.base_dir)
    rho = float(n) ** (-cfg.rho_exponent)
    seed = derive_seed(cfg.seed, n, trial)
    resamples = 0
    if cfg.noiseless:
        g = noiseless_graph(graphon, n)
    else:
        g = sample_graph(graphon, n, rho, seed)
        while not _connected(g.adjacency()) and resamples < MAX_RESAMPLES:
            resamples += 1
            seed = derive_seed(cfg.seed, n, trial, "resample", resamples)
            g = sample_graph(graphon, n, rho, seed)
    A = g.adjacency()
    out = []
    degenerate = 0
    if _connected(A):
        try:
            degenerate = int(fiedler_pair(laplacian(A.astype(float)), cfg.tolerance).degenerate)
        except Exception:  # reported per algorithm below
            pass
    for alg in cfg.algorithms():
        t0 = time.perf_counter()
        alpha = beta = float("nan")
        status, message, metrics = "ok", "", None
        try:
            if not _connected(A):
                raise RuntimeError(f"graph disconnected after {resamples} resamples")
            if alg == "spectral":
                o = spectral_seriation(A, cfg.tolerance)
            else:
                alg_seed = derive_seed(cfg.seed, n, trial, alg)
                if cfg.alpha_beta == "learn":
                    ab = learn_alpha_beta(A, seed=alg_seed, tolerance=cfg.tolerance)
                    if ab is None:
                        raise RuntimeError("no (alpha, beta) pair passed the test")
                else:
                    ab = cfg.alpha_beta
                alpha, beta = ab
                o = full_postprocess(A, SplitConfig(alpha, beta), alg_seed, cfg.tolerance)
            metrics = _metrics(o, n, cfg.gamma)
        except Exception as e:  # per-trial failures are recorded, not fatal
            status, message = f"error:{type(e).__name__}", str(e).replace("\n", " ")
        rec = TrialRecord(
            schema_version=SCHEMA_VERSION, n=n, trial=trial, seed=seed, algorithm=alg,
            alpha=alpha, beta=beta, rho=rho, resamples=resamples, degenerate=degenerate,
            status=status, message=message, **(metrics or _NAN_METRICS))
        out.append((rec, time.perf_counter() - t0))
    return out


def _run_trial_packed(args):
    return _run_trial(*args)


def _summarise(records: list[TrialRecord], algorithms) -> list[tuple]:
    rows = []
    metrics = ("l1_sym", "linf_sym", "l1_norm", "linf_norm", "linf_scaled")
    for alg in algorithms:
        med = {m: [] for m in ("l1_sym", "linf_sym")}
        for n in sorted({r.n for r in records}):
            ok = [r for r in records if r.algorithm == alg and r.n == n and r.status == "ok"]
            rows.append((alg, n, "trials_ok", float(len(ok))))
            for m in metrics:
                v = float(np.median([getattr(r, m) for r in ok])) if ok else float("nan")
                rows.append((alg, n, f"median_{m}", v))
                if m in med and ok:
                    med[m].append((n, v))
        for m, pts in med.items():
            try:
                s = fit_slope(pts, min_points=2)
            except ValueError:
                s = float("nan")
            rows.append((alg, "", f"slope_{m}", s))
    return rows


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    out = cfg.output
    paths = (out, summary_path(out), timing_path(out))
    # fail on an unwritable destination before any sampling
    for p in paths:
        with open(p, "a", encoding="utf-8"):
            pass
    jobs = [(cfg, n, t) for n in cfg.n_list for t in range(cfg.trials)]
    if cfg.workers == 1:
        results = [_run_trial_packed(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            # map yields in submission order, whatever the completion order
            results = list(ex.map(_run_trial_packed, jobs))
    records, timings = [], []
    for res in results:
        for rec, secs in res:
            records.append(rec)
            timings.append((rec.n, rec.trial, rec.algorithm, secs))
    summary = _summarise(records, cfg.algorithms())
    _write_csv(out, TrialRecord.header(), [r.as_row() for r in records])
    _write_csv(paths[1], ["schema_version", "algorithm", "n", "quantity", "value"],
               [[SCHEMA_VERSION, a, n, q, _cell(v)] for a, n, q, v in summary])
    _write_csv(paths[2], ["n", "trial", "algorithm", "seconds"],
               [[n, t, a, f"{s:.6f}"] for n, t, a, s in timings])
    return ExperimentResult(records, summary, out, paths[1], paths[2], timings)


def read_trials(path) -> list[TrialRecord]:
    """Parse a trial CSV written by :func:`run_experiment`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TrialRecord.header():
            raise ValueError("CSV header does not match trial schema version "
                             f"{SCHEMA_VERSION}")
        return [TrialRecord.from_row(r) for r in reader]
