"""Command-line entry point.

Failures print one line to stderr of the form::

    seriation: error: <kind>: <message>

where ``kind`` is one of ``usage``, ``parse``, ``io``, ``assumption``,
``disconnected`` or ``runtime``, and the process exits with the matching
code from :data:`EXIT_CODES`.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiment import ConfigError, ExperimentConfig, run_experiment
from .graphon import (
    EdgeListError,
    Family,
    SampledGraph,
    graphon_from_config,
    noiseless_graph,
    sample_graph,
)
from .postproc import SplitConfig, default_grid, full_postprocess, learn_alpha_beta
from .spectral import DEFAULT_TOL, DisconnectedGraphError, spectral_seriation
from .validate import check_assumptions

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_CODES = {"runtime": 1, "usage": 2, "parse": 2, "io": 4, "assumption": 3, "disconnected": 5}


class CliError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def _param(text: str) -> tuple[str, float]:
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key.strip(), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value of {key!r} is not a number") from None


def _add_graphon_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("graphon")
    g.add_argument("--config", type=Path,
                   help="TOML file whose [graphon] table (or top level) defines the graphon")
    g.add_argument("--family", choices=[f.value for f in Family if f is not Family.CUSTOM],
                   help="built-in graphon family")
    g.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE",
                   help="family parameter, e.g. a=0.8 (repeatable)")


def _load_toml(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise CliError("io", f"{path}: {e.strerror or e}") from None
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise CliError("parse", f"{path}: {e}") from None


def _graphon(args):
    if args.config is not None and args.family is not None:
        raise CliError("usage", "give either --config or --family, not both")
    if args.config is not None:
        data = _load_toml(args.config)
        table = data.get("graphon", data)
        base = args.config.parent
    elif args.family is not None:
        table = {"family": args.family, **dict(args.param)}
        base = None
    else:
        raise CliError("usage", "a graphon is required (--config or --family)")
    try:
        return graphon_from_config(table, base)
    except (ValueError, OSError) as e:
        raise CliError("parse", f"graphon: {e}") from None


def _read_graph(path: str) -> SampledGraph:
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise CliError("io", f"{path}: {e.strerror or e}") from None
    try:
        return SampledGraph.parse_edgelist(text)
    except EdgeListError as e:
        raise CliError("parse", f"{path}: {e}") from None


def _write(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        out.write_text(text, encoding="utf-8")
    except OSError as e:
        raise CliError("io", f"{out}: {e.strerror or e}") from None


def _split_cfg(args) -> SplitConfig:
    try:
        return SplitConfig(args.alpha, args.beta)
    except ValueError as e:
        raise CliError("usage", str(e)) from None


def cmd_sample(args) -> int:
    graphon = _graphon(args)
    if args.noiseless:
        g = noiseless_graph(graphon, args.n)
    else:
        if not (0.0 < args.rho <= 1.0):
            raise CliError("usage", "--rho must lie in (0, 1]")
        g = sample_graph(graphon, args.n, args.rho, args.seed)
    _write(g.to_edgelist(), args.output)
    return 0


def cmd_seriate(args) -> int:
    g = _read_graph(args.input)
    if args.algorithm == "spectral":
        o = spectral_seriation(g, args.tolerance)
    else:
        o = full_postprocess(g, _split_cfg(args), args.seed, args.tolerance)
    _write(o.to_line() + "\n", args.output)
    return 0


def cmd_validate(args) -> int:
    graphon = _graphon(args)
    if args.resolution < 100:
        raise CliError("usage", "--resolution must be >= 100")
    report = check_assumptions(graphon, _split_cfg(args), args.resolution)
    _write(report.to_text(), args.output)
    if not report.passed:
        raise CliError("assumption", "assumption failure: " + ", ".join(report.failures()))
    return 0


def cmd_experiment(args) -> int:
    try:
        cfg = ExperimentConfig.from_toml(args.config)
    except OSError as e:
        raise CliError("io", f"{args.config}: {e.strerror or e}") from None
    except ConfigError as e:
        raise CliError("parse", f"{args.config}: {e}") from None
    ab = None
    if args.learn:
        ab = "learn"
    elif args.alpha is not None or args.beta is not None:
        cur = cfg.alpha_beta if cfg.alpha_beta != "learn" else (0.05, 0.31)
        ab = (args.alpha if args.alpha is not None else cur[0],
              args.beta if args.beta is not None else cur[1])
    try:
        cfg = cfg.replace(n_list=args.n_list, trials=args.trials, rho_exponent=args.rho_exponent,
                          algorithm=args.algorithm, alpha_beta=ab, gamma=args.gamma,
                          seed=args.seed, output=args.output, workers=args.workers)
    except ConfigError as e:
        raise CliError("usage", str(e)) from None
    try:
        res = run_experiment(cfg)
    except OSError as e:
        raise CliError("io", f"{e.filename or cfg.output}: {e.strerror or e}") from None
    for alg in cfg.algorithms():
        s = res.slope(alg)
        print(f"{alg}: slope of median l1_sym vs n = {s:.4f}")
    print(f"wrote {res.output}, {res.summary_output}, {res.timing_output}")
    return 0


def cmd_learn(args) -> int:
    g = _read_graph(args.input)
    ab = learn_alpha_beta(g, default_grid(), args.delta, args.seed, tolerance=args.tolerance)
    _write("none\n" if ab is None else f"{ab[0]!r} {ab[1]!r}\n", args.output)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="seriation", description="Spectral seriation of graphon samples.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress and warnings")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sample", help="sample a graph and print its edge list")
    _add_graphon_args(s)
    s.add_argument("-n", type=int, required=True, help="number of vertices")
    s.add_argument("--rho", type=float, default=1.0, help="sparsity multiplier (default 1)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noiseless", action="store_true",
                   help="connect i, j iff w(i/n, j/n) >= 1/2 instead of sampling")
    s.add_argument("-o", "--output", type=Path)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("seriate", help="order the vertices of an edge-list graph")
    s.add_argument("input", help="edge-list file, or - for stdin")
    s.add_argument("--algorithm", choices=["spectral", "postprocessed"], default="spectral")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--beta", type=float, default=0.31)
    s.add_argument("--seed", type=int, default=0, help="partition seed for post-processing")
    s.add_argument("--tolerance", type=float, default=DEFAULT_TOL)
    s.add_argument("-o", "--output", type=Path, help="file for the rank line (default stdout)")
    s.set_defaults(func=cmd_seriate)

    s = sub.add_parser("validate", help="check a graphon's regularity conditions")
    _add_graphon_args(s)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--beta", type=float, default=0.31)
    s.add_argument("--resolution", type=int, default=1000)
    s.add_argument("-o", "--output", type=Path)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("experiment", help="run a Monte Carlo experiment from a TOML config")
    s.add_argument("config", type=Path)
    s.add_argument("--n-list", type=int, nargs="+", help="override n_list")
    s.add_argument("--trials", type=int)
    s.add_argument("--rho-exponent", type=float)
    s.add_argument("--algorithm", choices=["spectral", "postprocessed", "both"])
    s.add_argument("--alpha", type=float)
    s.add_argument("--beta", type=float)
    s.add_argument("--learn", action="store_true", help="learn (alpha, beta) per trial")
    s.add_argument("--gamma", type=float)
    s.add_argument("--seed", type=int, help="master seed")
    s.add_argument("--output", type=Path)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("learn-params", help="search for a working (alpha, beta)")
    s.add_argument("input", help="edge-list file, or - for stdin")
    s.add_argument("--delta", type=float, default=0.01)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tolerance", type=float, default=DEFAULT_TOL)
    s.add_argument("-o", "--output", type=Path)
    s.set_defaults(func=cmd_learn)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except CliError as e:
        kind = e.kind
        msg = str(e)
    except DisconnectedGraphError as e:
        kind, msg = "disconnected", str(e)
    except (ValueError, RuntimeError) as e:
        kind, msg = "runtime", str(e)
    print(f"seriation: error: {kind}: {msg}", file=sys.stderr)
    return EXIT_CODES[kind]


if __name__ == "__main__":
    sys.exit(main())
