"""Command-line driver: corpus runs, single-CPT profiles, model dumps.

Data goes to the requested output files; progress and diagnostics go to
standard error.  Exit codes: 0 success (including an empty selection),
1 usage error, 2 parse/validation failure under --strict, 3 solver abort.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from .analysis import AnalysisConfig, squeeze_unit_parents
from .hugin import NetError, cpt_to_tensor, load_network
from .report import (
    emit_curve_csv,
    emit_profile_csv,
    emit_report,
    profile_single,
    run_corpus,
)
from .solvers import SolverConfig, SolverNumericalError, multi_start_decompose
from .tensors import model_to_json

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_SOLVER = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    env = os.environ.get("CPTRANK_SEED")
    return int(env) if env else 42


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=0.001, help="max-error threshold (default 0.001)")
    p.add_argument("--rmax", type=int, default=20, help="largest rank to try (default 20)")
    p.add_argument("--restarts", type=int, default=10, help="random starts per rank (default 10)")
    p.add_argument(
        "--nvec",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="include the SVD-based start (default on)",
    )
    p.add_argument(
        "--seed",
        type=int,
        default=None,
        help="base RNG seed (default: $CPTRANK_SEED or 42)",
    )


def _analysis_config(args) -> AnalysisConfig:
    seed = args.seed if args.seed is not None else _default_seed()
    solver = SolverConfig(
        n_random_starts=args.restarts,
        use_nvec_start=args.nvec,
        seed=seed,
    )
    return AnalysisConfig(epsilon=args.epsilon, r_max=args.rmax, solver=solver)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cptrank", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    corpus = sub.add_parser("corpus", help="analyze every eligible CPT across network files")
    corpus.add_argument("--net", action="extend", nargs="+", required=True, metavar="FILE", help="network file(s), .net or .json")
    corpus.add_argument("--min-parents", type=int, default=3, help="select CPTs with at least this many parents (default 3)")
    _add_solver_flags(corpus)
    corpus.add_argument("--controls", action="store_true", help="pair each CPT with a random control table")
    corpus.add_argument("--control-mode", choices=("normalized", "raw"), default="normalized")
    corpus.add_argument("--jobs", type=int, default=None, help="parallel workers (default: cpu count)")
    corpus.add_argument("--strict", action="store_true", help="abort on parse/validation errors")
    corpus.add_argument("--out", required=True, metavar="CSV", help="per-record CSV output")
    corpus.add_argument("--curve", required=True, metavar="CSV", help="percentage-vs-rank curve CSV output")
    corpus.add_argument("--json", metavar="JSON", help="full report JSON output")

    profile = sub.add_parser("profile", help="error-vs-rank profile for one CPT")
    profile.add_argument("--net", required=True, metavar="FILE")
    profile.add_argument("--node", required=True)
    profile.add_argument("--min-parents", type=int, default=3)
    _add_solver_flags(profile)
    profile.add_argument("--control", action="store_true", help="profile a matched random control too")
    profile.add_argument("--control-mode", choices=("normalized", "raw"), default="normalized")
    profile.add_argument("--out", required=True, metavar="CSV")

    decompose = sub.add_parser("decompose", help="fit one CPT at a fixed rank and dump the model")
    decompose.add_argument("--net", required=True, metavar="FILE")
    decompose.add_argument("--node", required=True)
    decompose.add_argument("--rank", type=int, required=True)
    _add_solver_flags(decompose)
    decompose.add_argument("--dump", required=True, metavar="JSON", help="CP model JSON output")

    return parser


def _cmd_corpus(args) -> int:
    cfg = _analysis_config(args)
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    started = time.monotonic()
    done = {"n": 0}

    def progress(rec):
        done["n"] += 1
        found = rec.minimal_rank if rec.minimal_rank is not None else f">{cfg.r_max}"
        print(
            f"[{done['n']}] {rec.network}/{rec.node} ({rec.source}): "
            f"minimal rank {found} ({time.monotonic() - started:.1f}s elapsed)",
            file=sys.stderr,
        )

    report = run_corpus(
        args.net,
        min_parents=args.min_parents,
        cfg=cfg,
        with_controls=args.controls,
        control_mode=args.control_mode,
        strict=args.strict,
        jobs=jobs,
        progress=progress,
    )
    for path, message in report.file_errors:
        print(f"warning: skipped {path}: {message}", file=sys.stderr)
    if not report.records:
        print("warning: no CPTs matched the selection; emitting empty report", file=sys.stderr)
    emit_report(report, "csv", args.out)
    emit_curve_csv(report, args.curve)
    if args.json:
        emit_report(report, "json", args.json)
    return EXIT_OK


def _cmd_profile(args) -> int:
    cfg = _analysis_config(args)
    profile, control = profile_single(
        args.net,
        args.node,
        cfg,
        with_control=args.control,
        control_mode=args.control_mode,
        min_parents=args.min_parents,
    )
    emit_profile_csv(profile, control, args.out)
    dims = "x".join(str(d) for d in profile.dims)
    print(f"profiled {args.node} (dims {dims}) to rank {cfg.r_max}", file=sys.stderr)
    return EXIT_OK


def _cmd_decompose(args) -> int:
    cfg = _analysis_config(args)
    net = load_network(args.net, on_bad_sums="warn")
    if args.node not in net:
        raise ValueError(
            f"node {args.node!r} not in network; available: "
            + ", ".join(n.name for n in net.nodes)
        )
    target = squeeze_unit_parents(cpt_to_tensor(net.node(args.node), net))
    fit = multi_start_decompose(target, args.rank, cfg.solver)
    with open(args.dump, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(fit.model))
    print(
        f"rank-{args.rank} fit of {args.node}: max_error={fit.max_error:.3e} "
        f"frob_error={fit.frob_error:.3e} ({fit.start_kind} start)",
        file=sys.stderr,
    )
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "corpus": _cmd_corpus,
        "profile": _cmd_profile,
        "decompose": _cmd_decompose,
    }
    try:
        return handlers[args.command](args)
    except (NetError, json.JSONDecodeError) as exc:
        print(f"cptrank: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"cptrank: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SolverNumericalError as exc:
        print(f"cptrank: solver abort: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"cptrank: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
