"""Command-line front end: explore a theory for lemmas, prove its goals, or
compare two lemma sets by mutual rewrite-subsumption."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .explorer import ExplorerConfig, explore, prove_goals, subsumption_ratio
from .lang import Equation, ParseError, Theory, parse_theory, serialize_lemmas
from .rewrite import RuleAdmissionError

EXIT_OK = 0
EXIT_GOAL_FAILURE = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_TIMEOUT = 4

SEED_DIR_VAR = "THESY_SEED_DIR"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eqdisco",
        description="Discover and prove equational lemmas over algebraic datatypes.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)

    def add_config_flags(p: argparse.ArgumentParser):
        p.add_argument("--term-depth", "-k", type=int, default=2, metavar="K",
                       help="candidate term depth (default 2)")
        p.add_argument("--rw-depth", "-d", type=int, default=8, metavar="D",
                       help="rewrite iterations per saturation (default 8)")
        p.add_argument("--example-depth", "-c", type=int, default=2, metavar="C",
                       help="symbolic example depth (default 2)")
        p.add_argument("--split-depth", type=int, default=2, metavar="N",
                       help="nested case-split bound (default 2)")
        p.add_argument("--placeholders", type=int, default=2, metavar="N",
                       help="placeholder variables per sort (default 2)")
        p.add_argument("--timeout", type=float, default=None, metavar="SECS",
                       help="wall-clock budget in seconds")
        p.add_argument("--no-case-split", action="store_true",
                       help="disable case splitting")
        p.add_argument("--node-cap", type=int, default=150_000, metavar="N",
                       help="e-node budget per saturation (default 150000)")
        p.add_argument("--stats", type=Path, default=None, metavar="PATH",
                       help="write run statistics as JSON")
        p.add_argument("--trace", action="store_true",
                       help="log discovery events to stdout")

    p_explore = sub.add_parser("explore", help="discover lemmas over a theory")
    p_explore.add_argument("input", type=Path)
    p_explore.add_argument("--out", type=Path, default=None,
                           help="lemma output path (default <input>.lemmas.smt2)")
    add_config_flags(p_explore)

    p_prove = sub.add_parser("prove", help="prove the goals asserted in a file")
    p_prove.add_argument("input", type=Path)
    add_config_flags(p_prove)

    p_compare = sub.add_parser(
        "compare", help="mutual subsumption ratios of two lemma files"
    )
    p_compare.add_argument("base", type=Path, help="theory with the definitions")
    p_compare.add_argument("lemmas_a", type=Path)
    p_compare.add_argument("lemmas_b", type=Path)
    add_config_flags(p_compare)

    return parser


def _config_of(args: argparse.Namespace) -> ExplorerConfig:
    return ExplorerConfig(
        k=args.term_depth,
        d=args.rw_depth,
        c=args.example_depth,
        split_depth=args.split_depth,
        ph_count=args.placeholders,
        timeout=args.timeout,
        case_split_enabled=not args.no_case_split,
        node_cap=args.node_cap,
        trace=print if args.trace else None,
    )


def _parse_file(path: Path, into: Theory | None = None) -> Theory:
    return parse_theory(path.read_text(), into=into)


def _load_seed_lemmas(theory: Theory) -> int:
    """Extend the theory with equations from prior lemma files, if any."""
    seed_dir = os.environ.get(SEED_DIR_VAR)
    if not seed_dir:
        return 0
    before = len(theory.eqs)
    for path in sorted(Path(seed_dir).glob("*.lemmas.smt2")):
        _parse_file(path, into=theory)
    for eq in theory.eqs[before:]:
        eq.origin = "seed"
    return len(theory.eqs) - before


def _write_stats(args: argparse.Namespace, stats: dict):
    if args.stats is not None:
        args.stats.write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")


def _cmd_explore(args: argparse.Namespace) -> int:
    theory = _parse_file(args.input)
    _load_seed_lemmas(theory)
    lemmas, stats = explore(theory, _config_of(args))
    out = args.out
    if out is None:
        out = args.input.parent / (args.input.stem + ".lemmas.smt2")
    out.write_text(serialize_lemmas([lemma.equation for lemma in lemmas]))
    _write_stats(args, stats)
    print(f"{len(lemmas)} lemmas -> {out}")
    return EXIT_TIMEOUT if stats.get("truncated") else EXIT_OK


def _cmd_prove(args: argparse.Namespace) -> int:
    theory = _parse_file(args.input)
    _load_seed_lemmas(theory)
    if not theory.goals:
        print("error: no goals asserted in input", file=sys.stderr)
        return EXIT_USAGE
    results, _lemmas, stats = prove_goals(theory, _config_of(args))
    for res in results:
        verdict = "PROVED" if res["proved"] else "FAILED"
        print(f"{verdict} {res['goal']} {res['equation']}")
    _write_stats(args, stats)
    if all(res["proved"] for res in results):
        return EXIT_OK
    return EXIT_TIMEOUT if stats.get("truncated") else EXIT_GOAL_FAILURE


def _lemma_equations(path: Path, base: Theory) -> list[Equation]:
    """Parse a lemma file against the base theory's vocabulary."""
    snapshot = len(base.eqs)
    parse_theory(path.read_text(), into=base)
    lemmas = base.eqs[snapshot:]
    del base.eqs[snapshot:]
    return lemmas


def _cmd_compare(args: argparse.Namespace) -> int:
    base = _parse_file(args.base)
    t_a = _lemma_equations(args.lemmas_a, base)
    t_b = _lemma_equations(args.lemmas_b, base)
    config = _config_of(args)
    ab = subsumption_ratio(t_a, t_b, base, config)
    ba = subsumption_ratio(t_b, t_a, base, config)
    print(f"ratio A<B: {ab:.3f} ratio B<A: {ba:.3f}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    handlers = {
        "explore": _cmd_explore,
        "prove": _cmd_prove,
        "compare": _cmd_compare,
    }
    try:
        return handlers[args.mode](args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, RuleAdmissionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
