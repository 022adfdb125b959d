"""Command-line interface: ``qlmntal run|step|space|check|desugar``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .engine import RunConfig, STRATEGIES, check_congruent, explore, format_trace, load_file, run
from .graph import QLMNtalError
from .syntax import ParseError, print_process, print_rule

EXIT_OK, EXIT_DIAGNOSTIC, EXIT_LIMIT = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qlmntal", description="QLMNtal interpreter and state-space explorer")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_run_options(p):
        p.add_argument("file")
        p.add_argument("--strategy", choices=STRATEGIES, default="first")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trace", choices=("text", "json"), default=None, help="print every step")

    p = sub.add_parser("run", help="rewrite until quiescence or the step limit")
    add_run_options(p)
    p.add_argument("--max-steps", type=int, default=1000)
    p.add_argument("--fixpoint-on-congruent", action="store_true", help="stop when a state repeats")

    p = sub.add_parser("step", help="perform a single rewrite step")
    add_run_options(p)

    p = sub.add_parser("space", help="enumerate the reachable state space")
    p.add_argument("file")
    p.add_argument("--max-states", type=int, default=10000)
    p.add_argument("--dot", metavar="OUT", help="write the transition system in DOT format")

    p = sub.add_parser("check", help="decide structural congruence of two processes")
    p.add_argument("file_a")
    p.add_argument("file_b")

    p = sub.add_parser("desugar", help="print rules in core form")
    p.add_argument("file")
    return ap


def _run(args, mode: str) -> int:
    program = load_file(args.file)
    cfg = RunConfig(
        mode=mode,
        max_steps=getattr(args, "max_steps", 1),
        seed=args.seed,
        strategy=args.strategy,
        trace_format=args.trace or "text",
        fixpoint_on_congruent=getattr(args, "fixpoint_on_congruent", False),
    )
    res = run(program, cfg)
    if args.trace:
        sys.stdout.write(format_trace(res.trace, args.trace))
    if args.trace != "json":
        print(print_process(res.final))
    print(f"{res.status} after {res.steps} step(s)", file=sys.stderr)
    return EXIT_LIMIT if res.limit_reached and mode == "run" else EXIT_OK


def _space(args) -> int:
    program = load_file(args.file)
    g = explore(program, RunConfig(mode="space", max_states=args.max_states))
    for k in sorted(g.states):
        print(("* " if k == g.initial else "  ") + k.decode())
    print(f"{len(g.states)} state(s), {len(g.edges)} transition(s)", file=sys.stderr)
    if args.dot:
        Path(args.dot).write_text(g.to_dot(), encoding="utf-8")
    if g.truncated:
        print("state limit reached", file=sys.stderr)
        return EXIT_LIMIT
    return EXIT_OK


def _check(args) -> int:
    a = Path(args.file_a).read_text(encoding="utf-8")
    b = Path(args.file_b).read_text(encoding="utf-8")
    same, why = check_congruent(a, b)
    print("congruent" if same else f"not congruent: {why}")
    return EXIT_OK if same else EXIT_DIAGNOSTIC


def _desugar(args) -> int:
    program = load_file(args.file)
    for r in program.rules:
        print(print_rule(r) + ".")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("run", "step"):
            return _run(args, args.command)
        if args.command == "space":
            return _space(args)
        if args.command == "check":
            return _check(args)
        return _desugar(args)
    except (ParseError, QLMNtalError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIAGNOSTIC


if __name__ == "__main__":
    sys.exit(main())
