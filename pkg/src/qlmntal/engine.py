"""Program loading, execution strategies and state-space exploration."""
from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .congruence import canonical_key, congruent, explain_difference
from .graph import FreshNamer, Process, Rule, template_names
from .rewrite import apply_rule, check_bounded
from .syntax import SourceProgram, desugar_rule, parse_program, print_process, print_rule

STRATEGIES = ("first", "random", "all")


@dataclass
class Program:
    source: SourceProgram
    rules: list[Rule]  # desugared, in source order

    @property
    def init(self) -> Process:
        return self.source.init


def compile_program(src: SourceProgram, ns: FreshNamer | None = None) -> Program:
    ns = ns or FreshNamer()
    for r in src.rules:
        ns.reserve(template_names(r.head) | template_names(r.body))
    rules = []
    for r in src.rules:
        d = desugar_rule(r, ns)
        check_bounded(d)
        rules.append(d)
    return Program(src, rules)


def load_program(text: str) -> Program:
    ns = FreshNamer()
    return compile_program(parse_program(text, ns), ns)


def load_file(path: str | Path) -> Program:
    return load_program(Path(path).read_text(encoding="utf-8"))


@dataclass
class RunConfig:
    mode: str = "run"
    max_steps: int = 1000
    max_states: int = 10000
    seed: int = 0
    strategy: str = "first"
    trace_format: str = "text"
    fixpoint_on_congruent: bool = False

    def __post_init__(self):
        if self.max_steps < 0 or self.max_states < 0:
            raise ValueError("limits must be non-negative")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")


@dataclass
class TraceEntry:
    step: int
    rule_index: int
    rule_text: str
    pre: str
    post: str
    pre_key: str
    post_key: str
    alternatives: int = 1

    def to_json(self) -> str:
        d = {
            "step": self.step,
            "rule_index": self.rule_index,
            "rule_text": self.rule_text,
            "pre": self.pre,
            "post": self.post,
            "pre_key": self.pre_key,
            "post_key": self.post_key,
        }
        return json.dumps(d, ensure_ascii=False)

    def to_text(self) -> str:
        return f"step {self.step}: rule {self.rule_index}: {self.pre} --> {self.post}"


@dataclass
class RunResult:
    final: Process
    steps: int
    status: str  # "quiescent", "step-limit" or "fixpoint"
    trace: list[TraceEntry] = field(default_factory=list)

    @property
    def limit_reached(self) -> bool:
        return self.status == "step-limit"


def _rule_text(program: Program, i: int) -> str:
    r = program.source.rules[i] if i < len(program.source.rules) else program.rules[i]
    return r.source_text or print_rule(r)


def _choose(program: Program, p: Process, cfg: RunConfig, rng: random.Random, ns: FreshNamer):
    if cfg.strategy == "first":
        for i, r in enumerate(program.rules):
            res = apply_rule(r, p, ns)
            if res:
                return i, res[0], len(res)
        return None
    options = [(i, q) for i, r in enumerate(program.rules) for q in apply_rule(r, p, ns)]
    if not options:
        return None
    i, q = rng.choice(options) if cfg.strategy == "random" else options[0]
    return i, q, len(options)


def run(program: Program, cfg: RunConfig | None = None) -> RunResult:
    """Rewrite until no rule applies or the step limit is reached.

    ``first`` takes the smallest result of the first applicable rule,
    ``all`` computes every successor and takes the first, ``random`` picks
    uniformly among all successors using ``cfg.seed``.
    """
    cfg = cfg or RunConfig()
    rng = random.Random(cfg.seed)
    ns = FreshNamer()
    p = program.init
    key = canonical_key(p)
    seen = {key}
    trace: list[TraceEntry] = []
    limit = 1 if cfg.mode == "step" else cfg.max_steps
    for step in range(1, limit + 1):
        choice = _choose(program, p, cfg, rng, ns)
        if choice is None:
            return RunResult(p, step - 1, "quiescent", trace)
        i, q, n = choice
        qkey = canonical_key(q)
        trace.append(
            TraceEntry(step, i, _rule_text(program, i), key.decode(), qkey.decode(), key.decode(), qkey.decode(), n)
        )
        p, key = q, qkey
        if cfg.fixpoint_on_congruent:
            if key in seen:
                return RunResult(p, step, "fixpoint", trace)
            seen.add(key)
    if cfg.mode == "step":
        return RunResult(p, len(trace), "quiescent" if not trace else "step-limit", trace)
    # one more probe distinguishes quiescence exactly at the limit
    if _choose(program, p, RunConfig(strategy="first"), rng, ns) is None:
        return RunResult(p, len(trace), "quiescent", trace)
    return RunResult(p, len(trace), "step-limit", trace)


@dataclass
class StateGraph:
    states: dict[bytes, Process] = field(default_factory=dict)
    edges: set[tuple[bytes, int, bytes]] = field(default_factory=set)
    initial: bytes = b""
    truncated: bool = False

    def successors_of(self, key: bytes) -> set[bytes]:
        return {b for a, _, b in self.edges if a == key}

    def to_dot(self) -> str:
        ids = {k: f"s{n}" for n, k in enumerate(sorted(self.states))}
        lines = ["digraph states {"]
        for k in sorted(self.states):
            label = k.decode().replace("\\", "\\\\").replace('"', '\\"')
            shape = ' peripheries=2' if k == self.initial else ""
            lines.append(f'  {ids[k]} [label="{label}"{shape}];')
        for a, i, b in sorted(self.edges):
            lines.append(f'  {ids[a]} -> {ids[b]} [label="{i}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def explore(program: Program, cfg: RunConfig | None = None) -> StateGraph:
    """Breadth-first enumeration of every reachable state, up to ``max_states``."""
    cfg = cfg or RunConfig(mode="space")
    ns = FreshNamer()
    g = StateGraph()
    g.initial = canonical_key(program.init)
    g.states[g.initial] = program.init
    frontier = deque([g.initial])
    while frontier:
        k = frontier.popleft()
        p = g.states[k]
        for i, r in enumerate(program.rules):
            for q in apply_rule(r, p, ns):
                qk = canonical_key(q)
                if qk not in g.states:
                    if len(g.states) >= cfg.max_states:
                        g.truncated = True
                        continue
                    g.states[qk] = q
                    frontier.append(qk)
                g.edges.add((k, i, qk))
    return g


def check_congruent(text_a: str, text_b: str) -> tuple[bool, str]:
    """Compare the initial processes of two programs."""
    a = parse_program(text_a).init
    b = parse_program(text_b).init
    if congruent(a, b):
        return True, "congruent"
    return False, explain_difference(a, b) or "not congruent"


def format_trace(trace: list[TraceEntry], fmt: str) -> str:
    if fmt == "json":
        return "".join(e.to_json() + "\n" for e in trace)
    return "".join(e.to_text() + "\n" for e in trace)


__all__ = [
    "Program",
    "RunConfig",
    "RunResult",
    "StateGraph",
    "TraceEntry",
    "check_congruent",
    "compile_program",
    "explore",
    "format_trace",
    "load_file",
    "load_program",
    "print_process",
    "run",
]
