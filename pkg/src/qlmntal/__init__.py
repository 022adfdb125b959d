"""QLMNtal: hierarchical port-graph rewriting with quantified rules."""
from .congruence import canonical_key, congruent, normalize
from .engine import RunConfig, explore, load_program, run
from .graph import FreshNamer, Process, Rule, Template, validate_link_condition
from .matcher import enumerate_matches, instantiate
from .rewrite import apply_rule, successors
from .syntax import desugar_rule, parse_process, parse_program, parse_rule, print_process, print_rule

__all__ = [
    "FreshNamer",
    "Process",
    "Rule",
    "RunConfig",
    "Template",
    "apply_rule",
    "canonical_key",
    "congruent",
    "desugar_rule",
    "enumerate_matches",
    "explore",
    "instantiate",
    "load_program",
    "normalize",
    "parse_process",
    "parse_program",
    "parse_rule",
    "print_process",
    "print_rule",
    "run",
    "successors",
    "validate_link_condition",
]
