"""Rule application: unrolling, simp/cxt/neg, CardCond and NegCond."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator

from .congruence import canonical_key
from .graph import (
    GLOBAL_CONTEXT,
    INF,
    SEP,
    Atom,
    FreshNamer,
    Process,
    QLMNtalError,
    Quantified,
    Rule,
    Template,
    TMembrane,
    fresh_renaming,
    rename_template,
    template_names,
)
from .matcher import Substitution, enumerate_matches, instantiate, process_names


class UnboundedReplicationError(QLMNtalError):
    """A cardinality group has no upper bound and consumes nothing from the target."""


# --------------------------------------------------------------------------
# structural functions


def simp(t: Template) -> Template:
    """Drop every quantified template; ids are kept so matches refer back."""
    return Template(t.atoms, tuple(TMembrane(simp(m.body), m.id) for m in t.membranes), t.contexts)


def id_atom_name(context: str) -> str:
    return f"id{SEP}{context}"


def cxt(t: Template) -> Template:
    """Keep only the membrane skeleton and contexts, each context with its id atom."""
    return Template(
        tuple(Atom(id_atom_name(c)) for c in t.contexts),
        tuple(TMembrane(cxt(m.body)) for m in t.membranes),
        t.contexts,
    )


def neg(label, t: Template, ns: FreshNamer) -> Template:
    """Patterns that must not exist, for the non-existence quantifiers labeled ``label``.

    Top-level ``label<^>T`` templates are unwrapped to ``T``, other atoms and
    quantified templates vanish, and each context is renamed fresh and paired
    with the same id atom ``cxt`` produces.
    """
    atoms = [Atom(id_atom_name(c)) for c in t.contexts]
    ctxs = [ns.fresh(c) for c in t.contexts]
    out = Template(tuple(atoms), tuple(TMembrane(neg(label, m.body, ns)) for m in t.membranes), tuple(ctxs))
    for q in t.quantified:
        if q.quantifier.is_neg and q.quantifier.label == label:
            out = out + rename_template(q.body, new_ids=True)
    return out


def nonexistence_depth(t: Template) -> int:
    """Maximum nesting of non-existence quantifiers in ``t``."""
    best = 0
    for m in t.membranes:
        best = max(best, nonexistence_depth(m.body))
    for q in t.quantified:
        best = max(best, nonexistence_depth(q.body) + (1 if q.quantifier.is_neg else 0))
    return best


def _outermost(t: Template):
    for q in t.quantified:
        yield q
    for m in t.membranes:
        yield from _outermost(m.body)


def outermost_groups(r: Rule) -> dict[tuple, list[tuple[str, Quantified]]]:
    """Outermost cardinality groups in order of first appearance."""
    groups: dict[tuple, list[tuple[str, Quantified]]] = {}
    for side, t in (("head", r.head), ("body", r.body)):
        for q in _outermost(t):
            if q.quantifier.is_card:
                groups.setdefault(q.quantifier.key, []).append((side, q))
    return groups


def outermost_neg_labels(t: Template) -> list:
    out = []
    for q in _outermost(t):
        if q.quantifier.is_neg and q.quantifier.label not in out:
            out.append(q.quantifier.label)
    return out


def card_cond(r: Rule) -> bool:
    return all(q.lo <= 0 <= q.hi for q in (x.quantifier for x in _outermost(r.head)) if q.is_card) and all(
        q.lo <= 0 <= q.hi for q in (x.quantifier for x in _outermost(r.body)) if q.is_card
    )


# --------------------------------------------------------------------------
# (EQ) unrolling


@dataclass
class Unrolled:
    rule: Rule
    # per unrolled group: anchor item ids of the head replicas, usable as matcher chains
    anchors: list[list[int]] = field(default_factory=list)


def _anchor(t: Template) -> int | None:
    if t.atoms:
        return t.atoms[0].id
    if t.membranes:
        return t.membranes[0].id
    return None


def unroll_with_anchors(r: Rule, counts: dict[tuple, int], ns: FreshNamer) -> Unrolled:
    groups = outermost_groups(r)
    maps: dict[tuple, list] = {}
    for key, k in counts.items():
        if k and key in groups:
            bodies = [q.body for _, q in groups[key]]
            maps[key] = [fresh_renaming(bodies, ns) for _ in range(k)]
    anchors: dict[tuple, list[int]] = {}

    def go(t: Template, side: str) -> Template:
        mems = tuple(TMembrane(go(m.body, side), m.id) for m in t.membranes)
        out = Template(t.atoms, mems, t.contexts)
        for q in t.quantified:
            key = q.quantifier.key
            k = counts.get(key, 0) if q.quantifier.is_card else 0
            if not k:
                out = out + Template(quantified=(q,))
                continue
            out = out + Template(quantified=(Quantified(q.quantifier.decremented(k), q.body),))
            first = side == "head" and key not in anchors
            ids = []
            for links, ctxs, labels in maps[key]:
                rep = rename_template(q.body, links, ctxs, labels)
                ids.append(_anchor(rep))
                out = out + rep
            if first:
                anchors[key] = ids
        return out

    head = go(r.head, "head")
    body = go(r.body, "body")
    chains = [ids for ids in anchors.values() if len(ids) > 1 and None not in ids]
    return Unrolled(Rule(head, body, r.source_text), chains)


def unroll(r: Rule, counts: dict[tuple, int], ns: FreshNamer) -> Rule:
    """Replicate each outermost group ``k`` times (one fresh renaming per replica)."""
    return unroll_with_anchors(r, counts, ns).rule


# --------------------------------------------------------------------------
# expansion search


def _resources(p: Process) -> Counter:
    c = Counter(("A", a.name, a.arity) for a in p.walk_atoms())
    c[("M",)] = sum(1 for _ in p.walk_membranes())
    return c


def _direct(t: Template) -> Counter:
    c = Counter(("A", a.name, a.arity) for a in t.atoms)
    for m in t.membranes:
        c[("M",)] += 1
        c += _direct(m.body)
    return c


def _full(t: Template) -> Counter:
    c = _direct(t)
    for q in _outermost(t):
        qq = q.quantifier
        if qq.is_card and qq.lo > 0:
            inner = _full(q.body)
            for key in inner:
                c[key] += int(qq.lo) * inner[key]
    return c


def check_bounded(r: Rule) -> None:
    """Reject cardinality groups that could be replicated without limit."""
    groups: dict[tuple, list[tuple[str, Quantified]]] = {}

    def collect(t: Template, side: str, scope: tuple) -> None:
        for m in t.membranes:
            collect(m.body, side, scope)
        for q in t.quantified:
            key = q.quantifier.key
            if q.quantifier.is_card:
                groups.setdefault((scope, key), []).append((side, q))
            collect(q.body, side, scope + (key,))

    collect(r.head, "head", ())
    collect(r.body, "body", ())
    for (_, key), members in groups.items():
        need = Counter()
        for side, q in members:
            if side == "head":
                need += _full(q.body)
        if key[3] == INF and not need:
            raise UnboundedReplicationError(
                f"quantifier {members[0][1].quantifier} has no upper bound and matches nothing in the head"
            )


def expansions(r: Rule, target: Process, ns: FreshNamer) -> Iterator[Unrolled]:
    """All unrollings of ``r`` satisfying CardCond that could match ``target``.

    Groups are unrolled one at a time; inner groups surfacing from replicas
    are unrolled in turn.  Replication counts are bounded by the atoms and
    membranes a replica needs against those the target has.
    """
    avail = _resources(target)
    avail.subtract(_direct(simp(r.head)))
    if any(v < 0 for v in avail.values()):
        return
    yield from _expand(Unrolled(r), frozenset(), avail, ns)


def _expand(u: Unrolled, frozen: frozenset, avail: Counter, ns: FreshNamer) -> Iterator[Unrolled]:
    groups = outermost_groups(u.rule)
    todo = [key for key in groups if key not in frozen]
    if not todo:
        if card_cond(u.rule):
            yield u
        return
    key = todo[0]
    members = groups[key]
    label, _, lo, hi = key
    need, charge = Counter(), Counter()
    for side, q in members:
        if side == "head":
            need += _full(q.body)
            charge += _direct(q.body)
    if need:
        kmax = min(avail[res] // n for res, n in need.items())
        kmax = min(kmax, hi)
    elif hi == INF:
        raise UnboundedReplicationError(
            f"quantifier {members[0][1].quantifier} has no upper bound and matches nothing in the head"
        )
    else:
        kmax = hi
    for k in range(max(int(lo), 0), int(kmax) + 1):
        step = unroll_with_anchors(u.rule, {key: k}, ns)
        left = avail.copy()
        for res, n in charge.items():
            left[res] -= k * n
        residual = members[0][1].quantifier.decremented(k).key
        yield from _expand(Unrolled(step.rule, u.anchors + step.anchors), frozen | {residual}, left, ns)


# --------------------------------------------------------------------------
# applicability


@dataclass
class NegTrace:
    """Non-existence nesting depth of every head examined by NegCond, in call order."""

    calls: list[tuple[int, int]] = field(default_factory=list)  # (recursion level, head depth)


def _wrap(head: Template) -> Template:
    return Template(membranes=(TMembrane(head + Template(contexts=(GLOBAL_CONTEXT,))),))


def neg_cond(head: Template, theta: Substitution, ns: FreshNamer, trace: NegTrace | None = None, level: int = 0) -> bool:
    """True iff no non-existence pattern of ``head`` is present in the places θ leaves."""
    labels = outermost_neg_labels(head)
    if not labels:
        return True
    wrapped = _wrap(head)
    target = instantiate(cxt(wrapped), theta, ns, with_global=False)
    for label in labels:
        pattern = neg(label, wrapped, ns)
        if applicable(pattern, target, ns, trace, level + 1):
            return False
    return True


def applicable(head: Template, target: Process, ns: FreshNamer, trace: NegTrace | None = None, level: int = 0) -> bool:
    """Whether the rule ``head :-`` can rewrite ``target``."""
    if trace is not None:
        trace.calls.append((level, nonexistence_depth(head)))
    rule = Rule(head, Template())
    ns.reserve(process_names(target) | template_names(head))
    for u in expansions(rule, target, ns):
        pattern = simp(u.rule.head)
        for theta in enumerate_matches(pattern, target, u.anchors):
            if neg_cond(u.rule.head, theta, ns, trace, level):
                return True
    return False


def matches(r: Rule, p: Process, ns: FreshNamer) -> Iterator[tuple[Rule, Substitution]]:
    """Every (unrolled rule, θ) pair satisfying the premises of rule application."""
    ns.reserve(process_names(p) | template_names(r.head) | template_names(r.body))
    for u in expansions(r, p, ns):
        pattern = simp(u.rule.head)
        for theta in enumerate_matches(pattern, p, u.anchors):
            if neg_cond(u.rule.head, theta, ns):
                yield u.rule, theta


def apply_rule(r: Rule, p: Process, ns: FreshNamer | None = None) -> list[Process]:
    """Every result of one application of ``r`` to ``p``, one per congruence class.

    Results are sorted by canonical key.
    """
    ns = ns or FreshNamer()
    seen: dict[bytes, Process] = {}
    for ur, theta in matches(r, p, ns):
        q = instantiate(simp(ur.body), theta, ns)
        seen.setdefault(canonical_key(q), q)
    return [seen[k] for k in sorted(seen)]


def successors(p: Process, rules: list[Rule], ns: FreshNamer | None = None) -> list[tuple[int, Process]]:
    """Union of ``apply_rule`` over ``rules``, tagged by rule index."""
    ns = ns or FreshNamer()
    out = []
    for i, r in enumerate(rules):
        out.extend((i, q) for q in apply_rule(r, p, ns))
    return out
