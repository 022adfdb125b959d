"""Embedding quantifier-free head templates into processes."""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterator

from .graph import (
    GLOBAL_CONTEXT,
    Atom,
    ContextError,
    FreshNamer,
    Membrane,
    Process,
    QLMNtalError,
    Template,
    glue,
    template_names,
)

ROOT = 0  # image of the global membrane


@dataclass
class Substitution:
    context_bindings: dict[str, Process] = field(default_factory=dict)
    atom_embedding: dict[int, int] = field(default_factory=dict)
    membrane_embedding: dict[int, int] = field(default_factory=dict)
    link_binding: dict[str, str] = field(default_factory=dict)

    @property
    def global_context(self) -> Process:
        return self.context_bindings.get(GLOBAL_CONTEXT, Process())


class _Target:
    """Index of a process: levels, atoms by id, endpoints by link name."""

    def __init__(self, p: Process):
        self.process = p
        self.levels: dict[int, Process] = {ROOT: p}
        self.atom: dict[int, Atom] = {}
        self.parent: dict[int, int] = {}
        self.ends: dict[str, list[tuple[int, int]]] = defaultdict(list)
        self.counts: dict[int, Counter] = {}
        self._visit(p, ROOT)

    def _visit(self, q: Process, level: int) -> None:
        self.counts[level] = Counter((a.name, a.arity) for a in q.atoms)
        for a in q.atoms:
            self.atom[a.id] = a
            self.parent[a.id] = level
            for i, x in enumerate(a.links):
                self.ends[x].append((a.id, i))
        for m in q.membranes:
            self.levels[m.id] = m.content
            self.parent[m.id] = level
            self._visit(m.content, m.id)

    def partner(self, aid: int, port: int):
        e = self.ends[self.atom[aid].links[port]]
        if len(e) != 2:
            return None
        return e[1] if e[0] == (aid, port) else e[0]


def _pattern_ends(pattern: Template) -> dict[str, list[tuple[int, int]]]:
    ends: dict[str, list[tuple[int, int]]] = defaultdict(list)

    def go(t: Template) -> None:
        for a in t.atoms:
            for i, x in enumerate(a.links):
                ends[x].append((a.id, i))
        for m in t.membranes:
            go(m.body)

    go(pattern)
    return ends


@dataclass
class _Node:
    kind: str  # "A" or "M"
    item: object  # Atom or TMembrane
    parent: int  # pattern membrane id, ROOT for the top level
    chain: tuple[int, int] | None = None


def _plan(pattern: Template, target: _Target, ends, chains) -> list[_Node]:
    nodes: list[_Node] = []

    def collect(t: Template, parent: int) -> None:
        for a in t.atoms:
            nodes.append(_Node("A", a, parent))
        for m in t.membranes:
            nodes.append(_Node("M", m, parent))
            collect(m.body, m.id)

    collect(pattern, ROOT)
    pos = {}
    for ci, chain in enumerate(chains or ()):
        for j, item_id in enumerate(chain):
            pos[item_id] = (ci, j)
    for n in nodes:
        n.chain = pos.get(n.item.id)

    rarity = Counter((a.name, a.arity) for a in target.atom.values())
    ordered: list[_Node] = []
    placed_atoms: set[int] = set()
    open_levels = {ROOT}
    left = list(nodes)
    while left:
        best, best_score = None, None
        for idx, n in enumerate(left):
            if n.parent not in open_levels:
                continue
            if n.kind == "A":
                linked = any(
                    len(ends[x]) == 2 and any(e[0] in placed_atoms for e in ends[x])
                    for x in n.item.links
                )
                score = (0, idx) if linked else (3, rarity[(n.item.name, n.item.arity)], idx)
            else:
                score = (1 if not n.item.body.contexts else 2, idx)
            if best_score is None or score < best_score:
                best, best_score = idx, score
        n = left.pop(best)
        ordered.append(n)
        if n.kind == "A":
            placed_atoms.add(n.item.id)
        else:
            open_levels.add(n.item.id)
    return ordered


def _membrane_fits(t: Template, content: Process) -> bool:
    need = Counter((a.name, a.arity) for a in t.atoms)
    have = Counter((a.name, a.arity) for a in content.atoms)
    if t.contexts:
        return len(t.membranes) <= len(content.membranes) and all(have[k] >= v for k, v in need.items())
    return len(t.membranes) == len(content.membranes) and need == have


def enumerate_matches(
    pattern: Template, target: Process, chains: list[list[int]] | None = None
) -> Iterator[Substitution]:
    """Yield every embedding of ``pattern`` into ``target``.

    ``pattern`` must be quantifier-free.  Contexts at the top level are not
    allowed; the top-level remainder is bound to the global context.
    ``chains`` optionally lists pattern item ids whose images must have
    increasing ids, which prunes matches differing only by a permutation of
    interchangeable replicas.
    """
    if pattern.quantified:
        raise QLMNtalError("enumerate_matches expects a quantifier-free template")
    if pattern.contexts:
        raise ContextError("a process context may not occur at the top level of a head")
    tgt = _Target(target)
    ends = _pattern_ends(pattern)
    plan = _plan(pattern, tgt, ends, chains)
    chain_imgs: dict[tuple[int, int], int] = {}
    img: dict[int, int] = {}  # pattern item id -> target item id
    used: set[int] = set()
    level_of = {ROOT: ROOT}
    if not _fits_root(pattern, target):
        return

    def chain_ok(n: _Node, t_id: int) -> bool:
        if n.chain is None:
            return True
        ci, j = n.chain
        prev = chain_imgs.get((ci, j - 1))
        nxt = chain_imgs.get((ci, j + 1))
        return (prev is None or prev < t_id) and (nxt is None or t_id < nxt)

    def atom_ok(a: Atom, b: Atom) -> bool:
        for i, x in enumerate(a.links):
            e = ends[x]
            if len(e) != 2:
                continue
            (a1, i1), (a2, i2) = e
            other = (a2, i2) if (a1, i1) == (a.id, i) else (a1, i1)
            if other[0] in img:
                if tgt.partner(b.id, i) != (img[other[0]], other[1]):
                    return False
            elif tgt.partner(b.id, i) is None:
                return False
        return True

    def candidates(n: _Node):
        parent_img = level_of[n.parent]
        if n.kind == "A":
            a = n.item
            for i, x in enumerate(a.links):
                e = ends[x]
                if len(e) == 2:
                    (a1, i1), (a2, i2) = e
                    other = (a2, i2) if (a1, i1) == (a.id, i) else (a1, i1)
                    if other[0] in img and other[0] != a.id:
                        p = tgt.partner(img[other[0]], other[1])
                        if p is None or p[1] != i:
                            return []
                        b = tgt.atom[p[0]]
                        if tgt.parent[b.id] != parent_img or b.name != a.name or b.arity != a.arity:
                            return []
                        return [b]
            return [
                b
                for b in tgt.levels[parent_img].atoms
                if b.name == a.name and b.arity == a.arity
            ]
        return [m for m in tgt.levels[parent_img].membranes if _membrane_fits(n.item.body, m.content)]

    def rec(k: int) -> Iterator[Substitution]:
        if k == len(plan):
            yield _substitution(pattern, tgt, img, ends)
            return
        n = plan[k]
        for c in candidates(n):
            if c.id in used or not chain_ok(n, c.id):
                continue
            if n.kind == "A":
                img[n.item.id] = c.id
                if not atom_ok(n.item, c):
                    del img[n.item.id]
                    continue
            else:
                img[n.item.id] = c.id
                level_of[n.item.id] = c.id
            used.add(c.id)
            if n.chain is not None:
                chain_imgs[n.chain] = c.id
            yield from rec(k + 1)
            used.discard(c.id)
            del img[n.item.id]
            if n.chain is not None:
                del chain_imgs[n.chain]

    yield from rec(0)


def _fits_root(pattern: Template, target: Process) -> bool:
    need = Counter((a.name, a.arity) for a in pattern.atoms)
    have = Counter((a.name, a.arity) for a in target.atoms)
    return len(pattern.membranes) <= len(target.membranes) and all(have[k] >= v for k, v in need.items())


def _remainder(level: Process, used: set[int]) -> Process:
    return Process(
        tuple(a for a in level.atoms if a.id not in used),
        tuple(m for m in level.membranes if m.id not in used),
    )


def _substitution(pattern: Template, tgt: _Target, img: dict[int, int], ends) -> Substitution:
    used = set(img.values())
    s = Substitution()
    s.context_bindings[GLOBAL_CONTEXT] = _remainder(tgt.process, used)

    def go(t: Template, level: int) -> None:
        for a in t.atoms:
            s.atom_embedding[a.id] = img[a.id]
            b = tgt.atom[img[a.id]]
            for i, x in enumerate(a.links):
                if len(ends[x]) == 1:
                    s.link_binding[x] = b.links[i]
        for m in t.membranes:
            mid = img[m.id]
            s.membrane_embedding[m.id] = mid
            for c in m.body.contexts:
                s.context_bindings[c] = _remainder(tgt.levels[mid], used)
            go(m.body, mid)

    go(pattern, ROOT)
    return s


def count_matches(pattern: Template, target: Process) -> int:
    return sum(1 for _ in enumerate_matches(pattern, target))


# --------------------------------------------------------------------------
# instantiation


def process_names(p: Process) -> set[str]:
    return {x for a in p.walk_atoms() for x in a.links}


def instantiate(
    t: Template, theta: Substitution, ns: FreshNamer | None = None, with_global: bool = True
) -> Process:
    """Build the process ``(t, $γ)θ``.

    Contexts are replaced by their bindings, links bound by the match take
    the target's link names, and links local to ``t`` get fresh names.
    """
    if t.quantified:
        raise QLMNtalError("instantiate expects a quantifier-free template")
    ns = ns or FreshNamer()
    for proc in theta.context_bindings.values():
        ns.reserve(process_names(proc))
    ns.reserve(theta.link_binding.values())
    ns.reserve(template_names(t))
    local: dict[str, str] = {}

    def link(x: str) -> str:
        if x in theta.link_binding:
            return theta.link_binding[x]
        if x not in local:
            local[x] = ns.fresh(x)
        return local[x]

    def go(t: Template) -> Process:
        atoms = [Atom(a.name, tuple(link(x) for x in a.links)) for a in t.atoms]
        mems = [Membrane(go(m.body)) for m in t.membranes]
        for c in t.contexts:
            if c not in theta.context_bindings:
                raise ContextError(f"process context ${c} is unbound")
            b = theta.context_bindings[c]
            atoms.extend(b.atoms)
            mems.extend(b.membranes)
        return Process(tuple(atoms), tuple(mems))

    out = go(t)
    if with_global:
        out = glue(out, theta.global_context)
    from .congruence import normalize

    return normalize(out)
