"""Structural congruence: connector normalization and canonical keys.

Congruence is decided on connector-normalized processes by canonical
labeling of the hierarchical port graph.  Vertices are the global
membrane, every membrane and every atom; colors are refined from atom
name, arity, free-link names, parent and port neighbourhood, and ties
left after refinement are broken by individualization with automorphism
pruning.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass

from .graph import CONNECTOR, Atom, Membrane, Process


# --------------------------------------------------------------------------
# connectors


def _has_connector(p: Process) -> bool:
    return any(a.name == CONNECTOR and a.arity == 2 for a in p.walk_atoms())


def normalize(p: Process) -> Process:
    """Eliminate connectors.

    Each maximal chain of connectors is contracted: ``X=X`` and connector
    cycles vanish, a chain between an atom port and a free link (or two
    atom ports) is fused into one link, and a chain between two free
    links survives as a single connector in the global membrane.
    """
    if not _has_connector(p):
        return p
    counts = p.link_counts()
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def is_conn(a: Atom) -> bool:
        return a.name == CONNECTOR and a.arity == 2

    conn_names: set[str] = set()
    for a in p.walk_atoms():
        if is_conn(a):
            x, y = a.links
            conn_names.update(a.links)
            rx, ry = find(x), find(y)
            if rx != ry:
                parent[max(rx, ry)] = min(rx, ry)

    ports: dict[str, list[tuple[int, int]]] = defaultdict(list)
    for a in p.walk_atoms():
        if not is_conn(a):
            for i, x in enumerate(a.links):
                if x in conn_names:
                    ports[find(x)].append((a.id, i))
    free_ends: dict[str, list[str]] = defaultdict(list)
    for x in conn_names:
        if counts[x] == 1:
            free_ends[find(x)].append(x)

    relink: dict[tuple[int, int], str] = {}
    survivors: list[Atom] = []
    for root in {find(x) for x in conn_names}:
        es, fs = ports.get(root, []), sorted(free_ends.get(root, []))
        if len(es) == 2:
            for e in es:
                relink[e] = root
        elif len(es) == 1 and len(fs) == 1:
            relink[es[0]] = fs[0]
        elif not es and len(fs) == 2:
            survivors.append(Atom(CONNECTOR, (fs[0], fs[1])))

    def rebuild(q: Process) -> Process:
        atoms = []
        for a in q.atoms:
            if is_conn(a):
                continue
            if any((a.id, i) in relink for i in range(a.arity)):
                a = a.relinked(relink.get((a.id, i), x) for i, x in enumerate(a.links))
            atoms.append(a)
        return Process(tuple(atoms), tuple(Membrane(rebuild(m.content), m.id) for m in q.membranes))

    out = rebuild(p)
    if survivors:
        survivors.sort(key=lambda a: a.links)
        out = Process(out.atoms + tuple(survivors), out.membranes)
    return out


# --------------------------------------------------------------------------
# port graph view


@dataclass
class _Graph:
    """Flattened vertex view of a process (vertex 0 is the global membrane)."""

    kinds: list[tuple]
    parent: list[int]
    children: list[list[int]]
    ports: list[tuple]  # per atom vertex: (partner_vertex, partner_port) or (-1, free_name)
    items: list  # Atom / Membrane / None for root


def _graph(p: Process) -> _Graph:
    kinds: list[tuple] = [("R",)]
    parent = [-1]
    children: list[list[int]] = [[]]
    items: list = [None]
    atom_vertex: list[tuple[int, Atom]] = []

    def visit(q: Process, pv: int) -> None:
        for a in q.atoms:
            v = len(kinds)
            kinds.append(("A", a.name, a.arity))
            parent.append(pv)
            children.append([])
            children[pv].append(v)
            items.append(a)
            atom_vertex.append((v, a))
        for m in q.membranes:
            v = len(kinds)
            kinds.append(("M",))
            parent.append(pv)
            children.append([])
            children[pv].append(v)
            items.append(m)
            visit(m.content, v)

    visit(p, 0)
    ends: dict[str, list[tuple[int, int]]] = defaultdict(list)
    for v, a in atom_vertex:
        for i, x in enumerate(a.links):
            ends[x].append((v, i))
    ports: list = [()] * len(kinds)
    for v, a in atom_vertex:
        row = []
        for i, x in enumerate(a.links):
            e = ends[x]
            if len(e) == 1:
                row.append((-1, x))
            else:
                (v1, i1), (v2, i2) = e
                row.append((v2, i2) if (v1, i1) == (v, i) else (v1, i1))
        ports[v] = tuple(row)
        free = tuple(x if len(ends[x]) == 1 else "" for x in a.links)
        kinds[v] = kinds[v] + (free,)
    return _Graph(kinds, parent, children, ports, items)


def _index(sigs: list) -> list[int]:
    order = {s: i for i, s in enumerate(sorted(set(sigs)))}
    return [order[s] for s in sigs]


def _refine(g: _Graph, colors: list[int]) -> list[int]:
    n = len(colors)
    ncls = len(set(colors))
    while True:
        sigs = []
        for v in range(n):
            pc = colors[g.parent[v]] if v else -1
            if g.kinds[v][0] == "A":
                nb = tuple((j, colors[u]) if u >= 0 else (-1, -1) for u, j in g.ports[v])
            else:
                nb = tuple(sorted(colors[c] for c in g.children[v]))
            sigs.append((colors[v], pc, nb))
        new = _index(sigs)
        k = len(set(new))
        colors = new
        if k == ncls:
            return colors
        ncls = k


def _certificate(g: _Graph, colors: list[int]) -> tuple:
    n = len(colors)
    lab = [0] * n  # rank -> vertex
    for v, c in enumerate(colors):
        lab[c] = v
    cert = []
    for r in range(n):
        v = lab[r]
        pc = colors[g.parent[v]] if v else -1
        if g.kinds[v][0] == "A":
            ps = tuple((colors[u], j) if u >= 0 else (-1, j) for u, j in g.ports[v])
        else:
            ps = ()
        cert.append((pc, ps))
    return tuple(cert)


class _Search:
    def __init__(self, g: _Graph):
        self.g = g
        self.first = None  # (cert, lab, path)
        self.best = None  # (cert, colors)
        self.autos: list[list[int]] = []

    def run(self) -> list[int]:
        base = _index([k for k in self.g.kinds])
        self._rec(base, [])
        return self.best[1]

    def _rec(self, colors: list[int], path: list[int]):
        colors = _refine(self.g, colors)
        n = len(colors)
        if len(set(colors)) == n:
            return self._leaf(colors, path)
        cells: dict[int, list[int]] = defaultdict(list)
        for v, c in enumerate(colors):
            cells[c].append(v)
        cell = next(cells[c] for c in sorted(cells) if len(cells[c]) > 1)
        explored: list[int] = []
        for v in cell:
            if explored and self._same_orbit(v, explored, path, cell):
                continue
            newc = [2 * c + (u != v) for u, c in enumerate(colors)]
            back = self._rec(_index(newc), path + [v])
            explored.append(v)
            if back is not None and back < len(path):
                return back
        return None

    def _leaf(self, colors: list[int], path: list[int]):
        cert = _certificate(self.g, colors)
        lab = [0] * len(colors)
        for v, c in enumerate(colors):
            lab[c] = v
        if self.first is None:
            self.first = (cert, lab, path)
            self.best = (cert, colors, lab)
            return None
        if cert == self.first[0]:
            self.autos.append(self._auto(self.first[1], lab))
            fp = self.first[2]
            d = 0
            while d < len(fp) and d < len(path) and fp[d] == path[d]:
                d += 1
            return d
        if cert == self.best[0]:
            self.autos.append(self._auto(self.best[2], lab))
        elif cert < self.best[0]:
            self.best = (cert, colors, lab)
        return None

    @staticmethod
    def _auto(lab_a: list[int], lab_b: list[int]) -> list[int]:
        perm = [0] * len(lab_a)
        for r, v in enumerate(lab_a):
            perm[v] = lab_b[r]
        return perm

    def _same_orbit(self, v: int, explored: list[int], path: list[int], cell: list[int]) -> bool:
        parent = {u: u for u in cell}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a in self.autos:
            if all(a[w] == w for w in path):
                for u in cell:
                    if a[u] in parent:
                        parent[find(u)] = find(a[u])
        rv = find(v)
        return any(find(u) == rv for u in explored)


@dataclass(frozen=True)
class CanonicalForm:
    """Canonical vertex ranking together with the graph it ranks."""

    graph: _Graph
    colors: list[int]

    def order(self) -> list[int]:
        lab = [0] * len(self.colors)
        for v, c in enumerate(self.colors):
            lab[c] = v
        return lab


def canonical_form(p: Process) -> CanonicalForm:
    g = _graph(p)
    return CanonicalForm(g, _Search(g).run())


def canonical_key(p: Process) -> bytes:
    """Deterministic fingerprint; equal exactly for congruent processes."""
    from .syntax import print_process

    return print_process(p).encode("utf-8")


def congruent(p: Process, q: Process) -> bool:
    return canonical_key(p) == canonical_key(q)


def explain_difference(p: Process, q: Process) -> str | None:
    """Name the first refinement class whose size differs, or None if congruent."""
    p, q = normalize(p), normalize(q)
    if congruent(p, q):
        return None
    # refine the disjoint union so colors are comparable across both sides
    gp, gq = _graph(p), _graph(q)
    off = len(gp.kinds)
    kinds = gp.kinds + gq.kinds
    par = gp.parent + [x + off if x >= 0 else -1 for x in gq.parent]
    par[off] = -1
    children = gp.children + [[c + off for c in cs] for cs in gq.children]
    ports = gp.ports + [tuple((u + off, j) if u >= 0 else (u, j) for u, j in row) for row in gq.ports]
    n = len(kinds)
    colors = _index(kinds)
    while True:
        sigs = []
        for v in range(n):
            pc = colors[par[v]] if par[v] >= 0 else -1
            if kinds[v][0] == "A":
                nb = tuple((j, colors[u]) if u >= 0 else (-1, -1) for u, j in ports[v])
            else:
                nb = tuple(sorted(colors[c] for c in children[v]))
            sigs.append((colors[v], pc, nb))
        new = _index(sigs)
        if len(set(new)) == len(set(colors)):
            break
        colors = new
    left = Counter(colors[:off])
    right = Counter(colors[off:])
    for c in sorted(set(left) | set(right)):
        if left[c] != right[c]:
            v = colors.index(c)
            kind = kinds[v]
            if kind[0] == "A":
                what = f"atom {kind[1]}/{kind[2]}"
            elif kind[0] == "M":
                what = "membrane"
            else:
                what = "global membrane"
            return f"refinement class {c} ({what}): {left[c]} vs {right[c]} elements"
    return "refinement classes agree; the processes differ only under individualization"
