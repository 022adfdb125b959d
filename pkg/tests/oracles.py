"""Independent reference implementations and generators used by the tests.

Nothing here calls the canonical labeling, the matcher or the structural
functions of the package; each oracle works by brute force or by direct
structural recursion over a plain tuple encoding.
"""
from __future__ import annotations

import itertools
import random
from collections import Counter, defaultdict

from qlmntal.graph import EMPTY_LABEL, INF, Atom, Membrane, Process, Quantified, Quantifier, Template, TMembrane

# --------------------------------------------------------------------------
# random processes


def random_process(rng: random.Random, max_atoms=6, names="abc", max_arity=3, max_depth=2, free_prob=0.2) -> Process:
    """A random process; ports are paired at random, a few left free."""
    n = rng.randint(0, max_atoms)
    paths = [()]
    for _ in range(rng.randint(0, 3)):
        parent = rng.choice(paths)
        if len(parent) < max_depth:
            paths.append(parent + (len(paths),))
    atoms = []
    for _ in range(n):
        atoms.append([rng.choice(names), rng.randint(0, max_arity), rng.choice(paths)])
    ports = [(i, k) for i, (_, ar, _) in enumerate(atoms) for k in range(ar)]
    rng.shuffle(ports)
    links = {}
    counter = itertools.count()
    while ports:
        p = ports.pop()
        if ports and rng.random() > free_prob:
            q = ports.pop()
            name = f"L{next(counter)}"
            links[p] = links[q] = name
        else:
            links[p] = f"F{next(counter)}"
    built = defaultdict(list)
    for i, (name, ar, path) in enumerate(atoms):
        built[path].append(Atom(name, tuple(links[(i, k)] for k in range(ar))))

    def level(path):
        kids = [p for p in paths if len(p) == len(path) + 1 and p[: len(path)] == path]
        return Process(tuple(built[path]), tuple(Membrane(level(k)) for k in kids))

    return level(())


def rename_locals(p: Process, rng: random.Random) -> Process:
    counts = p.link_counts()
    local = [x for x, n in counts.items() if n == 2]
    new = [f"R{i}" for i in range(len(local))]
    rng.shuffle(new)
    m = dict(zip(local, new))

    def go(q: Process) -> Process:
        atoms = list(Atom(a.name, tuple(m.get(x, x) for x in a.links)) for a in q.atoms)
        mems = [Membrane(go(mm.content)) for mm in q.membranes]
        rng.shuffle(atoms)
        rng.shuffle(mems)
        return Process(tuple(atoms), tuple(mems))

    return go(p)


# --------------------------------------------------------------------------
# exhaustive small universe


def _partial_matchings(ports):
    if not ports:
        yield []
        return
    p, rest = ports[0], ports[1:]
    for m in _partial_matchings(rest):
        yield [(p, None)] + m
    for i, q in enumerate(rest):
        for m in _partial_matchings(rest[:i] + rest[i + 1 :]):
            yield [(p, q)] + m


def small_universe():
    """Every process with at most 4 atoms named a/b and at most one membrane level.

    Arity ranges over 0..2 with at most one membrane, or 0..1 with two
    membranes.  Free ports get distinct names in port order.
    """
    for arities, max_mems in (((0, 1, 2), 1), ((0, 1), 2)):
        kinds = [(n, a) for n in "ab" for a in arities]
        for n in range(5):
            for mems in range(max_mems + 1):
                if max_mems == 2 and mems < 2:
                    continue  # already produced by the first family
                slots = [(k, loc) for k in kinds for loc in range(mems + 1)]
                for combo in itertools.combinations_with_replacement(slots, n):
                    ports = [(i, j) for i, ((_, ar), _) in enumerate(combo) for j in range(ar)]
                    for m in _partial_matchings(ports):
                        names = {}
                        free = itertools.count()
                        for idx, (p, q) in enumerate(m):
                            if q is None:
                                names[p] = f"X{next(free)}"
                            else:
                                names[p] = names[q] = f"L{idx}"
                        levels = defaultdict(list)
                        for i, ((name, ar), loc) in enumerate(combo):
                            levels[loc].append(Atom(name, tuple(names[(i, j)] for j in range(ar))))
                        yield Process(
                            tuple(levels[0]),
                            tuple(Membrane(Process(tuple(levels[k]))) for k in range(1, mems + 1)),
                        )


# --------------------------------------------------------------------------
# brute-force isomorphism


def _flatten(p: Process):
    """Atoms with their level path and the membrane tree as nested lists."""
    atoms = []

    def go(q, path):
        for a in q.atoms:
            atoms.append((a, path))
        for i, m in enumerate(q.membranes):
            go(m.content, path + (i,))

    go(p, ())
    return atoms


def _tree(q: Process):
    return [_tree(m.content) for m in q.membranes]


def _tree_maps(t1, t2, prefix1=(), prefix2=()):
    """All bijections between two membrane trees, as dicts path -> path."""
    if len(t1) != len(t2):
        return
    for perm in itertools.permutations(range(len(t2))):
        partial = [{prefix1: prefix2}]
        ok = True
        for i, j in enumerate(perm):
            subs = list(_tree_maps(t1[i], t2[j], prefix1 + (i,), prefix2 + (j,)))
            if not subs:
                ok = False
                break
            partial = [{**a, **b} for a in partial for b in subs]
        if ok:
            yield from partial


def _partners(atoms):
    ends = defaultdict(list)
    for i, (a, _) in enumerate(atoms):
        for k, x in enumerate(a.links):
            ends[x].append((i, k))
    rel = {}
    for i, (a, _) in enumerate(atoms):
        for k, x in enumerate(a.links):
            e = ends[x]
            if len(e) == 1:
                rel[(i, k)] = ("free", x)
            else:
                rel[(i, k)] = e[1] if e[0] == (i, k) else e[0]
    return rel


def brute_isomorphic(p: Process, q: Process) -> bool:
    """Decide p ≅ q by trying every membrane and atom bijection."""
    if any(a.name == "=" for a in p.walk_atoms()):
        raise ValueError("connectors are not supported by this oracle")
    ap, aq = _flatten(p), _flatten(q)
    if len(ap) != len(aq):
        return False
    if Counter((a.name, a.arity) for a, _ in ap) != Counter((a.name, a.arity) for a, _ in aq):
        return False
    rp, rq = _partners(ap), _partners(aq)
    tp, tq = _tree(p), _tree(q)
    for mp in _tree_maps(tp, tq):
        groups = defaultdict(list)
        targets = defaultdict(list)
        for i, (a, path) in enumerate(ap):
            groups[(a.name, a.arity, mp.get(path))].append(i)
        for j, (b, path) in enumerate(aq):
            targets[(b.name, b.arity, path)].append(j)
        if {k: len(v) for k, v in groups.items()} != {k: len(v) for k, v in targets.items()}:
            continue
        keys = sorted(groups, key=repr)
        choices = [list(itertools.permutations(targets[k])) for k in keys]
        for pick in itertools.product(*choices):
            f = {}
            for k, perm in zip(keys, pick):
                f.update(zip(groups[k], perm))
            good = True
            for (i, k), r in rp.items():
                want = r if r[0] == "free" else (f[r[0]], r[1])
                if rq[(f[i], k)] != want:
                    good = False
                    break
            if good:
                return True
    return False


# --------------------------------------------------------------------------
# brute-force match counting


def brute_match_count(pattern: Template, target: Process) -> int:
    """Count injective, name- and level-respecting assignments that satisfy the links.

    Patterns are quantifier-free with membranes one level deep; a pattern
    membrane holding a context may leave elements unmatched, one without a
    context must be covered exactly.
    """
    tmems = list(target.membranes)
    count = 0
    for mem_pick in itertools.permutations(range(len(tmems)), len(pattern.membranes)):
        ok = True
        for pm, ti in zip(pattern.membranes, mem_pick):
            content = tmems[ti].content
            if pm.body.membranes:
                raise ValueError("oracle handles one membrane level")
            if not pm.body.contexts and (len(pm.body.atoms) != len(content.atoms) or content.membranes):
                ok = False
        if not ok:
            continue
        # (pattern atom, target candidates) per level
        slots = [(a, list(target.atoms)) for a in pattern.atoms]
        for pm, ti in zip(pattern.membranes, mem_pick):
            slots += [(a, list(tmems[ti].content.atoms)) for a in pm.body.atoms]
        pends = defaultdict(list)
        for idx, (a, _) in enumerate(slots):
            for k, x in enumerate(a.links):
                pends[x].append((idx, k))
        tends = defaultdict(list)
        for b in target.walk_atoms():
            for k, x in enumerate(b.links):
                tends[x].append((b.id, k))
        for pick in itertools.product(*(c for _, c in slots)):
            if len({b.id for b in pick}) != len(pick):
                continue
            if any(a.name != b.name or a.arity != b.arity for (a, _), b in zip(slots, pick)):
                continue
            good = True
            for x, e in pends.items():
                if len(e) == 2:
                    (i, k), (j, l) = e
                    y = pick[i].links[k]
                    if pick[j].links[l] != y or len(tends[y]) != 2 or (pick[i].id, k) == (pick[j].id, l):
                        good = False
                        break
            if good:
                count += 1
    return count


# --------------------------------------------------------------------------
# tuple-encoded templates and the structural functions over them

# ("atom", name, links) | ("mem", children) | ("ctx", name) | ("q", kind, label, lo, hi, children)


def random_ast(rng: random.Random, depth=0, max_items=4) -> list:
    items = []
    for _ in range(rng.randint(0, max_items)):
        r = rng.random()
        if r < 0.4:
            items.append(("atom", rng.choice("abc"), tuple(rng.choice("XYZ") for _ in range(rng.randint(0, 2)))))
        elif r < 0.6 and depth < 3:
            items.append(("mem", random_ast(rng, depth + 1, 3)))
        elif r < 0.75:
            items.append(("ctx", rng.choice("pqr") + str(depth)))
        elif depth < 3:
            kind = rng.choice(["card", "neg"])
            lo = rng.randint(0, 2)
            hi = rng.choice([lo, lo + 1, INF])
            items.append(("q", kind, rng.choice(["L", "M", ""]), lo, hi, random_ast(rng, depth + 1, 3)))
    return items


def ast_to_template(items) -> Template:
    atoms, mems, ctxs, qs = [], [], [], []
    for it in items:
        if it[0] == "atom":
            atoms.append(Atom(it[1], it[2]))
        elif it[0] == "mem":
            mems.append(TMembrane(ast_to_template(it[1])))
        elif it[0] == "ctx":
            ctxs.append(it[1])
        else:
            _, kind, label, lo, hi, body = it
            q = Quantifier(label or EMPTY_LABEL, kind, lo if kind == "card" else 0, hi if kind == "card" else 0)
            qs.append(Quantified(q, ast_to_template(body)))
    return Template(tuple(atoms), tuple(mems), tuple(ctxs), tuple(qs))


def template_to_ast(t: Template) -> list:
    items = [("atom", a.name, tuple(a.links)) for a in t.atoms]
    items += [("mem", template_to_ast(m.body)) for m in t.membranes]
    items += [("ctx", c) for c in t.contexts]
    for q in t.quantified:
        qq = q.quantifier
        label = "" if qq.label is EMPTY_LABEL else qq.label
        items.append(("q", qq.kind, label, qq.lo, qq.hi, template_to_ast(q.body)))
    return items


def signature(items, ctx_alias=None):
    """Order-independent form of a tuple template; ``ctx_alias`` maps context names."""
    out = []
    for it in items:
        if it[0] == "mem":
            out.append(("mem", signature(it[1], ctx_alias)))
        elif it[0] == "q":
            out.append(it[:5] + (signature(it[5], ctx_alias),))
        elif it[0] == "ctx" and ctx_alias is not None:
            out.append(("ctx", ctx_alias(it[1])))
        else:
            out.append(it)
    return tuple(sorted(out, key=repr))


def oracle_simp(items):
    out = []
    for it in items:
        if it[0] in ("atom", "ctx"):
            out.append(it)
        elif it[0] == "mem":
            out.append(("mem", oracle_simp(it[1])))
    return out


def oracle_cxt(items):
    out = []
    for it in items:
        if it[0] == "mem":
            out.append(("mem", oracle_cxt(it[1])))
        elif it[0] == "ctx":
            out += [it, ("atom", "id#" + it[1], ())]
    return out


def oracle_neg(label, items):
    """Contexts come out under the placeholder name ``*`` (their fresh names are unknown)."""
    out = []
    for it in items:
        if it[0] == "mem":
            out.append(("mem", oracle_neg(label, it[1])))
        elif it[0] == "ctx":
            out += [("ctx", "*"), ("atom", "id#" + it[1], ())]
        elif it[0] == "q" and it[1] == "neg" and it[2] == label:
            out += list(it[5])
    return out


# --------------------------------------------------------------------------
# Petri nets


def random_net(rng: random.Random, places=(3, 6), transitions=(1, 4), tokens=3):
    """Places and transitions with at least one input and one output arc each.

    No place is both an input and an output of the same transition, and
    there are no parallel arcs.
    """
    n_p = rng.randint(*places)
    n_t = rng.randint(*transitions)
    marking = [rng.randint(0, tokens) for _ in range(n_p)]
    arcs = []
    for _ in range(n_t):
        k_in = rng.randint(1, min(2, n_p - 1))
        ins = rng.sample(range(n_p), k_in)
        rest = [p for p in range(n_p) if p not in ins]
        outs = rng.sample(rest, rng.randint(1, min(2, len(rest))))
        arcs.append((ins, outs))
    return marking, arcs


def net_text(marking, arcs) -> str:
    place_items = [[] for _ in marking]
    trans_items = []
    link = itertools.count()
    for ins, outs in arcs:
        items = []
        for p in ins:
            x = f"A{next(link)}"
            place_items[p].append(f"s({x})")
            items.append(f"t({x})")
        for p in outs:
            x = f"A{next(link)}"
            place_items[p].append(f"t({x})")
            items.append(f"s({x})")
        trans_items.append(items)
    for p, n in enumerate(marking):
        place_items[p] += ["token"] * n
    mems = ["{" + ",".join(it) + "}" for it in place_items + trans_items]
    return ",".join(mems) + "."


def fire_all(marking, arcs):
    """Markings after each enabled transition fires, with the fired index."""
    out = []
    for i, (ins, outs) in enumerate(arcs):
        if all(marking[p] > 0 for p in ins):
            m = list(marking)
            for p in ins:
                m[p] -= 1
            for p in outs:
                m[p] += 1
            out.append((i, m))
    return out


def coarse_invariant(p: Process):
    """An isomorphism invariant cheap enough to bucket the universe."""

    def level(q):
        return (
            tuple(sorted((a.name, a.arity) for a in q.atoms)),
            tuple(sorted(level(m.content) for m in q.membranes)),
        )

    atoms = _flatten(p)
    rel = _partners(atoms)
    local = []
    for i, (a, path) in enumerate(atoms):
        ports = []
        for k in range(a.arity):
            r = rel[(i, k)]
            ports.append(r if r[0] == "free" else (atoms[r[0]][0].name, r[1], len(atoms[r[0]][1])))
        local.append((a.name, len(path), tuple(ports)))
    return level(p), tuple(sorted(local))


def iso_classes(procs):
    """Partition ``procs`` (indices) into brute-force isomorphism classes."""
    classes: list[list[int]] = []
    buckets = defaultdict(list)
    for i, p in enumerate(procs):
        buckets[coarse_invariant(p)].append(i)
    for members in buckets.values():
        reps: list[list[int]] = []
        for i in members:
            for cls in reps:
                if brute_isomorphic(procs[cls[0]], procs[i]):
                    cls.append(i)
                    break
            else:
                reps.append([i])
        classes += reps
    return classes
