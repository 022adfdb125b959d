import random

import pytest

from oracles import brute_match_count, random_process
from qlmntal.congruence import canonical_key, congruent
from qlmntal.graph import GLOBAL_CONTEXT, Atom, ContextError, FreshNamer, Process, Template, TMembrane
from qlmntal.matcher import Substitution, count_matches, enumerate_matches, instantiate
from qlmntal.syntax import parse_process, parse_template, print_process


def T(text):
    return parse_template(text)


def P(text):
    return parse_process(text)


def test_single_atom_with_free_interface():
    target = P("a(X),b(X),b(Y),c(Y)")
    ms = list(enumerate_matches(T("a(X)"), target))
    assert len(ms) == 1
    gamma = ms[0].global_context
    assert congruent(gamma, P("b(X),b(Y),c(Y)"))
    assert ms[0].link_binding == {"X": "X"}


def test_wildcard_membrane():
    (m,) = enumerate_matches(T("{$p}"), P("{a,b}"))
    assert congruent(m.context_bindings["p"], P("a,b"))
    assert m.global_context.is_null()


def test_nullary_atom_embeddings():
    target = P("a,a,a,a")
    ms = list(enumerate_matches(T("a"), target))
    assert len(ms) == 4
    results = {canonical_key(instantiate(T("a"), m)) for m in ms}
    assert len(results) == 1


def test_local_link_must_map_to_a_local_link():
    assert count_matches(T("a(X),b(X)"), P("a(Y),b(Z)")) == 0
    assert count_matches(T("a(X),b(X)"), P("a(Y),b(Y)")) == 1
    assert count_matches(T("a(X,X)"), P("a(Y,Y)")) == 1
    assert count_matches(T("a(X,X)"), P("a(Y,Z),b(Y,Z)")) == 0


def test_once_links_match_any_port():
    assert count_matches(T("a(X),b(Y)"), P("a(Z),b(Z)")) == 1


def test_membrane_without_context_must_be_exact():
    assert count_matches(T("{a}"), P("{a,b}")) == 0
    assert count_matches(T("{a,$p}"), P("{a,b}")) == 1
    assert count_matches(T("{a}"), P("{a},{a}")) == 2


def test_global_context_is_top_level_only():
    (m,) = enumerate_matches(T("{a,$p}"), P("{a,b},c"))
    assert set(m.context_bindings) == {"p", GLOBAL_CONTEXT}
    assert congruent(m.context_bindings["p"], P("b"))
    assert congruent(m.global_context, P("c"))


def test_top_level_context_is_rejected():
    with pytest.raises(ContextError):
        list(enumerate_matches(Template(contexts=("p",)), P("a")))


def test_embeddings_are_injective_and_respect_ports():
    target = P("a(X,Y),a(Y,Z),a(Z,X)")
    pattern = T("a(A,B),a(B,C)")
    ms = list(enumerate_matches(pattern, target))
    assert len(ms) == 3
    tatoms = {a.id: a for a in target.walk_atoms()}
    for m in ms:
        assert len(set(m.atom_embedding.values())) == 2
        for pa in pattern.atoms:
            assert tatoms[m.atom_embedding[pa.id]].name == pa.name


def test_chains_keep_one_representative_per_permutation():
    pattern = T("a,a")
    ids = [a.id for a in pattern.atoms]
    target = P("a,a,a")
    assert count_matches(pattern, target) == 6
    assert sum(1 for _ in enumerate_matches(pattern, target, [ids])) == 3


def test_instantiate_keeps_the_old_neighbour():
    target = P("a(X),b(X),b(Y),c(Y)")
    (m,) = enumerate_matches(T("a(X)"), target)
    q = instantiate(T("c(X)"), m)
    assert congruent(q, P("c(X),b(X),b(Y),c(Y)"))


def test_instantiate_context_only():
    m = Substitution({"p": P("a(X),b(X)")})
    assert congruent(instantiate(Template(contexts=("p",)), m, with_global=False), P("a(X),b(X)"))


def test_instantiate_membrane_example():
    m = Substitution({"p": P("a,b"), GLOBAL_CONTEXT: Process()})
    assert print_process(instantiate(T("{$p},ok"), m)) == "ok,{a,b}"


def test_instantiate_unbound_context():
    with pytest.raises(ContextError):
        instantiate(T("{$q}"), Substitution())


def test_body_local_links_are_fresh():
    m = Substitution({GLOBAL_CONTEXT: P("c(L)")}, link_binding={})
    q = instantiate(T("a(L),b(L)"), m, FreshNamer())
    assert congruent(q, P("a(M),b(M),c(L)"))


def _derived_pattern(rng, target):
    """Copy a random part of the target, turning cut links into free ones."""
    picked = [a for a in target.atoms if rng.random() < 0.5]
    mems = []
    for m in target.membranes:
        if rng.random() < 0.5:
            inner = [a for a in m.content.atoms if rng.random() < 0.6]
            exact = len(inner) == len(m.content.atoms) and not m.content.membranes and rng.random() < 0.5
            mems.append((inner, exact))
    every = picked + [a for inner, _ in mems for a in inner]
    counts = {}
    for a in every:
        for x in a.links:
            counts[x] = counts.get(x, 0) + 1
    fresh = iter(range(1000))

    def relink(a):
        return Atom(a.name, tuple(x if counts[x] == 2 else f"F{next(fresh)}" for x in a.links))

    return Template(
        tuple(relink(a) for a in picked),
        tuple(
            TMembrane(Template(tuple(relink(a) for a in inner), (), () if exact else (f"p{i}",)))
            for i, (inner, exact) in enumerate(mems)
        ),
    )


def _random_pattern(rng, target):
    if rng.random() < 0.7:
        return _derived_pattern(rng, target)
    names = [a.name for a in target.walk_atoms()] or ["a"]
    atoms = []
    for _ in range(rng.randint(1, 3)):
        ar = rng.randint(0, 2)
        atoms.append(Atom(rng.choice(names), tuple(rng.choice("XYZW") for _ in range(ar))))
    counts = {}
    for a in atoms:
        for x in a.links:
            counts[x] = counts.get(x, 0) + 1
    atoms = [a for a in atoms if all(counts[x] <= 2 for x in a.links)]
    return Template(tuple(atoms))


def test_match_count_agrees_with_brute_force():
    rng = random.Random(42)
    checked = nonzero = 0
    while checked < 100:
        target = random_process(rng, 8, names="ab", max_arity=2, max_depth=1)
        if any(m.content.membranes for m in target.membranes):
            continue
        pattern = _random_pattern(rng, target)
        n = count_matches(pattern, target)
        assert n == brute_match_count(pattern, target)
        checked += 1
        nonzero += n > 0
    assert nonzero > 50


def test_soundness_replay():
    rng = random.Random(7)
    for _ in range(100):
        target = random_process(rng, 7, names="ab", max_arity=2, max_depth=1)
        pattern = _random_pattern(rng, target)
        for m in enumerate_matches(pattern, target):
            assert congruent(instantiate(pattern, m), target)
