"""Core data model: processes, templates, rules and fresh names.

Processes are ground hierarchical port graphs.  Atoms carry an ordered
tuple of link names; a link name occurring twice is a local link, once a
free link.  Templates extend processes with process contexts and
quantified sub-templates.  All values are immutable once built; identity
of atoms and membranes is carried by an integer ``id`` rather than by
textual names.
"""
from __future__ import annotations

import itertools
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

INF = math.inf

# Reserved suffix separator for machine-generated names; the parser
# rejects it in user text.
SEP = "#"

GLOBAL_CONTEXT = "γ"
CONNECTOR = "="

_ids = itertools.count(1)


def next_id() -> int:
    return next(_ids)


class QLMNtalError(Exception):
    """Base class for all diagnostics raised by the toolkit."""


class LinkConditionError(QLMNtalError):
    def __init__(self, report: "LinkReport"):
        super().__init__(str(report))
        self.report = report


class ContextError(QLMNtalError):
    """A process context is misplaced or unbalanced between head and body."""


class _EmptyLabel:
    """The distinguished empty quantifier label."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EMPTY_LABEL"

    def __str__(self) -> str:
        return ""

    def __reduce__(self):
        return (_EmptyLabel, ())


EMPTY_LABEL = _EmptyLabel()

Label = Union[str, _EmptyLabel]


# --------------------------------------------------------------------------
# processes


@dataclass(frozen=True, eq=False)
class Atom:
    name: str
    links: tuple[str, ...] = ()
    id: int = field(default_factory=next_id)

    @property
    def arity(self) -> int:
        return len(self.links)

    def relinked(self, links: Iterable[str]) -> "Atom":
        return Atom(self.name, tuple(links), self.id)

    def __repr__(self) -> str:
        if not self.links:
            return f"Atom({self.name})"
        return f"Atom({self.name}({','.join(self.links)}))"


@dataclass(frozen=True, eq=False)
class Membrane:
    content: "Process"
    id: int = field(default_factory=next_id)


@dataclass(frozen=True, eq=False)
class Process:
    """Content of one membrane level; the root is the global membrane."""

    atoms: tuple[Atom, ...] = ()
    membranes: tuple[Membrane, ...] = ()

    def is_null(self) -> bool:
        return not self.atoms and not self.membranes

    def walk_atoms(self) -> Iterator[Atom]:
        yield from self.atoms
        for m in self.membranes:
            yield from m.content.walk_atoms()

    def walk_membranes(self) -> Iterator[Membrane]:
        for m in self.membranes:
            yield m
            yield from m.content.walk_membranes()

    def size(self) -> int:
        """Number of atoms and membranes at every depth."""
        return len(self.atoms) + sum(1 + m.content.size() for m in self.membranes)

    def link_counts(self) -> Counter:
        return Counter(x for a in self.walk_atoms() for x in a.links)

    def free_links(self) -> set[str]:
        return {x for x, n in self.link_counts().items() if n == 1}

    def __repr__(self) -> str:
        from .syntax import print_process

        return f"Process({print_process(self, canonical=False)})"


# --------------------------------------------------------------------------
# templates


@dataclass(frozen=True)
class Quantifier:
    label: Label
    kind: str  # "card" or "neg"
    lo: float = 0
    hi: float = INF

    @property
    def is_card(self) -> bool:
        return self.kind == "card"

    @property
    def is_neg(self) -> bool:
        return self.kind == "neg"

    @property
    def key(self) -> tuple:
        """Identity used to group jointly quantified templates."""
        return (self.label, self.kind, self.lo, self.hi)

    def decremented(self, k: int) -> "Quantifier":
        return Quantifier(self.label, self.kind, self.lo - k, self.hi - k)

    def __str__(self) -> str:
        from .syntax import format_quantifier

        return format_quantifier(self)


@dataclass(frozen=True, eq=False)
class TMembrane:
    body: "Template"
    id: int = field(default_factory=next_id)


@dataclass(frozen=True, eq=False)
class Quantified:
    quantifier: Quantifier
    body: "Template"


@dataclass(frozen=True, eq=False)
class Template:
    atoms: tuple[Atom, ...] = ()
    membranes: tuple[TMembrane, ...] = ()
    contexts: tuple[str, ...] = ()
    quantified: tuple[Quantified, ...] = ()

    def is_null(self) -> bool:
        return not (self.atoms or self.membranes or self.contexts or self.quantified)

    def __add__(self, other: "Template") -> "Template":
        return Template(
            self.atoms + other.atoms,
            self.membranes + other.membranes,
            self.contexts + other.contexts,
            self.quantified + other.quantified,
        )

    def is_ground(self) -> bool:
        return not self.contexts and not self.quantified and all(
            m.body.is_ground() for m in self.membranes
        )

    def __repr__(self) -> str:
        from .syntax import print_template

        return f"Template({print_template(self)})"


NULL = Template()


@dataclass(frozen=True, eq=False)
class Rule:
    head: Template
    body: Template
    source_text: str = ""

    def __repr__(self) -> str:
        from .syntax import print_rule

        return f"Rule({print_rule(self)})"


def process_to_template(p: Process) -> Template:
    return Template(
        p.atoms, tuple(TMembrane(process_to_template(m.content), m.id) for m in p.membranes)
    )


def template_to_process(t: Template) -> Process:
    if t.contexts or t.quantified:
        raise QLMNtalError("a process admits neither process contexts nor quantifiers")
    return Process(t.atoms, tuple(Membrane(template_to_process(m.body), m.id) for m in t.membranes))


# --------------------------------------------------------------------------
# occurrences


@dataclass(frozen=True)
class Occurrence:
    """Where one link name occurs: atom, port, and quantifier path."""

    link: str
    atom: str
    port: int
    side: str = ""
    path: tuple[Quantifier, ...] = ()

    @property
    def under_neg(self) -> bool:
        return any(q.is_neg for q in self.path)

    def __str__(self) -> str:
        where = f"{self.side} " if self.side else ""
        return f"{where}{self.atom}#{self.port}"


def template_link_occurrences(
    t: Template, side: str = "", path: tuple[Quantifier, ...] = ()
) -> Iterator[Occurrence]:
    for a in t.atoms:
        for i, x in enumerate(a.links):
            yield Occurrence(x, a.name, i, side, path)
    for m in t.membranes:
        yield from template_link_occurrences(m.body, side, path)
    for q in t.quantified:
        yield from template_link_occurrences(q.body, side, path + (q.quantifier,))


def template_context_occurrences(
    t: Template, path: tuple[Quantifier, ...] = ()
) -> Iterator[tuple[str, tuple[Quantifier, ...]]]:
    for c in t.contexts:
        yield c, path
    for m in t.membranes:
        yield from template_context_occurrences(m.body, path)
    for q in t.quantified:
        yield from template_context_occurrences(q.body, path + (q.quantifier,))


def template_labels(t: Template) -> set:
    out = set()
    for q in t.quantified:
        out.add(q.quantifier.label)
        out |= template_labels(q.body)
    for m in t.membranes:
        out |= template_labels(m.body)
    return out


def template_names(t: Template) -> set[str]:
    """Every link, context and (non-empty) label name in ``t``."""
    names = {o.link for o in template_link_occurrences(t)}
    names |= {c for c, _ in template_context_occurrences(t)}
    names |= {lab for lab in template_labels(t) if isinstance(lab, str)}
    return names


# --------------------------------------------------------------------------
# link condition


@dataclass
class LinkReport:
    violations: dict[str, list[Occurrence]] = field(default_factory=dict)
    expected: str = "at most 2"

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        parts = []
        for x, occs in sorted(self.violations.items()):
            where = ", ".join(str(o) for o in occs)
            parts.append(f"link {x} occurs {len(occs)} times ({where}); expected {self.expected}")
        return "Link Condition violated: " + "; ".join(parts)


def validate_link_condition(p: Process | Template | Rule) -> LinkReport:
    """Check the Link Condition.

    Processes (and process-like templates) allow each link name at most
    twice.  Rules require exactly two occurrences of every link that
    occurs outside a non-existence quantifier; links under non-existence
    quantification are exempt.  A link occurring twice in the head and
    twice in the body is accepted and read as two unrelated local links.
    """
    if isinstance(p, Rule):
        occs = list(template_link_occurrences(p.head, "head")) + list(
            template_link_occurrences(p.body, "body")
        )
        by_name: dict[str, list[Occurrence]] = defaultdict(list)
        for o in occs:
            by_name[o.link].append(o)
        def ok(os_: list[Occurrence]) -> bool:
            if all(o.under_neg for o in os_) or len(os_) == 2:
                return True
            # twice on each side: a head-local and an unrelated body-local link
            sides = Counter(o.side for o in os_ if not o.under_neg)
            return sides["head"] == 2 and sides["body"] == 2

        bad = {x: os_ for x, os_ in by_name.items() if not ok(os_)}
        return LinkReport(bad, "exactly 2, or 2 in the head and 2 in the body")
    if isinstance(p, Process):
        p = process_to_template(p)
    by_name = defaultdict(list)
    for o in template_link_occurrences(p):
        by_name[o.link].append(o)
    return LinkReport({x: os_ for x, os_ in by_name.items() if len(os_) > 2})


def glue(p: Process, q: Process) -> Process:
    """Parallel composition; links shared once by each side become local."""
    out = Process(p.atoms + q.atoms, p.membranes + q.membranes)
    report = validate_link_condition(out)
    if not report.ok:
        raise LinkConditionError(report)
    return out


# --------------------------------------------------------------------------
# fresh names

_suffixed = re.compile(r"^(.*?)#(\d+)$")


class FreshNamer:
    """Fresh-name source.  Names look like ``base#n`` with one shared counter.

    Not thread-safe; give each thread its own instance and ``reserve`` the
    names of whatever it will be combined with.
    """

    def __init__(self, start: int = 0):
        self._n = start

    def reserve(self, names: Iterable[str]) -> None:
        """Make sure no future name collides with any of ``names``."""
        for name in names:
            for part in name.split(SEP)[1:]:
                if part.isdigit() and int(part) > self._n:
                    self._n = int(part)

    def fresh(self, base: str = "X") -> str:
        m = _suffixed.match(base)
        if m:
            base = m.group(1)
        self._n += 1
        return f"{base}{SEP}{self._n}"

    def fresh_label(self, label: Label) -> str:
        return self.fresh(label if isinstance(label, str) and label else "L")


def rename_template(
    t: Template,
    links: dict[str, str] | None = None,
    contexts: dict[str, str] | None = None,
    labels: dict | None = None,
    new_ids: bool = True,
) -> Template:
    """Apply name maps; names missing from a map are kept."""
    links = links or {}
    contexts = contexts or {}
    labels = labels or {}

    def go(t: Template) -> Template:
        atoms = tuple(
            Atom(a.name, tuple(links.get(x, x) for x in a.links), next_id() if new_ids else a.id)
            for a in t.atoms
        )
        mems = tuple(TMembrane(go(m.body), next_id() if new_ids else m.id) for m in t.membranes)
        ctxs = tuple(contexts.get(c, c) for c in t.contexts)
        qs = []
        for q in t.quantified:
            qq = q.quantifier
            if qq.label in labels:
                qq = Quantifier(labels[qq.label], qq.kind, qq.lo, qq.hi)
            qs.append(Quantified(qq, go(q.body)))
        return Template(atoms, mems, ctxs, tuple(qs))

    return go(t)


def fresh_renaming(names_t: Template | Iterable[Template], ns: FreshNamer):
    """Fresh, injective maps for every link, context and label in the templates."""
    ts = [names_t] if isinstance(names_t, Template) else list(names_t)
    links: dict[str, str] = {}
    ctxs: dict[str, str] = {}
    labels: dict = {}
    for t in ts:
        for o in template_link_occurrences(t):
            if o.link not in links:
                links[o.link] = ns.fresh(o.link)
        for c, _ in template_context_occurrences(t):
            if c not in ctxs:
                ctxs[c] = ns.fresh(c)
        for lab in sorted(template_labels(t), key=str):
            if lab not in labels:
                labels[lab] = ns.fresh_label(lab)
    return links, ctxs, labels


def fresh_rename(t: Template, ns: FreshNamer) -> Template:
    """Copy of ``t`` with every link, context and label replaced by a fresh name."""
    links, ctxs, labels = fresh_renaming(t, ns)
    return rename_template(t, links, ctxs, labels)
