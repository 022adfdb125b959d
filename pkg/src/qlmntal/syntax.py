"""Reading and writing QLMNtal text, and desugaring of quantifier shorthands.

A program is a sequence of ``.``-terminated statements.  A statement
containing ``:-`` is a rule; any other statement contributes to the
initial process.  ``//`` starts a comment that runs to the end of the
line.
"""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field

from .graph import (
    CONNECTOR,
    EMPTY_LABEL,
    INF,
    SEP,
    Atom,
    ContextError,
    FreshNamer,
    LinkConditionError,
    Process,
    QLMNtalError,
    Quantified,
    Quantifier,
    Rule,
    Template,
    TMembrane,
    process_to_template,
    rename_template,
    template_context_occurrences,
    template_link_occurrences,
    template_names,
    template_to_process,
    validate_link_condition,
)


class ParseError(QLMNtalError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.line = line
        self.col = col


class LabelWarning(UserWarning):
    """One label is used with incompatible quantifier ranges."""


# Universal shorthands survive parsing as their own quantifier kind and are
# removed by desugar_rule.
ALL = "all"


# --------------------------------------------------------------------------
# tokens

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|//[^\n]*|%[^\n]*|/\*[\s\S]*?\*/)
  | (?P<neck>:-)
  | (?P<int>\d+)
  | (?P<upper>[A-Z][A-Za-z0-9_]*(?:\#[A-Za-z0-9_]+)*)
  | (?P<lower>[a-z][A-Za-z0-9_]*(?:\#[A-Za-z0-9_γ]+)*)
  | (?P<ctx>\$(?:[A-Za-z0-9_]+|γ)(?:\#[A-Za-z0-9_γ]+)*)
  | (?P<punct>[.,(){}<>=?^*+\-])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, allow_reserved: bool = False) -> list[Token]:
    out = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok = m.group()
        col = pos - line_start + 1
        if kind != "ws":
            if not allow_reserved and (SEP in tok or "γ" in tok):
                raise ParseError(f"reserved character in name {tok!r}", line, col)
            out.append(Token(kind if kind != "punct" else tok, tok, line, col))
        nl = tok.count("\n")
        if nl:
            line += nl
            line_start = pos + tok.rindex("\n") + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


# --------------------------------------------------------------------------
# parser


@dataclass
class SourceProgram:
    rules: list[Rule] = field(default_factory=list)
    init: Process = field(default_factory=Process)
    spans: dict[int, tuple[int, int]] = field(default_factory=dict)  # rule index -> (line, col)


class _Parser:
    def __init__(self, text: str, ns: FreshNamer, allow_reserved: bool):
        self.text = text
        self.toks = tokenize(text, allow_reserved)
        self.i = 0
        self.ns = ns

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind: str) -> Token:
        if self.tok.kind != kind:
            self.fail(f"expected {kind!r}, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def fail(self, msg: str):
        raise ParseError(msg, self.tok.line, self.tok.col)

    # statements ----------------------------------------------------------

    def statements(self):
        while self.tok.kind != "eof":
            start = self.tok
            head = self.sequence(("neck", "."))
            if self.tok.kind == "neck":
                self.advance()
                body = self.sequence((".",))
                end = self.expect(".")
                src = self._slice(start, end)
                yield ("rule", Rule(head, body, src), start)
            else:
                self.expect(".")
                yield ("proc", head, start)

    def _slice(self, start: Token, end: Token) -> str:
        lines = self.text.splitlines(keepends=True)
        offs = [0]
        for ln in lines:
            offs.append(offs[-1] + len(ln))
        a = offs[start.line - 1] + start.col - 1
        b = offs[end.line - 1] + end.col
        return " ".join(self.text[a:b].split())

    # templates -----------------------------------------------------------

    def sequence(self, stops: tuple[str, ...]) -> Template:
        t = Template()
        if self.tok.kind in stops or self.tok.kind in (")", "}"):
            return t
        t = t + self.element()
        while self.tok.kind == ",":
            self.advance()
            t = t + self.element()
        return t

    def element(self) -> Template:
        tok = self.tok
        if tok.kind == "<" or (tok.kind == "upper" and self.peek().kind == "<"):
            q = self.quantifier()
            return Template(quantified=(Quantified(q, self.element()),))
        if tok.kind == "(":
            self.advance()
            inner = self.sequence((")",))
            self.expect(")")
            return inner
        if tok.kind == "{":
            self.advance()
            inner = self.sequence(("}",))
            self.expect("}")
            return Template(membranes=(TMembrane(inner),))
        if tok.kind == "ctx":
            self.advance()
            return Template(contexts=(tok.text[1:],))
        if tok.kind == "int" and tok.text == "0" and self.peek().kind != "(":
            self.advance()
            return Template()
        if tok.kind == "upper":
            if self.peek().kind != "=":
                self.fail(f"link {tok.text} cannot stand alone")
            self.advance()
            self.advance()
            extra: list[Atom] = []
            rhs = self.argument(extra)
            return Template(atoms=(Atom(CONNECTOR, (tok.text, rhs)),) + tuple(extra))
        if tok.kind in ("lower", "int"):
            extra = []
            atom = self.atom_term(extra, tail=None)
            if self.tok.kind == "=":
                # ``a(..) = Y``: the left atom gets one more port wired to Y
                self.advance()
                link = self.ns.fresh("T")
                atom = Atom(atom.name, atom.links + (link,))
                rhs = self.argument(extra)
                extra.append(Atom(CONNECTOR, (link, rhs)))
            return Template(atoms=(atom,) + tuple(extra))
        self.fail(f"unexpected {tok.text or 'end of input'!r}")

    def quantifier(self) -> Quantifier:
        label = EMPTY_LABEL
        if self.tok.kind == "upper":
            label = self.advance().text
        self.expect("<")
        t = self.tok
        if t.kind in ("?", "^", "*", "+"):
            self.advance()
            self.expect(">")
            if t.kind == "?":
                return Quantifier(label, "card", 0, INF)
            if t.kind == "^":
                return Quantifier(label, "neg", 0, 0)
            return Quantifier(label, ALL, 0 if t.kind == "*" else 1, INF)
        lo = self.integer()
        if self.tok.kind == ">":
            self.advance()
            return Quantifier(label, "card", lo, lo)
        self.expect(",")
        if self.tok.kind == ">":
            self.advance()
            return Quantifier(label, "card", lo, INF)
        hi = self.integer()
        self.expect(">")
        if hi < lo:
            self.fail(f"empty cardinality range <{lo},{hi}>")
        return Quantifier(label, "card", lo, hi)

    def integer(self) -> int:
        neg = False
        if self.tok.kind == "-":
            self.advance()
            neg = True
        v = int(self.expect("int").text)
        return -v if neg else v

    def atom_term(self, extra: list[Atom], tail: str | None) -> Atom:
        name = self.advance().text
        links: list[str] = []
        if self.tok.kind == "(":
            self.advance()
            if self.tok.kind != ")":
                links.append(self.argument(extra))
                while self.tok.kind == ",":
                    self.advance()
                    links.append(self.argument(extra))
            self.expect(")")
        if tail is not None:
            links.append(tail)
        return Atom(name, tuple(links))

    def argument(self, extra: list[Atom]) -> str:
        """A link name, or a nested atom expanded by term notation."""
        if self.tok.kind == "upper":
            return self.advance().text
        if self.tok.kind in ("lower", "int"):
            link = self.ns.fresh("T")
            extra.append(self.atom_term(extra, tail=link))
            return link
        self.fail(f"expected a link or an atom, found {self.tok.text or 'end of input'!r}")


def parse_program(text: str, ns: FreshNamer | None = None, allow_reserved: bool = False) -> SourceProgram:
    """Parse program text.  Rules are returned as written (not desugared)."""
    ns = ns or FreshNamer()
    p = _Parser(text, ns, allow_reserved)
    prog = SourceProgram()
    init = Template()
    for kind, item, tok in p.statements():
        if kind == "rule":
            prog.spans[len(prog.rules)] = (tok.line, tok.col)
            prog.rules.append(item)
        else:
            if not item.is_ground():
                raise ParseError(
                    "quantifiers and process contexts are not allowed in a process", tok.line, tok.col
                )
            init = init + item
    report = validate_link_condition(init)
    if not report.ok:
        raise LinkConditionError(report)
    from .congruence import normalize

    prog.init = normalize(template_to_process(init))
    return prog


def parse_process(text: str, allow_reserved: bool = False) -> Process:
    """Parse a single process; a trailing ``.`` is optional."""
    text = text.strip()
    if not text.endswith("."):
        text += "."
    prog = parse_program(text, allow_reserved=allow_reserved)
    if prog.rules:
        raise ParseError("expected a process, found a rule")
    return prog.init


def parse_template(text: str, allow_reserved: bool = False, ns: FreshNamer | None = None) -> Template:
    p = _Parser(text, ns or FreshNamer(), allow_reserved)
    t = p.sequence(("eof",))
    if p.tok.kind == ".":
        p.advance()
    p.expect("eof")
    return t


def parse_rule(text: str, allow_reserved: bool = False, ns: FreshNamer | None = None) -> Rule:
    text = text.strip()
    if not text.endswith("."):
        text += "."
    prog = parse_program(text, ns=ns, allow_reserved=allow_reserved)
    if len(prog.rules) != 1 or not prog.init.is_null():
        raise ParseError("expected exactly one rule")
    return prog.rules[0]


# --------------------------------------------------------------------------
# printing


def _num(z: float) -> str:
    return "" if z == INF else str(int(z))


def format_quantifier(q: Quantifier) -> str:
    lab = str(q.label)
    if q.kind == "neg":
        return f"{lab}<^>"
    if q.kind == ALL:
        return f"{lab}<{'*' if q.lo == 0 else '+'}>"
    return f"{lab}<{_num(q.lo)},{_num(q.hi)}>"


def _atom_text(a: Atom) -> str:
    if a.name == CONNECTOR and a.arity == 2:
        return f"{a.links[0]}={a.links[1]}"
    return f"{a.name}({','.join(a.links)})" if a.links else a.name


def _template_items(t: Template) -> list[str]:
    items = [_atom_text(a) for a in t.atoms]
    items += ["{" + print_template(m.body) + "}" for m in t.membranes]
    items += ["$" + c for c in t.contexts]
    for q in t.quantified:
        inner = _template_items(q.body)
        if len(inner) == 1 and not inner[0].startswith("("):
            items.append(format_quantifier(q.quantifier) + inner[0])
        else:
            items.append(format_quantifier(q.quantifier) + "(" + (",".join(inner) or "0") + ")")
    return items


def print_template(t: Template) -> str:
    return ",".join(_template_items(t))


def print_rule(r: Rule) -> str:
    return f"{print_template(r.head) or '0'} :- {print_template(r.body)}"


def print_process(p: Process, canonical: bool = True) -> str:
    """Textual form of a process.

    The canonical form normalizes connectors, orders elements by canonical
    rank and names local links ``L0, L1, ...`` in order of appearance,
    so congruent processes print identically.
    """
    if not canonical:
        return print_template(process_to_template(p)) or "0"
    from .congruence import canonical_form, normalize

    p = normalize(p)
    cf = canonical_form(p)
    g = cf.graph
    rank = cf.colors
    free = set()
    for row in g.ports:
        for u, x in row:
            if u < 0:
                free.add(x)
    names: dict[tuple[int, int], str] = {}
    counter = [0]

    def local_name() -> str:
        while True:
            n = f"L{counter[0]}"
            counter[0] += 1
            if n not in free:
                return n

    def show(v: int) -> str:
        kids = sorted(g.children[v], key=lambda c: rank[c])
        atoms = [c for c in kids if g.kinds[c][0] == "A"]
        mems = [c for c in kids if g.kinds[c][0] == "M"]
        parts = []
        for c in atoms:
            links = []
            for i, (u, j) in enumerate(g.ports[c]):
                if u < 0:
                    links.append(j)
                elif (c, i) in names:
                    links.append(names[(c, i)])
                else:
                    n = local_name()
                    names[(u, j)] = n
                    links.append(n)
            name = g.kinds[c][1]
            if name == CONNECTOR and len(links) == 2:
                parts.append(f"{links[0]}={links[1]}")
            else:
                parts.append(f"{name}({','.join(links)})" if links else name)
        for c in mems:
            parts.append("{" + show(c) + "}")
        return ",".join(parts)

    return show(0) or "0"


# --------------------------------------------------------------------------
# desugaring


def _scan_labels(t: Template, scope: tuple, acc: dict) -> None:
    for q in t.quantified:
        qq = q.quantifier
        acc.setdefault((scope, qq.label), []).append(qq)
        _scan_labels(q.body, scope + ((qq.label, qq.kind),), acc)
    for m in t.membranes:
        _scan_labels(m.body, scope, acc)


def desugar_rule(r: Rule, ns: FreshNamer) -> Rule:
    """Expand quantifier shorthands into core cardinality/non-existence form.

    ``l<*>T`` becomes ``l'<0,>T, l'<^>T'`` and ``l<+>T`` becomes
    ``l'<1,>T, l'<^>T'`` where ``l'`` is fresh (shared by every occurrence
    of ``l`` in the same scope, head and body alike) and ``T'`` is ``T``
    with fresh link and context names.  Cardinality quantifiers that
    share a label but not a range are given distinct labels.
    """
    ns.reserve(template_names(r.head) | template_names(r.body))
    uses: dict = {}
    _scan_labels(r.head, (), uses)
    _scan_labels(r.body, (), uses)
    split: dict = {}
    for (scope, label), qs in uses.items():
        ranges = []
        for q in qs:
            if q.kind == "card" and (q.lo, q.hi) not in ranges:
                ranges.append((q.lo, q.hi))
        if len(ranges) > 1:
            if label is not EMPTY_LABEL:
                warnings.warn(
                    f"label {label} is used with different ranges; treated as distinct groups",
                    LabelWarning,
                    stacklevel=2,
                )
            for rng in ranges[1:]:
                split[(scope, label, rng)] = ns.fresh_label(label)

    primes: dict = {}
    copies: dict = {}

    def conv(t: Template, scope: tuple) -> Template:
        mems = tuple(TMembrane(conv(m.body, scope), m.id) for m in t.membranes)
        qs: list[Quantified] = []
        for q in t.quantified:
            qq = q.quantifier
            if qq.kind == ALL:
                key = (scope, qq.label)
                if key not in primes:
                    primes[key] = ns.fresh_label(qq.label)
                    copies[key] = ({}, {})
                lab = primes[key]
                card = Quantifier(lab, "card", qq.lo, INF)
                links, ctxs = copies[key]
                for o in template_link_occurrences(q.body):
                    links.setdefault(o.link, ns.fresh(o.link))
                for c, _ in template_context_occurrences(q.body):
                    ctxs.setdefault(c, ns.fresh(c))
                shadow = rename_template(q.body, links, ctxs)
                neg = Quantifier(lab, "neg", 0, 0)
                qs.append(Quantified(card, conv(q.body, scope + ((lab, "card"),))))
                qs.append(Quantified(neg, conv(shadow, scope + ((lab, "neg"),))))
                continue
            if qq.kind == "card" and (scope, qq.label, (qq.lo, qq.hi)) in split:
                renamed = split[(scope, qq.label, (qq.lo, qq.hi))]
                qq = Quantifier(renamed, "card", qq.lo, qq.hi)
                # the inner scope keeps the written label so nested uses still pair up
            inner_scope = scope + ((q.quantifier.label, q.quantifier.kind),)
            qs.append(Quantified(qq, conv(q.body, inner_scope)))
        return Template(t.atoms, mems, t.contexts, tuple(qs))

    out = Rule(conv(r.head, ()), conv(r.body, ()), r.source_text)
    validate_rule(out)
    return out


def is_desugared(t: Template) -> bool:
    return all(q.quantifier.kind != ALL and is_desugared(q.body) for q in t.quantified) and all(
        is_desugared(m.body) for m in t.membranes
    )


# --------------------------------------------------------------------------
# rule validation


def validate_rule(r: Rule) -> None:
    """Raise a diagnostic if ``r`` violates the rule well-formedness conditions."""
    report = validate_link_condition(r)
    if not report.ok:
        raise LinkConditionError(report)

    _check_context_placement(r.head, top=True)
    head_ctx = [(c, path) for c, path in template_context_occurrences(r.head)]
    body_ctx = [(c, path) for c, path in template_context_occurrences(r.body)]
    seen: dict[str, int] = {}
    for c, path in head_ctx:
        if not any(q.is_neg for q in path):
            seen[c] = seen.get(c, 0) + 1
    for c, n in seen.items():
        if n > 1:
            raise ContextError(f"process context ${c} occurs {n} times in the head")
    body_count: dict[str, int] = {}
    for c, path in body_ctx:
        if not any(q.is_neg for q in path):
            body_count[c] = body_count.get(c, 0) + 1
    for c in seen:
        if body_count.get(c, 0) != 1:
            raise ContextError(
                f"process context ${c} must occur exactly once in the body (found {body_count.get(c, 0)})"
            )
    for c in body_count:
        if c not in seen:
            raise ContextError(f"process context ${c} in the body does not occur in the head")

    # names inside a quantified template only occur under the same quantifiers
    paths: dict[str, set] = {}
    for side in (r.head, r.body):
        for o in template_link_occurrences(side):
            paths.setdefault("link " + o.link, set()).add(o.path)
        for c, path in template_context_occurrences(side):
            paths.setdefault("context $" + c, set()).add(path)
    for name, ps in paths.items():
        if len(ps) > 1:
            raise QLMNtalError(f"{name} occurs under different quantifiers")


def _check_context_placement(t: Template, top: bool) -> None:
    if top and t.contexts:
        raise ContextError("a process context must occur inside a membrane")
    if len(t.contexts) > 1:
        raise ContextError("a membrane may contain at most one process context at its top level")
    for m in t.membranes:
        _check_context_placement(m.body, top=False)
    for q in t.quantified:
        _check_context_placement(q.body, top=top)
