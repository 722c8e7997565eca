"""Grammar and lexicon model with a line-oriented file loader.

Declarations:

    start S.
    rule S -> NP VP.              rule* X -> A A.   (* = no distinctness)
    lp Det < Nm.
    frame NP { M = {Nm,Det,Adj,PP}; C = {Nm}; head = Nm; schema {Det,Adj}; }
    proj Nm = NP.
    fcr PFORM -> ~INDEX.
    lex "the" Det [maj: det] subcat [].
    lex "sleeps" Vb [maj: v] subj [NP] subcat [] schema {}.

Comments run from % to end of line.  Frames may omit O (then O = M - C)
and the closing brace ends the statement; everything else ends with a
dot.  A grammar is immutable once loaded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import GrammarError, UsageError
from .fstruct import parse_avm
from .logic import And, Const, Equiv, Formula, Implies, Not, Or, Var, format_formula


@dataclass(frozen=True)
class Category:
    name: str
    level: str  # "lexical" or "phrasal"


@dataclass(frozen=True)
class PSRule:
    lhs: str
    rhs: tuple[str, ...]
    distinct_daughters: bool = True   # footnoted relaxation via rule*

    def __str__(self) -> str:
        return f"{self.lhs} -> {' '.join(self.rhs)}"


@dataclass(frozen=True)
class LPPair:
    before: str
    after: str


@dataclass(frozen=True)
class Frame:
    """Immediate-constituent frame of one phrase: maximal set M split
    into compulsory C and optional O, with the head and the declared
    valency schemata (each a subset of O)."""

    phrase: str
    m: frozenset[str]
    c: frozenset[str]
    o: frozenset[str]
    head: str
    schemata: tuple[frozenset[str], ...] = ()


@dataclass(frozen=True)
class FcrLiteral:
    """A feature mention in a cooccurrence restriction: bare name means
    'realized' (status true); name[value] additionally pins the value."""

    feature: str
    value: str | None = None


@dataclass(frozen=True)
class FCR:
    antecedent: Formula   # leaves are Var(FcrLiteral)
    consequent: Formula

    @property
    def formula(self) -> Formula:
        return Implies(self.antecedent, self.consequent)

    def __str__(self) -> str:
        return format_formula(self.formula, _format_literal)


@dataclass(frozen=True)
class LexEntry:
    form: str
    category: str
    avm: dict = field(default_factory=dict, hash=False, compare=False)
    subj: tuple[str, ...] = ()
    subcat: tuple[str, ...] = ()
    schema: frozenset[str] | None = None


class Grammar:
    def __init__(self):
        self.start = "S"
        self.rules: list[PSRule] = []
        self.lp_pairs: list[LPPair] = []
        self.frames: dict[str, Frame] = {}
        self.proj: dict[str, str] = {}
        self.fcrs: list[FCR] = []
        self.lexicon: dict[str, list[LexEntry]] = {}
        self._lp_set: set[tuple[str, str]] = set()
        self._categories: dict[str, Category] = {}

    # -- queries --------------------------------------------------------

    def categories(self) -> tuple[Category, ...]:
        return tuple(self._categories.values())

    def category(self, name: str) -> Category:
        try:
            return self._categories[name]
        except KeyError:
            raise UsageError(f"unknown category {name!r}") from None

    def is_phrasal(self, name: str) -> bool:
        return self.category(name).level == "phrasal"

    def rules_matching(self, rhs_window) -> tuple[PSRule, ...]:
        """Rules whose right-hand side equals the window, in file order."""
        window = tuple(rhs_window)
        return tuple(r for r in self.rules if r.rhs == window)

    def legal_daughters(self, r: str) -> frozenset[str]:
        """Everything r may immediately dominate: rule right-hand sides
        united with the frame's maximal constituent set."""
        if not self.is_phrasal(r):
            raise UsageError(f"{r} is not a phrasal category")
        out: set[str] = set()
        for rule in self.rules:
            if rule.lhs == r:
                out.update(rule.rhs)
        frame = self.frames.get(r)
        if frame is not None:
            out.update(frame.m)
        if not out:
            raise UsageError(f"no rules or frame for {r}")
        return frozenset(out)

    def lp_ok(self, x: str, y: str) -> bool:
        """Undeclared pairs are unordered; only a declared y < x order
        forbids the sequence x y."""
        return (y, x) not in self._lp_set

    def projection(self, x: str) -> str | None:
        return self.proj.get(x)

    def entries(self, form: str) -> tuple[LexEntry, ...]:
        return tuple(self.lexicon.get(form, ()))

    def rhs_lengths(self) -> frozenset[int]:
        return frozenset(len(r.rhs) for r in self.rules)

    # -- construction (loader only) -----------------------------------------


def _format_literal(lit: FcrLiteral) -> str:
    if lit.value:
        return f"{lit.feature.upper()}[{lit.value.upper()}]"
    return lit.feature.upper()


_FCR_TOKEN = re.compile(
    r"\s*(<->|->|[~&|()]|\+?[A-Za-z_][\w-]*(?:\[[A-Za-z_][\w-]*\])?)")
_LIT = re.compile(r"\+?([A-Za-z_][\w-]*)(?:\[([A-Za-z_][\w-]*)\])?$")


class _FcrParser:
    """Formula over feature literals; same precedence ladder as the
    boolean syntax (<-> weakest, then ->, |, &, ~)."""

    def __init__(self, text: str):
        self.toks: list[str] = []
        pos = 0
        while pos < len(text):
            m = _FCR_TOKEN.match(text, pos)
            if not m:
                if text[pos:].strip():
                    raise GrammarError(f"bad fcr token at {text[pos:].strip()[:10]!r}")
                break
            self.toks.append(m.group(1))
            pos = m.end()
        self.pos = 0

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise GrammarError("fcr ends unexpectedly")
        self.pos += 1
        return tok

    def formula(self) -> Formula:
        node = self.impl()
        if self.peek() == "<->":
            self.take()
            node = Equiv(node, self.impl())
        return node

    def impl(self) -> Formula:
        node = self.disj()
        if self.peek() == "->":
            self.take()
            node = Implies(node, self.impl())
        return node

    def disj(self) -> Formula:
        node = self.conj()
        while self.peek() == "|":
            self.take()
            nxt = self.conj()
            node = Or(node.args + (nxt,)) if isinstance(node, Or) else Or((node, nxt))
        return node

    def conj(self) -> Formula:
        node = self.unary()
        while self.peek() == "&":
            self.take()
            nxt = self.unary()
            node = And(node.args + (nxt,)) if isinstance(node, And) else And((node, nxt))
        return node

    def unary(self) -> Formula:
        tok = self.take()
        if tok == "~":
            return Not(self.unary())
        if tok == "(":
            node = self.formula()
            if self.take() != ")":
                raise GrammarError("fcr: missing )")
            return node
        m = _LIT.match(tok)
        if not m:
            raise GrammarError(f"fcr: bad literal {tok!r}")
        feature, value = m.groups()
        return Var(FcrLiteral(feature.lower(), value.lower() if value else None))


def parse_fcr(text: str, line: int | None = None) -> FCR:
    try:
        p = _FcrParser(text)
        f = p.formula()
        if p.peek() is not None:
            raise GrammarError(f"fcr: trailing {p.peek()!r}")
    except GrammarError as e:
        raise GrammarError(e.args[0], line) from None
    if not isinstance(f, Implies):
        raise GrammarError("an fcr must be an implication", line)
    return FCR(f.lhs, f.rhs)


# -- statement splitting --------------------------------------------------

def _statements(text: str):
    """Yield (line_number, statement_text).  Statements end at a dot at
    top level, or at the closing brace of a frame block."""
    src = re.sub(r"%[^\n]*", lambda m: " " * len(m.group()), text)
    buf: list[str] = []
    depth = 0
    line = 1
    start_line = None
    i = 0
    while i < len(src):
        ch = src[i]
        if ch == "\n":
            line += 1
        if not buf and (ch.isspace()):
            i += 1
            continue
        if start_line is None:
            start_line = line
        if ch in "{[":
            depth += 1
        elif ch in "}]":
            depth -= 1
            if depth < 0:
                raise GrammarError("unbalanced brackets", line)
            buf.append(ch)
            if depth == 0 and buf and buf[0:5] == list("frame"):
                stmt = "".join(buf).strip()
                # eat an optional trailing dot
                j = i + 1
                while j < len(src) and src[j] in " \t":
                    j += 1
                if j < len(src) and src[j] == ".":
                    i = j
                yield start_line, stmt
                buf, start_line = [], None
            i += 1
            continue
        elif ch == "." and depth == 0:
            yield start_line, "".join(buf).strip()
            buf, start_line = [], None
            i += 1
            continue
        buf.append(ch)
        i += 1
    if "".join(buf).strip():
        raise GrammarError("statement missing final dot", start_line)


_NAME = r"[A-Za-z_][\w-]*"


def _split_names(body: str, line: int) -> list[str]:
    names = [s.strip() for s in body.split(",") if s.strip()]
    for n in names:
        if not re.fullmatch(_NAME, n):
            raise GrammarError(f"bad category name {n!r}", line)
    return names


def _brace_set(text: str, line: int) -> list[str]:
    m = re.fullmatch(r"\{(.*)\}", text.strip(), re.S)
    if not m:
        raise GrammarError(f"expected {{..}}, got {text.strip()!r}", line)
    return _split_names(m.group(1), line)


def _bracket_list(text: str, line: int) -> list[str]:
    m = re.fullmatch(r"\[(.*)\]", text.strip(), re.S)
    if not m:
        raise GrammarError(f"expected [..], got {text.strip()!r}", line)
    return _split_names(m.group(1), line)


def _parse_frame(body: str, line: int) -> Frame:
    m = re.fullmatch(rf"frame\s+({_NAME})\s*\{{(.*)\}}", body.strip(), re.S)
    if not m:
        raise GrammarError("bad frame declaration", line)
    phrase, inner = m.group(1), m.group(2)
    sets: dict[str, list[str]] = {}
    head = None
    schemata: list[frozenset[str]] = []
    for clause in (c.strip() for c in inner.split(";")):
        if not clause:
            continue
        cm = re.fullmatch(r"([MCO])\s*=\s*(\{.*\})", clause, re.S)
        if cm:
            key = cm.group(1)
            if key in sets:
                raise GrammarError(f"duplicate {key} in frame {phrase}", line)
            sets[key] = _brace_set(cm.group(2), line)
            continue
        hm = re.fullmatch(rf"head\s*=\s*({_NAME})", clause)
        if hm:
            head = hm.group(1)
            continue
        sm = re.fullmatch(r"schema\s*(\{.*\})", clause, re.S)
        if sm:
            schemata.append(frozenset(_brace_set(sm.group(1), line)))
            continue
        raise GrammarError(f"bad frame clause {clause!r}", line)
    if "M" not in sets or "C" not in sets or head is None:
        raise GrammarError(f"frame {phrase} needs M, C and head", line)
    m_set, c_set = frozenset(sets["M"]), frozenset(sets["C"])
    o_set = frozenset(sets["O"]) if "O" in sets else m_set - c_set
    if c_set & o_set:
        raise GrammarError(f"frame {phrase}: C and O overlap", line)
    if m_set != c_set | o_set:
        raise GrammarError(f"frame {phrase}: M is not C with O", line)
    if head not in c_set:
        raise GrammarError(f"frame {phrase}: head {head} not compulsory", line)
    for schema in schemata:
        if not schema <= o_set:
            raise GrammarError(f"frame {phrase}: schema exceeds the optional set", line)
    return Frame(phrase, m_set, c_set, o_set, head, tuple(schemata))


def _parse_lex(body: str, line: int) -> LexEntry:
    m = re.match(rf'lex\s+"([^"]*)"\s+({_NAME})\s*(.*)$', body.strip(), re.S)
    if not m:
        raise GrammarError("bad lex declaration", line)
    form, cat, rest = m.group(1), m.group(2), m.group(3).strip()
    avm: dict = {}
    if rest.startswith("["):
        depth = 0
        for k, ch in enumerate(rest):
            depth += ch == "["
            depth -= ch == "]"
            if depth == 0:
                break
        else:
            raise GrammarError("unterminated avm", line)
        try:
            avm = parse_avm(rest[:k + 1])
        except UsageError as e:
            raise GrammarError(str(e), line) from None
        rest = rest[k + 1:].strip()
    subj: tuple[str, ...] = ()
    subcat: tuple[str, ...] = ()
    schema: frozenset[str] | None = None
    while rest:
        km = re.match(r"(subj|subcat)\s*(\[[^\]]*\])\s*(.*)$", rest, re.S)
        if km:
            value = tuple(_bracket_list(km.group(2), line))
            if km.group(1) == "subj":
                subj = value
            else:
                subcat = value
            rest = km.group(3).strip()
            continue
        sm = re.match(r"schema\s*(\{[^}]*\})\s*(.*)$", rest, re.S)
        if sm:
            schema = frozenset(_brace_set(sm.group(1), line))
            rest = sm.group(2).strip()
            continue
        raise GrammarError(f"bad lex clause {rest[:20]!r}", line)
    return LexEntry(form, cat, avm, subj, subcat, schema)


def load_grammar(text: str) -> Grammar:
    g = Grammar()
    defined: set[str] = set()          # categories introduced by declarations
    referenced: dict[str, int] = {}    # name -> first referencing line
    lp_lines: list[int] = []
    start_line = None

    for line, stmt in _statements(text):
        head = stmt.split(None, 1)[0] if stmt else ""
        if head in ("rule", "rule*"):
            m = re.fullmatch(rf"rule(\*?)\s+({_NAME})\s*->(.*)", stmt, re.S)
            if not m:
                raise GrammarError("bad rule", line)
            rhs = tuple(m.group(3).split())
            for n in (m.group(2),) + rhs:
                if not re.fullmatch(_NAME, n):
                    raise GrammarError(f"bad category name {n!r}", line)
            if not rhs:
                raise GrammarError("empty right-hand side", line)
            g.rules.append(PSRule(m.group(2), rhs, distinct_daughters=not m.group(1)))
            defined.update((m.group(2),) + rhs)
        elif head == "lp":
            m = re.fullmatch(rf"lp\s+({_NAME})\s*<\s*({_NAME})", stmt)
            if not m:
                raise GrammarError("bad lp declaration", line)
            x, y = m.groups()
            if x == y:
                raise GrammarError("lp pair must be irreflexive", line)
            g.lp_pairs.append(LPPair(x, y))
            lp_lines.append(line)
            referenced.setdefault(x, line)
            referenced.setdefault(y, line)
        elif head == "frame" or stmt.startswith("frame"):
            frame = _parse_frame(stmt, line)
            if frame.phrase in g.frames:
                raise GrammarError(f"duplicate frame for {frame.phrase}", line)
            g.frames[frame.phrase] = frame
            defined.add(frame.phrase)
            defined.update(frame.m)
        elif head == "proj":
            m = re.fullmatch(rf"proj\s+({_NAME})\s*=\s*({_NAME})", stmt)
            if not m:
                raise GrammarError("bad proj declaration", line)
            x, target = m.groups()
            if g.proj.get(x, target) != target:
                raise GrammarError(f"conflicting projection for {x}", line)
            g.proj[x] = target
            referenced.setdefault(x, line)
            defined.add(target)
        elif head == "fcr":
            g.fcrs.append(parse_fcr(stmt[3:].strip(), line))
        elif head == "lex":
            entry = _parse_lex(stmt, line)
            g.lexicon.setdefault(entry.form, []).append(entry)
            defined.add(entry.category)
            for n in entry.subj + entry.subcat:
                referenced.setdefault(n, line)
        elif head == "start":
            m = re.fullmatch(rf"start\s+({_NAME})", stmt)
            if not m:
                raise GrammarError("bad start declaration", line)
            g.start = m.group(1)
            start_line = line
            referenced.setdefault(g.start, line)
        elif stmt:
            raise GrammarError(f"unknown declaration {head!r}", line)

    for name, line in referenced.items():
        if name not in defined:
            raise GrammarError(f"unknown category {name!r}", line)
    if (g.rules or g.frames) and g.start not in defined:
        raise GrammarError(f"start category {g.start!r} undefined", start_line)

    # LP order must be a strict partial order: no cycles through pairs
    order: dict[str, set[str]] = {}
    pair_line: dict[tuple[str, str], int] = {}
    for pair, ln in zip(g.lp_pairs, lp_lines):
        order.setdefault(pair.before, set()).add(pair.after)
        pair_line.setdefault((pair.before, pair.after), ln)
    seen: dict[str, int] = {}   # 1 = on stack, 2 = done

    def visit(n: str) -> None:
        seen[n] = 1
        for m_ in order.get(n, ()):
            state = seen.get(m_)
            if state == 1:
                raise GrammarError(f"lp order is cyclic through {m_}",
                                   pair_line[(n, m_)])
            if state is None:
                visit(m_)
        seen[n] = 2

    for n in list(order):
        if seen.get(n) is None:
            visit(n)

    phrasal = {r.lhs for r in g.rules} | set(g.frames) | set(g.proj.values())
    for name in sorted(defined):
        level = "phrasal" if name in phrasal else "lexical"
        g._categories[name] = Category(name, level)
    g._lp_set = {(p.before, p.after) for p in g.lp_pairs}
    return g


def load_grammar_file(path: str) -> Grammar:
    with open(path, encoding="utf-8") as fh:
        try:
            return load_grammar(fh.read())
        except GrammarError as e:
            raise GrammarError(f"{path}: {e.args[0] if e.args else e}", None) from None
