"""Constraint vocabulary posted into the store.

Standard finite-domain constraints (eq, neq, all_distinct, element) and
boolean formulas are always resolvable: their filters run as soon as
they are posted.  Structural constraints over incrementally described
relations (daughter, in_relation) are model-gated: they filter nothing
until the completeness machinery declares them resolvable, at which
point they induce a complete domain on their first argument.

Sequence variables appear only inside concat3/size, which tie three
window segments and their sizes to a ground sequence.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from .errors import UsageError
from .logic import Bool3, Formula, Not, eval_formula, enforce, parse_formula
from .store import AskResult, Relation, Store, VarId, VarKind


class Constraint:
    """Base: subclasses are frozen dataclasses, so identical posts dedupe."""

    model_gated = False

    def vars(self) -> tuple[VarId, ...]:
        raise NotImplementedError

    def post(self, store: Store) -> bool:
        """One-time work at tell time (e.g. an initial intersection)."""
        return True

    def filter(self, store: Store) -> bool:
        """Prune to per-constraint local consistency.  False on wipe-out."""
        return True

    def holds(self, asg: dict, store: Store) -> bool:
        raise NotImplementedError

    def is_resolvable(self, store: Store) -> bool:
        return True

    def ask_value(self, store: Store) -> AskResult:
        """Decide entailment by support enumeration once every involved
        domain is complete; unknown before that."""
        if not self.is_resolvable(store):
            return AskResult.UNKNOWN
        fd = [v for v in self.vars() if v.kind is VarKind.FD]
        if any(not store.is_complete(v) for v in fd):
            return AskResult.UNKNOWN
        if any(v.kind is VarKind.SEQ and store.seq_value(v) is None for v in self.vars()):
            return AskResult.UNKNOWN
        truths: set[bool] = set()
        for combo in itertools.product(*(store.domain(v) for v in fd)):
            truths.add(self.holds(dict(zip(fd, combo)), store))
            if len(truths) == 2:
                return AskResult.UNKNOWN
        if truths == {True}:
            return AskResult.ENTAILED
        return AskResult.DISENTAILED


def _is_var(x) -> bool:
    return isinstance(x, VarId)


@dataclass(frozen=True)
class Eq(Constraint):
    x: VarId
    y: object  # variable or constant

    def vars(self):
        return (self.x, self.y) if _is_var(self.y) else (self.x,)

    def filter(self, store):
        if _is_var(self.y):
            allowed = set(store.domain(self.x)) & set(store.domain(self.y))
            return store._prune(self.x, allowed) and store._prune(self.y, allowed)
        return store._prune(self.x, {self.y})

    def holds(self, asg, store):
        return asg[self.x] == (asg[self.y] if _is_var(self.y) else self.y)


@dataclass(frozen=True)
class Neq(Constraint):
    x: VarId
    y: object

    def vars(self):
        return (self.x, self.y) if _is_var(self.y) else (self.x,)

    def filter(self, store):
        if not _is_var(self.y):
            return store._prune(self.x, set(store.domain(self.x)) - {self.y})
        ok = True
        xv, yv = store.value(self.x), store.value(self.y)
        if xv is not None:
            ok = store._prune(self.y, set(store.domain(self.y)) - {xv})
        if ok and yv is not None:
            ok = store._prune(self.x, set(store.domain(self.x)) - {yv})
        return ok

    def holds(self, asg, store):
        return asg[self.x] != (asg[self.y] if _is_var(self.y) else self.y)


@dataclass(frozen=True)
class AllDistinct(Constraint):
    """Pairwise distinctness, filtered at singleton-elimination strength:
    every determined item's value is removed from the other domains."""

    items: tuple  # variables and constants mixed

    def vars(self):
        return tuple(i for i in self.items if _is_var(i))

    def filter(self, store):
        pinned: list[tuple[object, object]] = []  # (source item, value)
        for item in self.items:
            if _is_var(item):
                val = store.value(item)
                if val is not None:
                    pinned.append((item, val))
            else:
                pinned.append((None, item))
        seen = set()
        for _, val in pinned:
            if val in seen:
                return False
            seen.add(val)
        for src, val in pinned:
            for item in self.items:
                if _is_var(item) and item is not src and store.value(item) != val:
                    if not store._prune(item, set(store.domain(item)) - {val}):
                        return False
                elif _is_var(item) and item is not src and store.value(item) == val:
                    return False
        return True

    def holds(self, asg, store):
        vals = [asg[i] if _is_var(i) else i for i in self.items]
        return len(vals) == len(set(vals))


@dataclass(frozen=True)
class Element(Constraint):
    """Membership restriction: the variable ranges over `allowed`."""

    x: VarId
    allowed: tuple

    def vars(self):
        return (self.x,)

    def post(self, store):
        return store._prune(self.x, set(self.allowed))

    def filter(self, store):
        return store._prune(self.x, set(self.allowed))

    def holds(self, asg, store):
        return asg[self.x] in self.allowed


@dataclass(frozen=True)
class Size(Constraint):
    """Ties a sequence variable to its length."""

    seq: VarId
    size: VarId

    def vars(self):
        return (self.seq, self.size)

    def filter(self, store):
        bound = store.seq_value(self.seq)
        if bound is not None:
            return store._prune(self.size, {len(bound)})
        return True

    def holds(self, asg, store):
        bound = store.seq_value(self.seq)
        return bound is not None and len(bound) == asg[self.size]


@dataclass(frozen=True)
class Concat3(Constraint):
    """whole = a . b . c with size variables a1, b1, c1.

    The ground sequence is known; the constraint keeps the three size
    domains mutually supported (a1 + b1 + c1 = |whole|, consistent with
    any already-bound segment) and binds the segment variables to slices
    once the split is determined.  Enumerating the supported (a1, b1)
    pairs enumerates exactly the window positions over `whole`.
    """

    a: VarId
    b: VarId
    c: VarId
    whole: tuple
    a1: VarId
    b1: VarId
    c1: VarId

    def vars(self):
        return (self.a, self.b, self.c, self.a1, self.b1, self.c1)

    def _segment_ok(self, seg: VarId, lo: int, hi: int, store) -> bool:
        bound = store.seq_value(seg)
        return bound is None or bound == self.whole[lo:hi]

    def filter(self, store):
        n = len(self.whole)
        dc = set(store.domain(self.c1))
        sup_a, sup_b, sup_c = set(), set(), set()
        for va in store.domain(self.a1):
            for vb in store.domain(self.b1):
                vc = n - va - vb
                if vc < 0 or vc not in dc:
                    continue
                if not (self._segment_ok(self.a, 0, va, store)
                        and self._segment_ok(self.b, va, va + vb, store)
                        and self._segment_ok(self.c, va + vb, n, store)):
                    continue
                sup_a.add(va)
                sup_b.add(vb)
                sup_c.add(vc)
        if not (store._prune(self.a1, sup_a)
                and store._prune(self.b1, sup_b)
                and store._prune(self.c1, sup_c)):
            return False
        va, vb = store.value(self.a1), store.value(self.b1)
        if va is not None and vb is not None:
            return (store._bind_seq(self.a, self.whole[:va])
                    and store._bind_seq(self.b, self.whole[va:va + vb])
                    and store._bind_seq(self.c, self.whole[va + vb:]))
        return True

    def holds(self, asg, store):
        n = len(self.whole)
        va, vb, vc = asg[self.a1], asg[self.b1], asg[self.c1]
        if va + vb + vc != n:
            return False
        return (self._segment_ok(self.a, 0, va, store)
                and self._segment_ok(self.b, va, va + vb, store)
                and self._segment_ok(self.c, va + vb, n, store))


@dataclass(frozen=True)
class BoolConstraint(Constraint):
    """Asserts a three-valued formula true, at unit-propagation strength:
    whenever all but one leaf of a decisive context is fixed, the
    remaining status is forced."""

    formula: Formula

    def vars(self):
        seen: dict[VarId, None] = {}
        for ref in self.formula.leaves():
            seen.setdefault(ref)
        return tuple(seen)

    def filter(self, store):
        return enforce(self.formula, True, store.bool_value, store._set_bool)

    def ask_value(self, store):
        val = eval_formula(self.formula, store.bool_value)
        if val is Bool3.TRUE:
            return AskResult.ENTAILED
        if val is Bool3.FALSE:
            return AskResult.DISENTAILED
        return AskResult.UNKNOWN


@dataclass(frozen=True)
class Daughter(Constraint):
    """y is an immediate daughter of the fixed node x in the described
    structure.  Resolvable once x's daughter set is closed; the filter
    then induces a complete domain on y."""

    y: VarId
    x: object
    relation: Relation

    model_gated = True
    key_vars: tuple = ()

    def vars(self):
        return (self.y,)

    def image_keys(self, store):
        return ((self.x,),)

    def is_resolvable(self, store):
        return store.is_resolved(self) or self.relation.group_closed((self.x,))

    def filter(self, store):
        if not self.is_resolvable(store):
            return True
        if not store._prune(self.y, set(self.relation.group((self.x,)))):
            return False
        store._mark_complete(self.y)
        return True

    def holds(self, asg, store):
        return (asg[self.y], self.x) in self.relation


@dataclass(frozen=True)
class InRelation(Constraint):
    """(u, k1[, k2]) is a fact of the relation.

    The induced partial domain of u is complete exactly when every key
    domain is complete and every image group over the current key values
    is closed -- the recursive completeness condition whose re-check
    cost the counters measure.
    """

    u: VarId
    key_vars: tuple
    relation: Relation

    model_gated = True

    def vars(self):
        return (self.u, *self.key_vars)

    def image_keys(self, store):
        return list(itertools.product(*(store.domain(v) for v in self.key_vars)))

    def is_resolvable(self, store):
        if store.is_resolved(self):
            return True
        return (all(store.is_complete(v) for v in self.key_vars)
                and all(self.relation.group_closed(k) for k in self.image_keys(store)))

    def filter(self, store):
        if not store.is_resolved(self) and not self.is_resolvable(store):
            return True
        induced: set = set()
        for key in self.image_keys(store):
            induced.update(self.relation.group(key))
        if not store._prune(self.u, induced):
            return False
        store._mark_complete(self.u)
        return True

    def holds(self, asg, store):
        return (asg[self.u], *(asg[v] for v in self.key_vars)) in self.relation


# -- convenience constructors ------------------------------------------------

def eq(x: VarId, y) -> Eq:
    return Eq(x, y)


def neq(x: VarId, y) -> Neq:
    return Neq(x, y)


def all_distinct(*items) -> AllDistinct:
    return AllDistinct(tuple(items))


def element(x: VarId, allowed) -> Element:
    return Element(x, tuple(allowed))


def size(seq: VarId, size_var: VarId) -> Size:
    return Size(seq, size_var)


def concat3(a, b, c, whole, a1, b1, c1) -> Concat3:
    return Concat3(a, b, c, tuple(whole), a1, b1, c1)


def bool_post(formula: Formula) -> BoolConstraint:
    return BoolConstraint(formula)


def daughter(y: VarId, x, relation: Relation) -> Daughter:
    return Daughter(y, x, relation)


def in_relation(u: VarId, key_vars, relation: Relation) -> InRelation:
    return InRelation(u, tuple(key_vars), relation)


# -- textual syntax -----------------------------------------------------------
#
#   alldistinct(x,y,z)        element(x,[NP,VP])
#   x = NP    x != y          x & y = true    x -> ~y    ~(a | b) = false

_CALL = re.compile(r"^(alldistinct|element)\s*\((.*)\)$", re.S)


def _operand(tok: str, env: dict[str, object]):
    tok = tok.strip()
    if tok in env:
        return env[tok]
    return tok


def parse_constraint(text: str, env: dict[str, object]) -> Constraint:
    """Parse one constraint in the textual syntax.  Names resolve
    through `env`; unresolved names are constants (for finite-domain
    positions) or errors (for boolean formulas)."""
    text = text.strip().rstrip(".")
    m = _CALL.match(text)
    if m:
        head, body = m.groups()
        if head == "alldistinct":
            return AllDistinct(tuple(_operand(t, env) for t in body.split(",") if t.strip()))
        var_part, _, list_part = body.partition(",")
        lm = re.match(r"^\s*\[(.*)\]\s*$", list_part, re.S)
        if not lm:
            raise UsageError(f"element needs a [..] list: {text!r}")
        allowed = tuple(t.strip() for t in lm.group(1).split(",") if t.strip())
        x = _operand(var_part, env)
        if not _is_var(x):
            raise UsageError(f"element needs a variable: {var_part!r}")
        return Element(x, allowed)
    if "!=" in text:
        lhs, rhs = (t.strip() for t in text.split("!=", 1))
        x = _operand(lhs, env)
        if not _is_var(x):
            raise UsageError(f"left side of != must be a variable: {lhs!r}")
        return Neq(x, _operand(rhs, env))
    # a single bare '=' separates either an fd equation or a boolean
    # formula from its true/false polarity
    parts = re.split(r"(?<![<>!])=(?!=)", text)
    if len(parts) == 2:
        lhs, rhs = parts[0].strip(), parts[1].strip()
        if rhs in ("true", "false"):
            f = parse_formula(lhs, env)
            return BoolConstraint(f if rhs == "true" else Not(f))
        x = _operand(lhs, env)
        if not _is_var(x):
            raise UsageError(f"left side of = must be a variable: {lhs!r}")
        return Eq(x, _operand(rhs, env))
    return BoolConstraint(parse_formula(text, env))
