"""Bottom-up window parser over category sequences.

The input sequence is split into a.b.c; the middle part is the window.
Window sizes and origins are enumerated (origin ascending, then size
ascending), the window is matched against rule right-hand sides, and a
match rewrites the window to the rule's left-hand side.  A derivation
records the reduction steps until the sequence equals <start>.

Two strategies explore the same windows in the same order and return
the same derivations; they differ only in how candidate windows are
generated.  "active" posts the split as constraints (a concatenation
constraint plus a membership restriction of the window size to the
grammar's rule lengths) and enumerates the pruned domains.  "gentest"
enumerates every arithmetically possible window and tests it after the
fact, which is the figure the active strategy is measured against.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .constraints import concat3, element, eq
from .errors import UsageError
from .grammar import Grammar
from .store import Store

# One reduction: (lhs, matched window).  A derivation is a step tuple,
# in reduction order; replaying it over the input yields <start>.
Step = tuple[str, tuple[str, ...]]
Derivation = tuple[Step, ...]

# Trees are (label, children) pairs; a leaf has no children.
Tree = tuple


@dataclass
class ParseStats:
    windows_tried: int = 0
    reductions_applied: int = 0
    backtracks: int = 0
    completeness_tests: int = 0
    propagation_steps: int = 0
    ask_evaluations: int = 0


def parse(cats, g: Grammar, *, limit: int | None = None,
          strategy: str = "active", trace=None) -> tuple[tuple[Derivation, ...], ParseStats]:
    """All derivations of the category sequence, with search statistics."""
    cats = tuple(cats)
    if not cats:
        raise UsageError("empty input")
    for c in cats:
        g.category(c)
    if strategy not in ("active", "gentest"):
        raise UsageError(f"unknown strategy {strategy!r}")
    stats = ParseStats()
    if limit is not None and limit <= 0:
        return (), stats
    out: list[Derivation] = []
    lengths = sorted(g.rhs_lengths())

    def node(seq: tuple[str, ...], steps: Derivation, unary_seen: frozenset) -> bool:
        produced = len(out)
        stop = False
        if seq == (g.start,):
            out.append(steps)
            stop = limit is not None and len(out) >= limit
        if not stop:
            scan = _scan_active if strategy == "active" else _scan_blind
            stop = scan(seq, steps, unary_seen)
        if len(out) == produced:
            stats.backtracks += 1
        return stop

    def try_window(seq, va, window, steps, unary_seen) -> bool:
        for rule in g.rules_matching(window):
            if len(window) == 1:
                key = (va, rule.lhs)
                if key in unary_seen:
                    continue
                child_seen = unary_seen | {key}
            else:
                child_seen = frozenset()
            stats.reductions_applied += 1
            reduced = seq[:va] + (rule.lhs,) + seq[va + len(window):]
            if node(reduced, steps + ((rule.lhs, window),), child_seen):
                return True
        return False

    def _scan_active(seq, steps, unary_seen) -> bool:
        l = len(seq)
        st = Store(trace=trace)
        a1 = st.new_var(range(l + 1), name="a1")
        b1 = st.new_var(range(1, l + 1), name="b1")
        c1 = st.new_var(range(l + 1), name="c1")
        a, b, c = st.new_seq("a"), st.new_seq("b"), st.new_seq("c")
        stop = False
        ok = (st.tell(concat3(a, b, c, seq, a1, b1, c1))
              and st.tell(element(b1, [n for n in lengths if n <= l])))
        if ok:
            for va in list(st.domain(a1)):
                snap_a = st.snapshot()
                if st.tell(eq(a1, va)):
                    for vb in list(st.domain(b1)):
                        snap_b = st.snapshot()
                        if st.tell(eq(b1, vb)):
                            stats.windows_tried += 1
                            stop = try_window(seq, va, st.seq_value(b),
                                              steps, unary_seen)
                        st.restore(snap_b)
                        if stop:
                            break
                st.restore(snap_a)
                if stop:
                    break
        stats.completeness_tests += st.counters.completeness_tests
        stats.propagation_steps += st.counters.propagation_steps
        stats.ask_evaluations += st.counters.ask_evaluations
        return stop

    def _scan_blind(seq, steps, unary_seen) -> bool:
        l = len(seq)
        for va in range(l):
            for vb in range(1, l - va + 1):
                stats.windows_tried += 1
                if try_window(seq, va, seq[va:va + vb], steps, unary_seen):
                    return True
        return False

    node(cats, (), frozenset())
    return tuple(out), stats


def oracle_parse(cats, g: Grammar, *, limit: int | None = None) -> tuple[Derivation, ...]:
    """Ground truth by plain exhaustive search, no store involved.
    Exponential, so the input length is capped."""
    cats = tuple(cats)
    if len(cats) > 12:
        raise UsageError("oracle input longer than 12 categories")
    if not cats:
        raise UsageError("empty input")
    for c in cats:
        g.category(c)
    out: list[Derivation] = []

    def walk(seq, steps, unary_seen) -> bool:
        if seq == (g.start,):
            out.append(steps)
            if limit is not None and len(out) >= limit:
                return True
        for va in range(len(seq)):
            for vb in range(1, len(seq) - va + 1):
                window = seq[va:va + vb]
                for rule in g.rules:
                    if rule.rhs != window:
                        continue
                    if vb == 1:
                        key = (va, rule.lhs)
                        if key in unary_seen:
                            continue
                        seen2 = unary_seen | {key}
                    else:
                        seen2 = frozenset()
                    if walk(seq[:va] + (rule.lhs,) + seq[va + vb:],
                            steps + ((rule.lhs, window),), seen2):
                        return True
        return False

    if limit is None or limit > 0:
        walk(cats, (), frozenset())
    return tuple(out)


def derivations_to_tree(derivation, cats) -> Tree:
    """Replay the steps over the input and return the constituent tree.

    Steps carry no positions, so the replay backtracks over the places a
    step's window may match; the first complete replay wins."""
    leaves = tuple((c, ()) for c in cats)

    def replay(nodes, steps):
        if not steps:
            return nodes[0] if len(nodes) == 1 else None
        lhs, rhs = steps[0]
        k = len(rhs)
        for i in range(len(nodes) - k + 1):
            if tuple(n[0] for n in nodes[i:i + k]) == tuple(rhs):
                got = replay(nodes[:i] + ((lhs, nodes[i:i + k]),) + nodes[i + k:],
                             steps[1:])
                if got is not None:
                    return got
        return None

    tree = replay(leaves, tuple(derivation))
    if tree is None:
        raise UsageError("derivation does not replay over the input")
    return tree


def tree_leaves(tree: Tree) -> tuple[str, ...]:
    label, children = tree
    if not children:
        return (label,)
    return tuple(leaf for child in children for leaf in tree_leaves(child))


def format_derivation(d: Derivation) -> str:
    """<<NP>, <Det,Nm>, ...> with lhs and window alternating."""
    inner = ", ".join(f"<{lhs}>, <{','.join(rhs)}>" for lhs, rhs in d)
    return f"<{inner}>"


def parse_derivation(text: str) -> Derivation:
    body = text.strip()
    if not (body.startswith("<") and body.endswith(">")):
        raise UsageError("derivation text must be <...>")
    parts = []
    for m in re.finditer(r"<([^<>]*)>", body[1:-1]):
        parts.append(tuple(s.strip() for s in m.group(1).split(",") if s.strip()))
    if len(parts) % 2:
        raise UsageError("derivation text must alternate lhs and window")
    pairs = [(parts[i], parts[i + 1]) for i in range(0, len(parts), 2)]
    for lhs, _ in pairs:
        if len(lhs) != 1:
            raise UsageError("derivation lhs must be a single category")
    return tuple((lhs[0], rhs) for lhs, rhs in pairs)
