"""Indexed flat representation of attribute-value matrices.

A structure is a sequence of cells ⟨feature, owner, value, status⟩
grouped by owner node.  Values are atoms, node references, reference
sequences (for the designated list-valued features), or absent; there
is no deeper nesting, so every complex value is one indirection away.
Structure sharing is two cells holding the same node reference.

Each cell's status is a boolean variable in the owning store, so
implications over feature statuses propagate through the ordinary
constraint machinery.  All mutations are trailed on the store:
snapshot/restore rolls the structure back together with the domains.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import InconsistencyError, UsageError
from .logic import Bool3, Equiv, Var
from .store import Store, VarId, VarKind

# features whose cells may carry a sequence of references/atoms
LIST_FEATURES = frozenset({"subj", "comps", "comp_dtrs", "conj_dtrs", "adj_dtrs"})


@dataclass(frozen=True)
class Ref:
    """A node reference used as a cell value."""

    index: int

    def __repr__(self) -> str:
        return f"@{self.index}"


@dataclass(frozen=True)
class Ann:
    """A status-annotated value inside an avm description."""

    value: object
    status: Bool3


class Cell:
    __slots__ = ("feature", "owner", "value", "status")

    def __init__(self, feature: str, owner: int, value, status: VarId):
        self.feature = feature
        self.owner = owner
        self.value = value
        self.status = status

    def __repr__(self) -> str:
        return f"<{self.feature},{self.owner},{self.value!r}>"


def _norm_feat(name: str) -> str:
    # HEAD-DTR and head_dtr are the same feature
    return name.lower().replace("-", "_")


def _as_path(p) -> tuple[str, ...]:
    if isinstance(p, str):
        parts = tuple(_norm_feat(s.strip()) for s in p.split("."))
    else:
        parts = tuple(_norm_feat(s) for s in p)
    if not parts or any(not s for s in parts):
        raise UsageError(f"bad path {p!r}")
    return parts


class FeatureStructure:
    """One indexed structure bound to a store.  Node 1 is the root of
    whatever is encoded first; independent signs live side by side in
    the same structure under their own root indices."""

    def __init__(self, store: Store, list_features=LIST_FEATURES):
        self.store = store
        self.list_features = frozenset(_norm_feat(f) for f in list_features)
        self._groups: dict[int, dict[str, Cell]] = {}
        self._n_nodes = 0
        self._redirect: dict[int, int] = {}
        # called with a cell whenever its value becomes known
        self.value_watchers: list = []

    # -- nodes ---------------------------------------------------------

    def new_node(self) -> int:
        self._n_nodes += 1
        idx = self._n_nodes

        def undo():
            self._n_nodes -= 1
            self._groups.pop(idx, None)

        self.store._trail.append(undo)
        return idx

    def canon(self, i: int) -> int:
        while i in self._redirect:
            i = self._redirect[i]
        return i

    def _check_node(self, i: int) -> int:
        if not (1 <= i <= self._n_nodes):
            raise UsageError(f"no node {i}")
        return self.canon(i)

    def node_indices(self) -> list[int]:
        """Live node indices, ascending."""
        dead = set(self._redirect)
        return [i for i in range(1, self._n_nodes + 1) if i not in dead]

    def cells_of(self, i: int) -> tuple[Cell, ...]:
        return tuple(self._groups.get(self._check_node(i), {}).values())

    def find(self, i: int, feature: str) -> Cell | None:
        return self._groups.get(self._check_node(i), {}).get(_norm_feat(feature))

    # -- cell creation --------------------------------------------------

    def _new_status(self, feature: str, owner: int, spec) -> VarId:
        if isinstance(spec, VarId):
            if spec.kind is not VarKind.BOOL:
                raise UsageError(f"status for {feature} must be a boolean variable")
            return spec
        var = self.store.new_bool(f"{feature}@{owner}")
        if isinstance(spec, Bool3) and spec.known:
            self.store._set_bool(var, spec is Bool3.TRUE)
        return var

    def _install_cell(self, feature: str, owner: int, value, status) -> Cell:
        feature = _norm_feat(feature)
        group = self._groups.setdefault(owner, {})
        if feature in group:
            raise UsageError(f"node {owner} already has {feature}")
        if isinstance(value, tuple) and feature not in self.list_features:
            raise UsageError(f"{feature} is not list-valued")
        cell = Cell(feature, owner, value, self._new_status(feature, owner, status))
        group[feature] = cell

        def undo():
            del group[feature]
            if not group:
                self._groups.pop(owner, None)

        self.store._trail.append(undo)
        if value is not None:
            self._notify_value(cell)
        return cell

    # -- encoding --------------------------------------------------------

    def encode_node(self, avm: dict, default_status: Bool3 = Bool3.UNKNOWN) -> int:
        """Encode a nested description into fresh nodes; returns the
        root index.  Indices are assigned depth-first in declaration
        order, at first entry; a dict object appearing twice becomes a
        shared node.
        """
        index_of: dict[int, int] = {}
        on_stack: set[int] = set()

        def visit(d: dict) -> int:
            if id(d) in on_stack:
                raise UsageError("cyclic avm")
            if id(d) in index_of:
                return index_of[id(d)]
            idx = self.new_node()
            index_of[id(d)] = idx
            on_stack.add(id(d))
            for feat, raw in d.items():
                status = default_status
                if isinstance(raw, Ann):
                    status, raw = raw.status, raw.value
                self._install_cell(feat, idx, convert(raw), status)
            on_stack.discard(id(d))
            return idx

        def convert(raw):
            if raw is None or isinstance(raw, str):
                return raw
            if isinstance(raw, dict):
                return Ref(visit(raw))
            if isinstance(raw, (list, tuple)):
                return tuple(convert(e) for e in raw)
            raise UsageError(f"bad avm value {raw!r}")

        return visit(avm)

    def decode(self, root: int = 1) -> dict:
        """Back to a nested description; shared nodes come out as the
        same dict object."""
        memo: dict[int, dict] = {}

        def node(i: int) -> dict:
            i = self.canon(i)
            if i not in memo:
                memo[i] = out = {}
                for cell in self._groups.get(i, {}).values():
                    out[cell.feature] = value(cell.value)
            return memo[i]

        def value(v):
            if isinstance(v, Ref):
                return node(v.index)
            if isinstance(v, tuple):
                return tuple(value(e) for e in v)
            return v

        return node(self._check_node(root))

    # -- paths -----------------------------------------------------------

    def lookup(self, path, start: int = 1) -> Cell | None:
        """Follow a feature path from `start`; the terminal cell, or
        None as soon as any step is missing or atomic."""
        idx = self._check_node(start)
        parts = _as_path(path)
        for k, feat in enumerate(parts):
            cell = self._groups.get(idx, {}).get(feat)
            if cell is None:
                return None
            if k == len(parts) - 1:
                return cell
            if not isinstance(cell.value, Ref):
                return None
            idx = self.canon(cell.value.index)
        return None

    def resolve(self, path, start: int = 1):
        """The node index (canonical) or atom the path leads to."""
        cell = self.lookup(path, start)
        if cell is None:
            return None
        if isinstance(cell.value, Ref):
            return self.canon(cell.value.index)
        return cell.value

    # -- mutation ----------------------------------------------------------

    def _set_value(self, cell: Cell, value) -> None:
        old = cell.value
        cell.value = value
        self.store._trail.append(lambda: setattr(cell, "value", old))
        if value is not None:
            self._notify_value(cell)

    def _notify_value(self, cell: Cell) -> None:
        for fn in tuple(self.value_watchers):
            fn(cell)

    def _tie_statuses(self, a: VarId, b: VarId) -> None:
        if a == b:
            return
        from .constraints import BoolConstraint   # cycle at import time

        if not self.store.tell(BoolConstraint(Equiv(Var(a), Var(b)))):
            raise InconsistencyError("status clash")

    def _unify_values(self, cell: Cell, value) -> None:
        """Fold `value` into cell.value (placeholder < atom/ref/seq)."""
        if value is None:
            return
        if cell.value is None:
            self._set_value(cell, value)
            return
        a, b = cell.value, value
        if isinstance(a, Ref) and isinstance(b, Ref):
            self.unify_nodes(a.index, b.index)
        elif isinstance(a, tuple) and isinstance(b, tuple):
            if len(a) != len(b):
                raise InconsistencyError(
                    f"sequence length clash on {cell.feature}: {len(a)} vs {len(b)}")
            for x, y in zip(a, b):
                if isinstance(x, Ref) and isinstance(y, Ref):
                    self.unify_nodes(x.index, y.index)
                elif x != y:
                    raise InconsistencyError(f"sequence clash on {cell.feature}")
        elif a != b:
            raise InconsistencyError(f"value clash on {cell.feature}: {a!r} vs {b!r}")

    def unify_nodes(self, i: int, j: int) -> int:
        """Merge two nodes; the smaller index survives as canonical.
        Same-name features unify recursively, statuses are tied."""
        i, j = self._check_node(i), self._check_node(j)
        if i == j:
            return i
        keep, drop = (i, j) if i < j else (j, i)
        self._redirect[drop] = keep
        self.store._trail.append(lambda: self._redirect.pop(drop))
        kept = self._groups.setdefault(keep, {})
        if not kept:
            # freshly materialized group for a previously empty node
            self.store._trail.append(lambda g=kept: self._groups.pop(keep, None) if not g else None)
        for feat, cell in list(self._groups.get(drop, {}).items()):
            other = kept.get(feat)
            if other is None:
                dropped = self._groups[drop]
                del dropped[feat]
                kept[feat] = cell
                old_owner = cell.owner
                cell.owner = keep

                def undo(c=cell, f=feat, o=old_owner, dg=dropped):
                    del kept[f]
                    dg[f] = c
                    c.owner = o

                self.store._trail.append(undo)
            else:
                self._unify_values(other, cell.value)
                self._tie_statuses(other.status, cell.status)
        self._assert_acyclic(keep)
        return keep

    def add(self, cells) -> None:
        """Install cells ⟨feature, owner, value, status⟩.  A duplicate
        feature unifies with the existing cell instead of duplicating;
        a status given as a variable is used as-is (token identity),
        as a truth value it forces a fresh variable.
        """
        for feature, owner, value, status in cells:
            feature = _norm_feat(feature)
            owner = self._check_node(owner)
            if isinstance(value, Ref):
                value = Ref(self._check_node(value.index))
            existing = self._groups.get(owner, {}).get(feature)
            if existing is None:
                self._install_cell(feature, owner, value, status)
            else:
                self._unify_values(existing, value)
                if isinstance(status, VarId):
                    self._tie_statuses(existing.status, status)
                elif isinstance(status, Bool3) and status.known:
                    self._force_status(existing, status)
            self._assert_acyclic(owner)

    def share(self, p1, p2, start: int = 1) -> int:
        """Make two paths end at the same node; returns its index."""
        t1, t2 = self.resolve(p1, start), self.resolve(p2, start)
        if isinstance(t1, str) or isinstance(t2, str):
            raise UsageError("share needs node-valued paths")
        if t1 is None and t2 is None:
            raise UsageError("neither path resolves to a node")
        if t1 is not None and t2 is not None:
            return self.unify_nodes(t1, t2)
        have, missing = (t1, p2) if t1 is not None else (t2, p1)
        parts = _as_path(missing)
        idx = self._check_node(start)
        for feat in parts[:-1]:
            cell = self._groups.get(idx, {}).get(feat)
            if cell is None:
                cell = self._install_cell(feat, idx, Ref(self.new_node()), Bool3.UNKNOWN)
            if not isinstance(cell.value, Ref):
                raise UsageError(f"path {missing!r} blocked by atom at {feat}")
            idx = self.canon(cell.value.index)
        last = parts[-1]
        cell = self._groups.get(idx, {}).get(last)
        if cell is None:
            self._install_cell(last, idx, Ref(have), Bool3.UNKNOWN)
        else:
            self._unify_values(cell, Ref(have))
        self._assert_acyclic(idx)
        return self.canon(have)

    def _force_status(self, cell: Cell, s: Bool3) -> None:
        mark = len(self.store._trail)
        ok = self.store._set_bool(cell.status, s is Bool3.TRUE)
        if ok:
            ok = self.store.propagate()
        if not ok:
            self.store._undo_to(mark)
            self.store._queue.clear()
            self.store._queued.clear()
            raise InconsistencyError(f"status {s.value} rejected on {cell.feature}")
        self.store._drain_wakeups()

    def set_status(self, path, s: Bool3, start: int = 1) -> Cell:
        """Constrain the status of the cell at `path` (creating a
        valueless placeholder cell for the final step if needed)."""
        parts = _as_path(path)
        if len(parts) == 1:
            idx = self._check_node(start)
        else:
            parent = self.resolve(parts[:-1], start)
            if not isinstance(parent, int):
                raise UsageError(f"path {path!r} has no node at {parts[-2]}")
            idx = parent
        cell = self._groups.get(idx, {}).get(parts[-1])
        if cell is None:
            cell = self._install_cell(parts[-1], idx, None, Bool3.UNKNOWN)
        if s.known:
            self._force_status(cell, s)
        return cell

    def status_value(self, path, start: int = 1) -> Bool3:
        cell = self.lookup(path, start)
        if cell is None:
            raise UsageError(f"no cell at {path!r}")
        return self.store.bool_value(cell.status)

    # -- pattern extraction -------------------------------------------------

    def delta(self, pattern, bindings: dict | None = None) -> dict | None:
        """Match cell templates ⟨feature, owner, value, status⟩ against
        the structure, threading one binding environment left to right.

        Strings in owner/value/status positions are variables; anything
        else is a constant (pre-bind a variable to force a constant
        value).  Owners must be bound by the time their template is
        tried.  A variable bound twice must see the same thing, which
        is how a repeated index variable expresses token identity.
        Returns the bindings, or None if some required cell is absent;
        with several candidates for a fully free template the first
        node in index order wins.
        """
        env = dict(bindings or {})

        def cell_value(v):
            if isinstance(v, Ref):
                return self.canon(v.index)
            if isinstance(v, tuple):
                return tuple(cell_value(e) for e in v)
            return v

        def bind(term, actual) -> bool:
            if isinstance(term, str):
                if term in env:
                    return env[term] == actual
                env[term] = actual
                return True
            if isinstance(term, Ref):
                term = self.canon(term.index)
            return term == actual

        for feature, owner, value, status in pattern:
            feature = _norm_feat(feature)
            if isinstance(owner, str):
                if owner not in env:
                    # unrooted template: scan nodes in index order
                    hit = None
                    for i in self.node_indices():
                        if feature in self._groups.get(i, {}):
                            hit = i
                            break
                    if hit is None:
                        return None
                    env[owner] = hit
                idx = env[owner]
            else:
                idx = owner
            if not isinstance(idx, int):
                return None
            cell = self._groups.get(self.canon(idx), {}).get(feature)
            if cell is None:
                return None
            if not bind(value, cell_value(cell.value)):
                return None
            if status is not None and not bind(status, cell.status):
                return None
        return env

    # -- integrity ------------------------------------------------------------

    def _assert_acyclic(self, start: int) -> None:
        stack, seen = [self.canon(start)], set()
        path: set[int] = set()

        def walk(i: int) -> None:
            if i in path:
                raise UsageError("cycle through node references")
            if i in seen:
                return
            seen.add(i)
            path.add(i)
            for cell in self._groups.get(i, {}).values():
                for r in self._refs(cell.value):
                    walk(self.canon(r.index))
            path.discard(i)

        walk(stack[0])

    @staticmethod
    def _refs(value):
        if isinstance(value, Ref):
            yield value
        elif isinstance(value, tuple):
            for e in value:
                if isinstance(e, Ref):
                    yield e

    def has_substructure(self, x: int, y: int) -> bool:
        """Passive check: is y the value of some non-empty path from x?
        (Deliberately not a posted constraint.)"""
        x, y = self._check_node(x), self._check_node(y)
        seen = set()
        stack = [x]
        first = True
        while stack:
            i = stack.pop()
            if i in seen:
                continue
            seen.add(i)
            if i == y and not first:
                return True
            first = False
            for cell in self._groups.get(i, {}).values():
                for r in self._refs(cell.value):
                    t = self.canon(r.index)
                    if t == y:
                        return True
                    stack.append(t)
        return False

    # -- output -----------------------------------------------------------------

    def _fmt_value(self, v) -> str:
        if v is None:
            return "-"
        if isinstance(v, Ref):
            return str(self.canon(v.index))
        if isinstance(v, tuple):
            return "<" + ",".join(self._fmt_value(e) for e in v) + ">"
        return str(v)

    def dump(self, statuses: bool = False) -> str:
        """One group per line in tuple notation, nodes in index order."""
        lines = []
        for i in self.node_indices():
            parts = []
            for cell in self._groups.get(i, {}).values():
                fields = [cell.feature, str(i), self._fmt_value(cell.value)]
                if statuses:
                    fields.append(self.store.bool_value(cell.status).value)
                parts.append("<" + ",".join(fields) + ">")
            lines.append("[" + ", ".join(parts) + "]")
        return "\n".join(lines)


def encode(avm: dict, store: Store | None = None,
           default_status: Bool3 = Bool3.UNKNOWN) -> FeatureStructure:
    fs = FeatureStructure(store or Store())
    fs.encode_node(avm, default_status)
    return fs


def avm_equal(a, b) -> bool:
    """Structural equality of nested descriptions, sharing included:
    two avms are equal iff their dict objects correspond one to one."""
    fwd: dict[int, int] = {}
    bwd: dict[int, int] = {}

    def walk(x, y) -> bool:
        if isinstance(x, dict) and isinstance(y, dict):
            if fwd.get(id(x)) is not None or bwd.get(id(y)) is not None:
                return fwd.get(id(x)) == id(y) and bwd.get(id(y)) == id(x)
            fwd[id(x)] = id(y)
            bwd[id(y)] = id(x)
            if x.keys() != y.keys():
                return False
            return all(walk(x[k], y[k]) for k in x)
        if isinstance(x, tuple) and isinstance(y, tuple):
            return len(x) == len(y) and all(walk(p, q) for p, q in zip(x, y))
        return x == y

    return walk(a, b)


# -- avm text syntax ------------------------------------------------------------
#
#   [cat: [head: [maj: n, case: nom]], content: [index: [gen: masc, num: sing]]]
#   sharing:   [head: #1 [maj: n], subj_head: #1]
#   sequences: [comps: <#2, #3>]      statuses:  [+vform: pas, -index, ?gen: masc]

_AVM_TOKEN = re.compile(r"\s*(#\d+|[\[\]<>,:+?-]|[A-Za-z_][\w-]*)")


class _AvmParser:
    def __init__(self, text: str):
        self.toks = _AVM_TOKEN.findall(text)
        self.pos = 0
        self.tags: dict[str, dict] = {}

    def peek(self) -> str | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self, want: str | None = None) -> str:
        tok = self.peek()
        if tok is None or (want is not None and tok != want):
            raise UsageError(f"avm syntax: expected {want or 'token'}, got {tok!r}")
        self.pos += 1
        return tok

    def avm(self) -> dict:
        self.take("[")
        out: dict = {}
        if self.peek() != "]":
            while True:
                self.pair(out)
                if self.peek() != ",":
                    break
                self.take(",")
        self.take("]")
        return out

    def pair(self, out: dict) -> None:
        status = None
        if self.peek() in ("+", "-", "?"):
            status = {"+": Bool3.TRUE, "-": Bool3.FALSE, "?": Bool3.UNKNOWN}[self.take()]
        name = self.take()
        if not re.fullmatch(r"[A-Za-z_][\w-]*", name):
            raise UsageError(f"avm syntax: bad feature name {name!r}")
        value = None
        if self.peek() == ":":
            self.take(":")
            value = self.value()
        key = _norm_feat(name)
        if key in out:
            raise UsageError(f"avm syntax: duplicate feature {name!r}")
        out[key] = value if status is None else Ann(value, status)

    def value(self):
        tok = self.peek()
        if tok == "[":
            return self.avm()
        if tok == "<":
            return self.seq()
        if tok == "-":
            self.take()
            return None
        if tok is not None and tok.startswith("#"):
            return self.tag()
        name = self.take()
        if not re.fullmatch(r"[A-Za-z_][\w-]*", name):
            raise UsageError(f"avm syntax: bad value {name!r}")
        return name.lower()

    def seq(self) -> tuple:
        self.take("<")
        items = []
        if self.peek() != ">":
            while True:
                items.append(self.value())
                if self.peek() != ",":
                    break
                self.take(",")
        self.take(">")
        return tuple(items)

    def tag(self):
        label = self.take()
        node = self.tags.setdefault(label, {})
        if self.peek() == "[":
            filled = self.avm()
            for k, v in filled.items():
                if k in node:
                    raise UsageError(f"avm syntax: tag {label} redefines {k}")
                node[k] = v
        return node


def parse_avm(text: str) -> dict:
    """Parse the bracketed avm syntax into nested dicts (sharing tags
    become shared dict objects, annotations become Ann wrappers)."""
    p = _AvmParser(text)
    avm = p.avm()
    if p.peek() is not None:
        raise UsageError(f"avm syntax: trailing {p.peek()!r}")
    return avm
