"""Principle layer over signs.

A sign is a feature structure rooted at synsem.loc.cat with subj/comps
valency lists and, for phrases, a dtrs node holding the daughter signs.
Local trees are gated by five structural checks (distinctness of
same-category daughters, linear precedence, dominance, valency,
projection), the daughter slots carry an a-priori distinctness
constraint, subcategorization is a layer of boolean implications over
per-constituent well-formedness variables, cooccurrence restrictions
compile to implications over status variables, head feature sharing
installs the mother's head as the head daughter's head node (token
identity), and valency lists cancel realized daughters from the end.

The sentence pipeline drives all of this from the window parser: every
distinct tree of every lexical tagging is built bottom-up on a fresh
store.  The active strategy checks each reduction as it is built; the
generate-and-test strategy builds the whole tree first and runs every
check at the end.  Both accept exactly the same signs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

from .cfg import derivations_to_tree, parse
from .constraints import BoolConstraint, all_distinct, bool_post, element, eq
from .errors import InconsistencyError, UsageError
from .fstruct import Bool3, Cell, FeatureStructure, Ref
from .grammar import FCR, FcrLiteral, Grammar, LexEntry
from .logic import And, Formula, Implies, Not, Or, Var, conj
from .store import AskResult, Store, VarId

SLOTS = ("head_dtr", "filler_dtr", "marker_dtr", "subj_dtr",
         "comp_dtrs", "conj_dtrs", "adj_dtrs")

CAT_PATH = ("synsem", "loc", "cat")


@dataclass
class Sign:
    fs: FeatureStructure
    root: int
    category: str
    wf: VarId
    schema: frozenset[str] | None = None    # lexical heads carry their choice
    parts: tuple = ()                       # (category, root, wf) per constituent

    def same_ref(self, other: "Sign") -> bool:
        return self.fs is other.fs and self.fs.canon(self.root) == other.fs.canon(other.root)


@dataclass(frozen=True)
class LocalTree:
    root: str
    daughters: tuple  # ((category, Sign | None), ...) in surface order


@dataclass(frozen=True)
class Violation:
    kind: str     # distinctness | precedence | dominance | valency | projection
    detail: str


@dataclass(frozen=True)
class TreeCheck:
    ok: bool
    violations: tuple[Violation, ...]


@dataclass
class DtrsSchema:
    node: int
    slots: dict
    slot_vars: tuple[VarId, ...]


@dataclass
class HpsgStats:
    windows_tried: int = 0
    reductions_applied: int = 0
    backtracks: int = 0
    trees_considered: int = 0
    expansions: int = 0
    signs_accepted: int = 0
    completeness_tests: int = 0
    propagation_steps: int = 0
    ask_evaluations: int = 0


# -- valency ------------------------------------------------------------

def valency_of(sign: Sign) -> tuple[tuple, tuple]:
    """The sign's current subj and comps lists (empty when unset)."""
    out = []
    for feat in ("subj", "comps"):
        cell = sign.fs.lookup(CAT_PATH + (feat,), sign.root)
        out.append(tuple(cell.value) if cell is not None and cell.value else ())
    return tuple(out)


def _cancel(head_list, realized, which: str):
    k = len(realized)
    if k == 0:
        return tuple(head_list)
    if k > len(head_list):
        raise InconsistencyError(f"{which} over-saturated: {realized} against {head_list}")
    if tuple(head_list[-k:]) != tuple(realized):
        raise InconsistencyError(
            f"{which} mismatch: realized {realized} does not close {head_list}")
    return tuple(head_list[:-k])


def _split_realized(head_subj, head_comps, sisters):
    """Assign sister categories to the head's lists, complements first.
    Returns (realized_subj, realized_comps, mother_subj, mother_comps)."""
    rem_c, rem_s = list(head_comps), list(head_subj)
    comps_r, subj_r = [], []
    for cat in sisters:
        if cat in rem_c:
            rem_c.remove(cat)
            comps_r.append(cat)
        elif cat in rem_s:
            rem_s.remove(cat)
            subj_r.append(cat)
        else:
            raise InconsistencyError(f"{cat} is not subcategorized by the head")
    mother_comps = _cancel(head_comps, comps_r, "comps")
    mother_subj = _cancel(head_subj, subj_r, "subj")
    return tuple(subj_r), tuple(comps_r), mother_subj, mother_comps


# -- local tree gate ----------------------------------------------------

def _head_index(root: str, daughters, g: Grammar) -> int | None:
    frame = g.frames.get(root)
    if frame is not None:
        for i, (cat, _) in enumerate(daughters):
            if cat == frame.head:
                return i
    for i, (cat, _) in enumerate(daughters):
        if g.projection(cat) == root:
            return i
    return None


def check_local_tree(t: LocalTree, g: Grammar) -> TreeCheck:
    """Evaluate the five structural constraints; violations are data."""
    if not t.daughters:
        raise UsageError("a local tree needs daughters")
    cats = tuple(cat for cat, _ in t.daughters)
    violations: list[Violation] = []

    rules = g.rules_matching(cats)
    if not rules or all(r.distinct_daughters for r in rules):
        for i in range(len(t.daughters)):
            for j in range(i + 1, len(t.daughters)):
                ci, si = t.daughters[i]
                cj, sj = t.daughters[j]
                if ci == cj and si is not None and sj is not None and si.same_ref(sj):
                    violations.append(Violation(
                        "distinctness", f"daughters {i + 1} and {j + 1} are the same {ci}"))

    for x, y in zip(cats, cats[1:]):
        if not g.lp_ok(x, y):
            violations.append(Violation("precedence", f"{x} may not precede {y}"))

    legal = g.legal_daughters(t.root)
    for cat in cats:
        if cat not in legal:
            violations.append(Violation("dominance", f"{t.root} may not dominate {cat}"))

    hi = _head_index(t.root, t.daughters, g)
    if hi is not None and t.daughters[hi][1] is not None:
        head_subj, head_comps = valency_of(t.daughters[hi][1])
        sisters = cats[:hi] + cats[hi + 1:]
        try:
            _split_realized(head_subj, head_comps, sisters)
        except InconsistencyError as e:
            violations.append(Violation("valency", str(e)))

    if all(g.projection(cat) != t.root for cat in cats):
        violations.append(Violation(
            "projection", f"{t.root} is not the projection of any daughter"))

    return TreeCheck(not violations, tuple(violations))


# -- daughter slots -----------------------------------------------------

def attach_daughters(fs: FeatureStructure, mother: Sign, head: Sign, *,
                     subj=(), comps=(), filler=None, marker=None,
                     conj_dtrs=(), adj_dtrs=()) -> DtrsSchema:
    """Build the mother's dtrs node.  Occupied slots get a finite-domain
    variable over the sign's root index so distinctness can be posted
    before anything else looks at the slots."""
    store = fs.store
    dtrs = fs.new_node()
    fs.add((("dtrs", mother.root, Ref(dtrs), Bool3.TRUE),))
    slots: dict = {}
    slot_vars: list[VarId] = []

    def occupy(name: str, sign: Sign):
        slots[name] = sign
        slot_vars.append(store.new_var([fs.canon(sign.root)], name=f"dtr:{name}"))

    occupy("head_dtr", head)
    fs.add((("head_dtr", dtrs, Ref(head.root), Bool3.TRUE),))
    if len(subj) > 1:
        raise UsageError("at most one subject daughter")
    if subj:
        occupy("subj_dtr", subj[0])
        fs.add((("subj_dtr", dtrs, Ref(subj[0].root), Bool3.TRUE),))
    if filler is not None:
        occupy("filler_dtr", filler)
        fs.add((("filler_dtr", dtrs, Ref(filler.root), Bool3.TRUE),))
    if marker is not None:
        occupy("marker_dtr", marker)
        fs.add((("marker_dtr", dtrs, Ref(marker.root), Bool3.TRUE),))
    for name, group in (("comp_dtrs", comps), ("conj_dtrs", conj_dtrs),
                        ("adj_dtrs", adj_dtrs)):
        if group:
            slots[name] = tuple(group)
            for k, sign in enumerate(group):
                slot_vars.append(store.new_var([fs.canon(sign.root)],
                                               name=f"dtr:{name}[{k}]"))
            fs.add(((name, dtrs, tuple(Ref(s.root) for s in group), Bool3.TRUE),))
    return DtrsSchema(dtrs, slots, tuple(slot_vars))


def post_unicity(schema: DtrsSchema, store: Store) -> bool:
    if len(schema.slot_vars) < 2:
        return True
    return store.tell(all_distinct(*schema.slot_vars))


# -- boolean subcategorization -------------------------------------------

def post_subcat(frame, store: Store, wf: dict[str, VarId],
                schema: frozenset[str] | None = None,
                complement_vars=()) -> bool:
    """Implications of one phrase occurrence: the phrase entails its
    compulsory members, a selected schema entails its optional members,
    and complement category variables stay within the frame."""
    ok = True
    phrase = Var(wf[frame.phrase])
    for c in sorted(frame.c):
        ok = ok and store.tell(bool_post(Implies(phrase, Var(wf[c]))))
    if schema is not None and schema:
        need = conj([Var(wf[o]) for o in sorted(schema)])
        ok = ok and store.tell(bool_post(Implies(phrase, need)))
    for v in complement_vars:
        ok = ok and store.tell(element(v, sorted(frame.m)))
    return ok


# -- cooccurrence restrictions --------------------------------------------

def _fcr_features(f: FCR) -> frozenset[str]:
    feats: set[str] = set()

    def walk(node: Formula):
        if isinstance(node, Var):
            feats.add(node.ref.feature)
        elif isinstance(node, Not):
            walk(node.arg)
        elif isinstance(node, (And, Or)):
            for a in node.args:
                walk(a)
        else:
            walk(node.lhs)
            walk(node.rhs)

    walk(f.formula)
    return frozenset(feats)


def _value_guard(fs: FeatureStructure, node: int, feature: str, value: str) -> VarId:
    """Boolean variable tied to 'the cell's value equals this atom'.
    Bound now if the value is known, or when it later arrives."""
    store = fs.store
    var = store.new_bool(f"{feature}[{value}]@{node}")
    node = fs.canon(node)

    def settle(cell: Cell) -> None:
        if cell.value is None or isinstance(cell.value, (Ref, tuple)):
            return
        if cell.feature != feature or fs.canon(cell.owner) != fs.canon(node):
            return
        mark = len(store._trail)
        ok = store._set_bool(var, cell.value == value)
        if ok:
            ok = store.propagate()
        if not ok:
            store._undo_to(mark)
            store._queue.clear()
            store._queued.clear()
            raise InconsistencyError(f"value restriction {feature}[{value}] violated")

    cell = fs.find(node, feature)
    if cell is not None and cell.value is not None:
        settle(cell)
    fs.value_watchers.append(settle)
    store._trail.append(lambda: fs.value_watchers.remove(settle))
    return var


def compile_fcr(f: FCR, fs: FeatureStructure, node: int,
                alphabet: frozenset[str] | None = None) -> Formula:
    """Instantiate the restriction at one node: bare literals become the
    feature's status variable (a valueless placeholder cell is created
    if the feature is absent), valued literals conjoin a value guard."""
    if alphabet is not None:
        unknown = _fcr_features(f) - alphabet
        if unknown:
            raise UsageError(f"fcr names unknown features: {sorted(unknown)}")
    node = fs.canon(node)

    def leaf(lit: FcrLiteral) -> Formula:
        cell = fs.find(node, lit.feature)
        if cell is None:
            fs.add(((lit.feature, node, None, Bool3.UNKNOWN),))
            cell = fs.find(node, lit.feature)
        if lit.value is None:
            return Var(cell.status)
        return And((Var(cell.status), Var(_value_guard(fs, node, lit.feature, lit.value))))

    def walk(g: Formula) -> Formula:
        if isinstance(g, Var):
            return leaf(g.ref)
        if isinstance(g, Not):
            return Not(walk(g.arg))
        if isinstance(g, And):
            return And(tuple(walk(a) for a in g.args))
        if isinstance(g, Or):
            return Or(tuple(walk(a) for a in g.args))
        return type(g)(walk(g.lhs), walk(g.rhs))

    return walk(f.formula)


def feature_alphabet(g: Grammar) -> frozenset[str]:
    feats = {"synsem", "loc", "cat", "head", "subj", "comps", "dtrs", *SLOTS}

    def walk(avm) -> None:
        if hasattr(avm, "value"):   # status annotation wrapper
            walk(avm.value)
        elif isinstance(avm, dict):
            for k, v in avm.items():
                feats.add(k)
                walk(v)
        elif isinstance(avm, tuple):
            for v in avm:
                walk(v)

    for entries in g.lexicon.values():
        for entry in entries:
            walk(entry.avm)
    return frozenset(feats)


def _reachable(fs: FeatureStructure, root: int) -> list[int]:
    seen: list[int] = []
    stack = [fs.canon(root)]
    while stack:
        i = stack.pop()
        if i in seen:
            continue
        seen.append(i)
        for cell in fs.cells_of(i):
            vals = cell.value if isinstance(cell.value, tuple) else (cell.value,)
            for v in vals:
                if isinstance(v, Ref):
                    stack.append(fs.canon(v.index))
    return sorted(seen)


def post_fcrs(fs: FeatureStructure, root: int, fcrs,
              alphabet: frozenset[str] | None = None) -> None:
    """Instantiate every restriction at every node of the sign that
    carries at least one of its features."""
    for node in _reachable(fs, root):
        for f in fcrs:
            feats = _fcr_features(f)
            if any(fs.find(node, feat) is not None for feat in feats):
                formula = compile_fcr(f, fs, node, alphabet)
                if not fs.store.tell(BoolConstraint(formula)):
                    raise InconsistencyError(f"cooccurrence restriction {f} violated")


# -- head feature sharing -------------------------------------------------

_HFP_PATTERN = (
    ("synsem", "M0", "M1", "g1"),
    ("loc", "M1", "M2", "g2"),
    ("cat", "M2", "M3", "g3"),
    ("dtrs", "M0", "D0", "g4"),
    ("head_dtr", "D0", "D1", "g5"),
    ("synsem", "D1", "D2", "g6"),
    ("loc", "D2", "D3", "g7"),
    ("cat", "D3", "D4", "g8"),
    ("head", "D4", "H", "g9"),
)


def apply_hfp(fs: FeatureStructure, root: int) -> FeatureStructure:
    """Post head sharing on a headed sign.  The match binds the status
    variables along both cat chains; their conjunction entails a fresh
    status under which the mother's head cell is installed as a
    reference to the head daughter's head node.  Installation happens
    only when the antecedent is entailed, possibly much later."""
    env = fs.delta(_HFP_PATTERN, {"M0": fs.canon(root)})
    if env is None:
        return fs
    store = fs.store
    guard = conj([Var(env[f"g{k}"]) for k in range(1, 10)])
    shared = store.new_bool(f"hfp@{env['M3']}")
    if not store.tell(bool_post(Implies(guard, Var(shared)))):
        raise InconsistencyError("head sharing rejected")
    target, head_value = env["M3"], env["H"]

    def fire(result: AskResult) -> None:
        if result is AskResult.ENTAILED:
            value = Ref(head_value) if isinstance(head_value, int) else head_value
            fs.add((("head", target, value, shared),))

    store.post_ask(BoolConstraint(guard), fire)
    return fs


def apply_valency(fs: FeatureStructure, root: int, *,
                  realized_subj=(), realized_comps=()) -> FeatureStructure:
    """Write the mother's valency lists: the head daughter's lists with
    the realized daughters cancelled from the end."""
    head = fs.resolve(("dtrs", "head_dtr"), root)
    if not isinstance(head, int):
        return fs
    cat = fs.resolve(CAT_PATH, root)
    if not isinstance(cat, int):
        raise UsageError("mother sign has no category node")
    lists = []
    for feat in ("subj", "comps"):
        cell = fs.lookup(CAT_PATH + (feat,), head)
        lists.append(tuple(cell.value) if cell is not None and cell.value else ())
    mother_subj = _cancel(lists[0], tuple(realized_subj), "subj")
    mother_comps = _cancel(lists[1], tuple(realized_comps), "comps")
    fs.add((("subj", cat, mother_subj, Bool3.TRUE),
            ("comps", cat, mother_comps, Bool3.TRUE)))
    return fs


# -- sign construction ----------------------------------------------------

def _merge_avm(entry: LexEntry) -> dict:
    def deep(dst: dict, extra: dict) -> dict:
        out = dict(dst)
        for k, v in extra.items():
            if k in out:
                cur = out[k]
                inner = cur.value if hasattr(cur, "value") else cur
                if not (isinstance(inner, dict) and isinstance(v, dict)):
                    raise UsageError(f"lexical entry reserves {k!r}")
                merged = deep(inner, v)
                out[k] = replace(cur, value=merged) if hasattr(cur, "value") else merged
            else:
                out[k] = v
        return out

    return deep(entry.avm, {"synsem": {"loc": {"cat": {
        "subj": tuple(entry.subj), "comps": tuple(entry.subcat)}}}})


def lexical_sign(fs: FeatureStructure, entry: LexEntry) -> Sign:
    """Insert one lexical entry; entry features are realized (status
    true) unless the entry text says otherwise."""
    root = fs.encode_node(_merge_avm(entry), default_status=Bool3.TRUE)
    wf = fs.store.new_bool(f"wf:{entry.form}")
    return Sign(fs, root, entry.category, wf, schema=entry.schema)


def _mother_sign(fs: FeatureStructure, category: str) -> Sign:
    root = fs.encode_node({"synsem": {"loc": {"cat": {}}}},
                          default_status=Bool3.TRUE)
    cat = fs.resolve(CAT_PATH, root)
    fs.add((("subj", cat, None, Bool3.UNKNOWN),
            ("comps", cat, None, Bool3.UNKNOWN)))
    wf = fs.store.new_bool(f"wf:{category}")
    return Sign(fs, root, category, wf)


# -- pipeline -------------------------------------------------------------

class _Rejected(Exception):
    pass


def _build_tree(tree, tagging, g: Grammar, strategy: str, stats: HpsgStats,
                alphabet: frozenset[str], trace=None) -> Sign | None:
    store = Store(trace=trace)
    fs = FeatureStructure(store)
    active = strategy == "active"
    leaves = iter(tagging)
    deferred: list = []
    parts: list[tuple[str, int, VarId]] = []

    def gate(fn) -> None:
        if active:
            fn()
        else:
            deferred.append(fn)

    def check(t: LocalTree) -> None:
        result = check_local_tree(t, g)
        if not result.ok:
            raise _Rejected(result.violations)

    def build(node) -> Sign:
        label, children = node
        if not children:
            entry = next(leaves)
            stats.expansions += 1
            sign = lexical_sign(fs, entry)
            parts.append((label, sign.root, sign.wf))
            gate(lambda: post_fcrs(fs, sign.root, g.fcrs, alphabet))
            def assert_wf(s=sign):
                if not store.tell(bool_post(Var(s.wf))):
                    raise InconsistencyError(f"{s.category} entry inconsistent")
            gate(assert_wf)
            return sign

        dsigns = [build(child) for child in children]
        stats.expansions += 1
        daughters = tuple((child[0], s) for child, s in zip(children, dsigns))
        t = LocalTree(label, daughters)
        gate(lambda: check(t))

        hi = _head_index(label, daughters, g)
        if hi is None:
            hi = 0   # headless trees fail the projection gate anyway
        head = dsigns[hi]
        sisters = [(cat, s) for k, (cat, s) in enumerate(daughters) if k != hi]
        head_subj, head_comps = valency_of(head)
        subj_r, comps_r, _, _ = _split_realized(
            head_subj, head_comps, tuple(cat for cat, _ in sisters))
        rem_c, rem_s = list(comps_r), list(subj_r)
        comp_pairs, subj_signs = [], []
        for cat, s in sisters:
            if cat in rem_c:
                rem_c.remove(cat)
                comp_pairs.append((cat, s))
            else:
                rem_s.remove(cat)
                subj_signs.append(s)
        comp_signs = [s for _, s in comp_pairs]

        mother = _mother_sign(fs, label)
        parts.append((label, mother.root, mother.wf))
        schema = attach_daughters(fs, mother, head,
                                  subj=subj_signs, comps=comp_signs)
        if not post_unicity(schema, store):
            raise InconsistencyError("daughter slots are not distinct")
        apply_hfp(fs, mother.root)
        apply_valency(fs, mother.root,
                      realized_subj=subj_r, realized_comps=comps_r)

        frame = g.frames.get(label)
        if frame is not None:
            wf_map = {label: mother.wf}
            realized = {cat: s.wf for cat, s in daughters}
            comp_vars = []
            for member in frame.m:
                wf_map[member] = realized.get(member) or store.new_bool(f"wf:{member}?")
                if member not in realized:
                    if not store.tell(bool_post(Not(Var(wf_map[member])))):
                        raise InconsistencyError("unrealized member already forced")
            for cat, _ in comp_pairs:
                v = store.new_var(sorted(c.name for c in g.categories()),
                                  name=f"compcat:{cat}", closed=True)
                comp_vars.append(v)
                if not store.tell(eq(v, cat)):
                    raise InconsistencyError("complement category excluded")

            def booleans():
                if not post_subcat(frame, store, wf_map, head.schema, comp_vars):
                    raise InconsistencyError(f"subcategorization of {label} rejected")
            gate(booleans)
        return mother

    try:
        root_sign = build(tree)
        for fn in deferred:
            fn()
        if not store.tell(bool_post(Var(root_sign.wf))):
            return None
    except (_Rejected, InconsistencyError):
        return None
    finally:
        stats.completeness_tests += store.counters.completeness_tests
        stats.propagation_steps += store.counters.propagation_steps
        stats.ask_evaluations += store.counters.ask_evaluations

    root_sign.parts = tuple(parts)
    return root_sign


def parse_hpsg(words, g: Grammar, *, strategy: str = "active",
               limit: int | None = None, trace=None) -> tuple[tuple[Sign, ...], HpsgStats]:
    """Look words up, parse each tagging, and build signs for every
    distinct tree; returns the consistent root signs."""
    words = tuple(words)
    if not words:
        raise UsageError("empty input")
    if strategy not in ("active", "gentest"):
        raise UsageError(f"unknown strategy {strategy!r}")
    if limit is not None and limit <= 0:
        return (), HpsgStats()
    choices = []
    for w in words:
        entries = g.entries(w)
        if not entries:
            raise UsageError(f"unknown word {w!r}")
        choices.append(entries)
    alphabet = feature_alphabet(g)
    stats = HpsgStats()
    signs: list[Sign] = []

    for tagging in itertools.product(*choices):
        cats = tuple(e.category for e in tagging)
        derivs, cfg_stats = parse(cats, g, strategy=strategy, trace=trace)
        stats.windows_tried += cfg_stats.windows_tried
        stats.reductions_applied += cfg_stats.reductions_applied
        stats.backtracks += cfg_stats.backtracks
        stats.completeness_tests += cfg_stats.completeness_tests
        stats.propagation_steps += cfg_stats.propagation_steps
        stats.ask_evaluations += cfg_stats.ask_evaluations
        trees = []
        for d in derivs:
            tree = derivations_to_tree(d, cats)
            if tree not in trees:
                trees.append(tree)
        for tree in trees:
            stats.trees_considered += 1
            sign = _build_tree(tree, tagging, g, strategy, stats, alphabet, trace)
            if sign is not None:
                stats.signs_accepted += 1
                signs.append(sign)
                if limit is not None and len(signs) >= limit:
                    return tuple(signs), stats
    return tuple(signs), stats


def sign_dump(sign: Sign, *, statuses: bool = False) -> str:
    store = sign.fs.store
    wf = " ".join(f"{cat}@{sign.fs.canon(root)}={store.bool_value(var).value}"
                  for cat, root, var in sign.parts)
    return sign.fs.dump(statuses=statuses) + "\n" + f"WF {wf}".rstrip()
