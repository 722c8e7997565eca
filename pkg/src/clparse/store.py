"""Finite-domain ask/tell constraint store with three-valued statuses.

The store holds three kinds of variables (finite-domain, boolean status,
sequence), incrementally described relations that model the structure
under analysis, a FIFO propagation queue, suspended asks woken by store
events, and a trail supporting snapshot/restore.

Domains only shrink; what grows is the model description.  Each domain
carries a completeness flag: until `close_domain` is called the current
value set is a partial description and entailment questions stay
unanswerable.  A constraint over such variables becomes *resolvable*
once every participating domain is complete; the recursive completeness
check is instrumented so the documented worst-case re-check schedule can
be measured exactly.

Counters (completeness tests, propagation steps, ask evaluations) are
cumulative: restore never rolls them back.
"""

from __future__ import annotations

import enum
import itertools
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable

from .errors import UsageError
from .logic import Bool3


class VarKind(enum.Enum):
    FD = "fd"
    BOOL = "bool"
    SEQ = "seq"


@dataclass(frozen=True)
class VarId:
    """Handle to a store variable.  Identity is (index, store)."""

    index: int
    store_id: int
    kind: VarKind
    name: str = field(compare=False, default="")

    def __repr__(self) -> str:
        return self.name or f"_{self.kind.value}{self.index}"


@dataclass
class Counters:
    completeness_tests: int = 0
    propagation_steps: int = 0
    ask_evaluations: int = 0

    def copy(self) -> "Counters":
        return replace(self)


class AskResult(enum.Enum):
    ENTAILED = "entailed"
    DISENTAILED = "disentailed"
    UNKNOWN = "unknown"


class _VarState:
    __slots__ = ("kind", "domain", "complete", "status", "seq")

    def __init__(self, kind: VarKind):
        self.kind = kind
        self.domain: dict | None = None  # ordered set for FD vars
        self.complete = False
        self.status = Bool3.UNKNOWN
        self.seq: tuple | None = None


class Snapshot:
    """A restorable mark.  Restoring to it keeps it live and kills every
    snapshot taken after it (LIFO unwind); restoring to a dead snapshot
    is a usage error."""

    __slots__ = ("_store", "_mark", "_live")

    def __init__(self, store: "Store", mark: int):
        self._store = store
        self._mark = mark
        self._live = True

    @property
    def live(self) -> bool:
        return self._live


class PendingAsk:
    """A suspended ask: re-examined on store events touching its
    variables, fires its callback once resolved, then retires."""

    __slots__ = ("constraint", "callback", "alive")

    def __init__(self, constraint, callback):
        self.constraint = constraint
        self.callback = callback
        self.alive = True


class Relation:
    """Incrementally described relation: the model side of the store.

    Facts accumulate monotonically.  A *group* is the image of the first
    argument position under fixed remaining arguments; closing a group
    declares that image complete, after which it accepts no more facts.
    Only closure events (not fact additions) can flip resolvability, so
    only they wake the resolvability checkers.
    """

    def __init__(self, store: "Store", name: str, arity: int):
        self._store = store
        self.name = name
        self.arity = arity
        self._facts: set[tuple] = set()
        self._groups: dict[tuple, dict] = {}
        self._closed: set[tuple] = set()

    def __contains__(self, fact) -> bool:
        return tuple(fact) in self._facts

    def group(self, key: tuple) -> tuple:
        return tuple(self._groups.get(tuple(key), ()))

    def group_closed(self, key: tuple) -> bool:
        return tuple(key) in self._closed

    def add(self, *fact) -> bool:
        """Tell one fact.  Returns the store's consistency flag."""
        if len(fact) != self.arity:
            raise UsageError(f"{self.name} expects arity {self.arity}")
        key = fact[1:]
        if key in self._closed:
            raise UsageError(f"group {key} of {self.name} is closed")
        if fact in self._facts:
            return True
        st = self._store
        mark = len(st._trail)
        self._facts.add(fact)
        bucket = self._groups.setdefault(key, {})
        fresh_bucket = len(bucket) == 0
        bucket[fact[0]] = None

        def undo():
            self._facts.discard(fact)
            bucket.pop(fact[0], None)
            if fresh_bucket:
                self._groups.pop(key, None)

        st._trail.append(undo)
        st._emit("fact", self.name, "-", repr(fact))
        return st._after_model_event(self, key, mark, closure=False)

    def close_group(self, *key) -> bool:
        """Declare the image under `key` complete.  Returns consistency."""
        key = tuple(key)
        if len(key) != self.arity - 1:
            raise UsageError(f"{self.name} group keys have arity {self.arity - 1}")
        if key in self._closed:
            return True
        st = self._store
        mark = len(st._trail)
        self._closed.add(key)
        st._trail.append(lambda: self._closed.discard(key))
        st._emit("close_group", self.name, "open", repr(key))
        return st._after_model_event(self, key, mark, closure=True)


class _ResolvabilityWatcher:
    """Event-driven completeness checker for one model-gated constraint.

    Wakes on group-closure events of the constraint's relation and on
    the closure of the last of its key-variable domains; every re-check
    walks the image groups in domain order, counting one completeness
    test per group consulted, plus one test for the (joint) domain flag
    unless that very closure was the waking event.
    """

    __slots__ = ("store", "constraint", "resolved")

    def __init__(self, store: "Store", constraint):
        self.store = store
        self.constraint = constraint
        self.resolved = False

    def on_model_event(self) -> None:
        self._attempt(domain_event=False)

    def on_domain_close(self) -> None:
        c = self.constraint
        if all(self.store.is_complete(v) for v in c.key_vars):
            self._attempt(domain_event=True)
        # otherwise the induced joint domain is still open: no event yet

    def _attempt(self, domain_event: bool) -> None:
        if self.resolved:
            return
        if self.store._recheck_resolvability(self.constraint, domain_event):
            self.resolved = True
            self.store._trail.append(lambda: setattr(self, "resolved", False))
            self.store._resolved.add(self.constraint)
            self.store._trail.append(lambda: self.store._resolved.discard(self.constraint))
            self.store._enqueue(self.constraint)


class Store:
    _ids = itertools.count(1)

    def __init__(self, trace: Callable[[str], None] | None = None):
        self._id = next(Store._ids)
        self._vars: dict[int, _VarState] = {}
        self._next_var = itertools.count(1)
        self._trail: list[Callable[[], None]] = []
        self._snapshots: list[Snapshot] = []
        self.posted: list = []
        self._posted_set: set = set()
        self._watching: dict[int, list] = {}
        self._queue: deque = deque()
        self._queued: set = set()
        self._asks: dict[object, list[PendingAsk]] = {}
        self._ask_wake: list = []
        self._draining = False
        self._watchers_rel: dict[int, list[_ResolvabilityWatcher]] = {}
        self._watchers_var: dict[int, list[_ResolvabilityWatcher]] = {}
        self._resolved: set = set()
        self.counters = Counters()
        self._trace = trace

    # -- variables ----------------------------------------------------

    def new_var(self, values, *, name: str = "", closed: bool = False) -> VarId:
        """Create a finite-domain variable over `values` (order kept).

        The domain starts incomplete -- a partial description that later
        information may be measured against -- unless `closed` is set.
        """
        state = _VarState(VarKind.FD)
        state.domain = dict.fromkeys(values)
        state.complete = closed
        return self._install(state, name)

    def new_bool(self, name: str = "") -> VarId:
        return self._install(_VarState(VarKind.BOOL), name)

    def new_seq(self, name: str = "") -> VarId:
        return self._install(_VarState(VarKind.SEQ), name)

    def _install(self, state: _VarState, name: str) -> VarId:
        idx = next(self._next_var)
        self._vars[idx] = state
        self._trail.append(lambda: self._vars.pop(idx, None))
        return VarId(idx, self._id, state.kind, name)

    def _state(self, v: VarId) -> _VarState:
        if not isinstance(v, VarId) or v.store_id != self._id:
            raise UsageError(f"{v!r} does not belong to this store")
        state = self._vars.get(v.index)
        if state is None:
            raise UsageError(f"{v!r} no longer exists (restored away?)")
        return state

    def domain(self, v: VarId) -> tuple:
        return tuple(self._state(v).domain)

    def value(self, v: VarId):
        """The single remaining value, or None if not yet determined."""
        dom = self._state(v).domain
        if len(dom) == 1:
            return next(iter(dom))
        return None

    def is_complete(self, v: VarId) -> bool:
        return self._state(v).complete

    def bool_value(self, v: VarId) -> Bool3:
        state = self._state(v)
        if state.kind is not VarKind.BOOL:
            raise UsageError(f"{v!r} is not a boolean variable")
        return state.status

    def seq_value(self, v: VarId) -> tuple | None:
        return self._state(v).seq

    # -- low-level mutations (trailed) ----------------------------------

    def _prune(self, v: VarId, allowed) -> bool:
        """Intersect v's domain with `allowed`.  False iff emptied."""
        state = self._state(v)
        old = state.domain
        new = {val: None for val in old if val in allowed}
        if len(new) == len(old):
            return True
        state.domain = new
        self._trail.append(lambda: setattr(state, "domain", old))
        self._emit("prune", v, self._fmt_dom(old), self._fmt_dom(new))
        self._touch_var(v)
        return len(new) > 0

    def _set_bool(self, v: VarId, flag: bool) -> bool:
        state = self._state(v)
        if state.status.known:
            return state.status is Bool3.of(flag)
        state.status = Bool3.of(flag)
        self._trail.append(lambda: setattr(state, "status", Bool3.UNKNOWN))
        self._emit("status", v, "U", state.status.value)
        self._touch_var(v)
        return True

    def _bind_seq(self, v: VarId, value: tuple) -> bool:
        state = self._state(v)
        if state.seq is not None:
            return state.seq == value
        state.seq = tuple(value)
        self._trail.append(lambda: setattr(state, "seq", None))
        self._emit("bind", v, "-", repr(value))
        self._touch_var(v)
        return True

    def _touch_var(self, v: VarId) -> None:
        for c in self._watching.get(v.index, ()):
            self._enqueue(c)
        self._ask_wake.append(("v", v.index))

    def _mark_complete(self, v: VarId) -> None:
        """Flag v's domain complete and fire the closure event, without
        propagating (safe to call from inside a filter)."""
        state = self._state(v)
        if state.kind is not VarKind.FD:
            raise UsageError("only finite-domain variables can be closed")
        if state.complete:
            return
        state.complete = True
        self._trail.append(lambda: setattr(state, "complete", False))
        self._emit("close", v, "open", "closed")
        for w in list(self._watchers_var.get(v.index, ())):
            w.on_domain_close()
        for c in self._watching.get(v.index, ()):
            self._enqueue(c)
        self._ask_wake.append(("v", v.index))

    def close_domain(self, v: VarId) -> bool:
        """Flag v's domain as a complete partial description.

        This is the event that lets suspended asks and resolvability
        checks over v fire.  Returns the store's consistency flag.
        """
        if self._state(v).complete:
            return True
        mark = len(self._trail)
        self._mark_complete(v)
        if not self.propagate():
            self._undo_to(mark)
            self._queue.clear()
            self._queued.clear()
            return False
        self._drain_wakeups()
        return True

    # -- relations ------------------------------------------------------

    def new_relation(self, name: str, arity: int) -> Relation:
        if arity < 2:
            raise UsageError("relations need arity >= 2")
        return Relation(self, name, arity)

    def _after_model_event(self, rel: Relation, key: tuple, mark: int, closure: bool) -> bool:
        if closure:
            for w in list(self._watchers_rel.get(id(rel), ())):
                w.on_model_event()
        self._ask_wake.append(("r", id(rel)))
        if not self.propagate():
            self._undo_to(mark)
            self._queue.clear()
            self._queued.clear()
            return False
        self._drain_wakeups()
        return True

    # -- resolvability ----------------------------------------------------

    def _recheck_resolvability(self, c, domain_event: bool) -> bool:
        """One run of the completeness recursion over c's image groups.

        Every group consulted counts as one completeness test; the final
        (joint) domain flag counts as one more unless `domain_event`
        says this very check was woken by that closure.
        """
        for key in c.image_keys(self):
            self.counters.completeness_tests += 1
            if not c.relation.group_closed(key):
                return False
        if c.key_vars and not domain_event:
            self.counters.completeness_tests += 1
            if not all(self.is_complete(v) for v in c.key_vars):
                return False
        return True

    def resolvability_check(self, c) -> tuple[bool, int]:
        """One-shot resolvability test.  Returns (resolvable, tests_run)."""
        if not getattr(c, "model_gated", False):
            return True, 0
        before = self.counters.completeness_tests
        ok = self._recheck_resolvability(c, domain_event=False)
        return ok, self.counters.completeness_tests - before

    def is_resolved(self, c) -> bool:
        return c in self._resolved

    # -- tell / ask -------------------------------------------------------

    def tell(self, c) -> bool:
        """Post a constraint and propagate to fixpoint.

        Returns True if the store stays consistent; on inconsistency the
        store is restored to its pre-tell state (counters excepted) and
        False comes back.  Reposting an identical constraint is a no-op.
        """
        self._check_vars(c)
        if c in self._posted_set:
            return True
        mark = len(self._trail)
        self.posted.append(c)
        self._posted_set.add(c)

        def undo_post():
            self.posted.pop()
            self._posted_set.discard(c)

        self._trail.append(undo_post)
        for v in c.vars():
            bucket = self._watching.setdefault(v.index, [])
            bucket.append(c)
            self._trail.append(lambda b=bucket: b.pop())
        if getattr(c, "model_gated", False):
            watcher = _ResolvabilityWatcher(self, c)
            rel_bucket = self._watchers_rel.setdefault(id(c.relation), [])
            rel_bucket.append(watcher)
            self._trail.append(lambda: rel_bucket.pop())
            for v in c.key_vars:
                var_bucket = self._watchers_var.setdefault(v.index, [])
                var_bucket.append(watcher)
                self._trail.append(lambda b=var_bucket: b.pop())
            if c.key_vars and all(self.is_complete(v) for v in c.key_vars):
                watcher.on_model_event()  # late post: domains already closed
            elif not c.key_vars:
                watcher.on_model_event()
        self._emit("post", c, "-", "-")
        ok = c.post(self)
        if ok:
            self._enqueue(c)
            ok = self.propagate()
        if not ok:
            self._undo_to(mark)
            self._queue.clear()
            self._queued.clear()
            self._emit("fail", c, "-", "-")
            return False
        self._drain_wakeups()
        return True

    def ask(self, c) -> AskResult:
        """Query entailment without changing the description.

        Entailed iff c holds under every assignment the current domains
        admit, disentailed iff under none; unknown otherwise, including
        whenever some involved domain is not yet complete.
        """
        self._check_vars(c)
        self.counters.ask_evaluations += 1
        return c.ask_value(self)

    def post_ask(self, c, callback: Callable[[AskResult], None]) -> PendingAsk:
        """Suspend an ask: evaluate now, else re-examine on each event
        touching its variables; fire `callback` once and retire."""
        self._check_vars(c)
        pa = PendingAsk(c, callback)
        res = self.ask(c)
        if res is not AskResult.UNKNOWN:
            pa.alive = False
            callback(res)
            return pa
        keys = [("v", v.index) for v in c.vars()]
        if getattr(c, "model_gated", False):
            keys.append(("r", id(c.relation)))
        for key in keys:
            bucket = self._asks.setdefault(key, [])
            bucket.append(pa)
            self._trail.append(lambda b=bucket, p=pa: b.remove(p))
        return pa

    def _drain_wakeups(self) -> None:
        if self._draining:
            return
        self._draining = True
        try:
            while self._ask_wake:
                key = self._ask_wake.pop()
                for pa in list(self._asks.get(key, ())):
                    if not pa.alive:
                        continue
                    res = self.ask(pa.constraint)
                    if res is not AskResult.UNKNOWN:
                        pa.alive = False
                        self._trail.append(lambda p=pa: setattr(p, "alive", True))
                        pa.callback(res)
        finally:
            self._draining = False

    def _check_vars(self, c) -> None:
        for v in c.vars():
            self._state(v)

    # -- propagation --------------------------------------------------------

    def _enqueue(self, c) -> None:
        if c not in self._queued:
            self._queue.append(c)
            self._queued.add(c)

    def propagate(self) -> bool:
        """Run filtering to fixpoint (FIFO).  False on inconsistency;
        unlike tell, a bare propagate does not restore anything."""
        for state in self._vars.values():
            if state.kind is VarKind.FD and not state.domain:
                return False
        while self._queue:
            c = self._queue.popleft()
            self._queued.discard(c)
            self.counters.propagation_steps += 1
            if not c.filter(self):
                self._emit("fail", c, "-", "-")
                return False
        return True

    # -- snapshot / restore ---------------------------------------------------

    def snapshot(self) -> Snapshot:
        snap = Snapshot(self, len(self._trail))
        self._snapshots.append(snap)
        return snap

    def restore(self, snap: Snapshot) -> None:
        """Rewind to `snap` (which stays live; younger snapshots die).
        Counters are not rolled back."""
        if snap._store is not self:
            raise UsageError("snapshot belongs to a different store")
        if not snap._live:
            raise UsageError("snapshot is dead (already unwound past)")
        while self._snapshots and self._snapshots[-1] is not snap:
            self._snapshots.pop()._live = False
        if not self._snapshots:
            raise UsageError("snapshot not on the live stack")
        self._undo_to(snap._mark)
        self._queue.clear()
        self._queued.clear()
        self._ask_wake.clear()

    def _undo_to(self, mark: int) -> None:
        while len(self._trail) > mark:
            self._trail.pop()()

    # -- diagnostics ------------------------------------------------------------

    def fingerprint(self) -> tuple:
        """Hashable summary of variable state; used to check that
        restore is exact."""
        rows = []
        for idx in sorted(self._vars):
            state = self._vars[idx]
            if state.kind is VarKind.FD:
                rows.append((idx, tuple(state.domain), state.complete))
            elif state.kind is VarKind.BOOL:
                rows.append((idx, state.status.value))
            else:
                rows.append((idx, state.seq))
        return tuple(rows), len(self.posted)

    @staticmethod
    def _fmt_dom(dom) -> str:
        return "{" + ",".join(str(v) for v in dom) + "}"

    def _emit(self, kind: str, subject, before: str, after: str) -> None:
        if self._trace:
            self._trace(f"EVENT {kind} {subject!r} {before} {after}")
