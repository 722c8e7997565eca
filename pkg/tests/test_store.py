"""Store mechanics: domains, completeness, relations, resolvability
counting, snapshots, suspended asks.

The worst-case completeness-test counts are checked against closed
forms that were derived by hand from the event schedule (images close
one by one, the domain closes last, the checker re-scans on every
closure) and then confirmed by independent simulation before being
frozen here.
"""

import pytest

from clparse import (
    AskResult,
    Bool3,
    Store,
    UsageError,
    all_distinct,
    daughter,
    element,
    eq,
    in_relation,
    neq,
)


def binary_worst_case(m: int) -> int:
    return m * (m + 5) // 2


# -- variables and domains ---------------------------------------------------

def test_domain_order_preserved():
    s = Store()
    x = s.new_var(["c", "a", "b"])
    assert s.domain(x) == ("c", "a", "b")
    s.tell(neq(x, "a"))
    assert s.domain(x) == ("c", "b")


def test_value_only_when_singleton():
    s = Store()
    x = s.new_var([1, 2])
    assert s.value(x) is None
    s.tell(eq(x, 2))
    assert s.value(x) == 2


def test_foreign_and_dead_vars_rejected():
    s1, s2 = Store(), Store()
    x = s1.new_var([1])
    with pytest.raises(UsageError):
        s2.domain(x)
    snap = s1.snapshot()
    y = s1.new_var([1])
    s1.restore(snap)
    with pytest.raises(UsageError):
        s1.domain(y)


def test_bool_and_seq_vars():
    s = Store()
    b = s.new_bool("b")
    assert s.bool_value(b) is Bool3.UNKNOWN
    assert s._set_bool(b, True)
    assert s.bool_value(b) is Bool3.TRUE
    assert s._set_bool(b, True)      # idempotent
    assert not s._set_bool(b, False)  # clash
    q = s.new_seq("q")
    assert s.seq_value(q) is None
    assert s._bind_seq(q, ("a", "b"))
    assert s.seq_value(q) == ("a", "b")
    assert not s._bind_seq(q, ("a",))


def test_close_domain_only_fd():
    s = Store()
    b = s.new_bool()
    with pytest.raises(UsageError):
        s.close_domain(b)


# -- tell --------------------------------------------------------------------

def test_tell_failure_restores_store():
    s = Store()
    x = s.new_var([1, 2])
    s.tell(neq(x, 1))
    fp = s.fingerprint()
    assert not s.tell(eq(x, 1))
    assert s.fingerprint() == fp
    assert s.domain(x) == (2,)


def test_tell_is_idempotent():
    s = Store()
    x = s.new_var([1, 2, 3])
    c = neq(x, 1)
    assert s.tell(c)
    n = len(s.posted)
    assert s.tell(neq(x, 1))    # equal constraint, separate object
    assert len(s.posted) == n


def test_propagation_reaches_fixpoint():
    s = Store()
    x = s.new_var([1, 2])
    y = s.new_var([1, 2])
    z = s.new_var([1, 2])
    s.tell(all_distinct(x, y, z))
    # three variables over two values: determining one cascades through
    # two elimination rounds to a wipe-out inside a single tell
    assert not s.tell(eq(x, 1))
    assert s.domain(x) == (1, 2) and s.domain(y) == (1, 2) and s.domain(z) == (1, 2)


def test_all_distinct_pigeonhole_two_values():
    s = Store()
    x = s.new_var([1, 2])
    y = s.new_var([1, 2])
    s.tell(all_distinct(x, y))
    assert s.tell(eq(x, 1))
    assert s.value(y) == 2


# -- ask ---------------------------------------------------------------------

def test_ask_unknown_until_complete():
    s = Store()
    x = s.new_var(["a"])
    c = element(x, ["a", "b"])
    assert s.ask(c) is AskResult.UNKNOWN
    s.close_domain(x)
    assert s.ask(c) is AskResult.ENTAILED


def test_ask_disentailed():
    s = Store()
    x = s.new_var(["a", "b"], closed=True)
    assert s.ask(element(x, ["c"])) is AskResult.DISENTAILED
    assert s.ask(element(x, ["a"])) is AskResult.UNKNOWN


def test_ask_counts_evaluations():
    s = Store()
    x = s.new_var(["a"], closed=True)
    before = s.counters.ask_evaluations
    s.ask(element(x, ["a"]))
    assert s.counters.ask_evaluations == before + 1


def test_post_ask_fires_once_on_closure():
    s = Store()
    x = s.new_var(["a", "b"])
    got = []
    s.post_ask(eq(x, "a"), got.append)
    s.tell(eq(x, "a"))
    assert got == []
    s.close_domain(x)
    assert got == [AskResult.ENTAILED]
    s.tell(neq(x, "zzz"))   # later events do not re-fire
    assert got == [AskResult.ENTAILED]


def test_post_ask_immediate_when_decidable():
    s = Store()
    x = s.new_var(["a"], closed=True)
    got = []
    pa = s.post_ask(eq(x, "a"), got.append)
    assert got == [AskResult.ENTAILED]
    assert not pa.alive


# -- relations and resolvability ----------------------------------------------

def test_relation_basics():
    s = Store()
    r = s.new_relation("dtr", 2)
    assert r.add("n1", "x")
    assert r.add("n2", "x")
    assert r.add("n1", "x")      # duplicate fact: no-op
    assert r.group(("x",)) == ("n1", "n2")
    assert ("n1", "x") in r and ("n9", "x") not in r
    r.close_group("x")
    with pytest.raises(UsageError):
        r.add("n3", "x")
    assert r.group_closed(("x",))


def test_relation_arity_checked():
    s = Store()
    r = s.new_relation("r", 3)
    with pytest.raises(UsageError):
        r.add("a", "b")
    with pytest.raises(UsageError):
        r.close_group("b")
    with pytest.raises(UsageError):
        s.new_relation("r", 1)


def test_daughter_resolves_on_group_closure():
    s = Store()
    y = s.new_var(["n1", "n2", "n3"], name="y")
    r = s.new_relation("dtr", 2)
    r.add("n1", "x")
    r.add("n2", "x")
    c = daughter(y, "x", r)
    s.tell(c)
    assert s.domain(y) == ("n1", "n2", "n3")
    assert s.ask(c) is AskResult.UNKNOWN
    r.close_group("x")
    assert s.domain(y) == ("n1", "n2")
    assert s.is_complete(y)
    assert s.ask(c) is AskResult.ENTAILED


def test_fact_additions_do_not_wake_resolvability():
    s = Store()
    u = s.new_var(range(10), name="u")
    v = s.new_var([0, 1], name="v", closed=True)
    r = s.new_relation("r", 2)
    c = in_relation(u, (v,), r)
    s.tell(c)
    base = s.counters.completeness_tests
    r.add(1, 0)
    r.add(2, 0)
    r.add(3, 1)
    assert s.counters.completeness_tests == base  # adds are silent


def test_binary_worst_case_counts():
    # groups close first (in domain order), the domain closes last
    for m in (1, 2, 3, 4, 8, 16):
        s = Store()
        u = s.new_var(range(10 * m), name="u")
        v = s.new_var(range(m), name="v")
        r = s.new_relation("r", 2)
        for k in range(m):
            r.add(k, k)
        c = in_relation(u, (v,), r)
        s.tell(c)
        base = s.counters.completeness_tests
        for k in range(m):
            r.close_group(k)
        s.close_domain(v)
        assert s.counters.completeness_tests - base == binary_worst_case(m)
        assert s.is_resolved(c)
        assert s.domain(u) == tuple(range(m))
        assert s.is_complete(u)


def test_binary_count_small_cases_explicit():
    # m=1: closure scan (1 group + 1 domain flag) + final domain pass (1)
    s = Store()
    u = s.new_var(range(5))
    v = s.new_var([0])
    r = s.new_relation("r", 2)
    r.add(0, 0)
    s.tell(in_relation(u, (v,), r))
    base = s.counters.completeness_tests
    r.close_group(0)
    assert s.counters.completeness_tests - base == 2
    s.close_domain(v)
    assert s.counters.completeness_tests - base == 3


def test_ternary_worst_case_counts():
    # the induced joint domain behaves like one binary domain of size
    # mv * mw; closing the first key variable alone stays silent
    for mv, mw in ((1, 1), (2, 2), (2, 3), (3, 3)):
        s = Store()
        M = mv * mw
        u = s.new_var(range(10 * M + 10), name="u")
        v = s.new_var(range(mv), name="v")
        w = s.new_var(range(mw), name="w")
        r = s.new_relation("r", 3)
        for a in range(mv):
            for b in range(mw):
                r.add(a * 100 + b, a, b)
        c = in_relation(u, (v, w), r)
        s.tell(c)
        base = s.counters.completeness_tests
        for a in range(mv):
            for b in range(mw):
                r.close_group(a, b)
        after_groups = s.counters.completeness_tests - base
        s.close_domain(v)
        assert s.counters.completeness_tests - base == after_groups
        s.close_domain(w)
        assert s.counters.completeness_tests - base == M * (M + 5) // 2
        assert s.is_resolved(c)


def test_late_post_resolves_immediately():
    s = Store()
    u = s.new_var(range(10))
    v = s.new_var([0, 1], closed=True)
    r = s.new_relation("r", 2)
    r.add(3, 0)
    r.add(4, 1)
    r.close_group(0)
    r.close_group(1)
    c = in_relation(u, (v,), r)
    s.tell(c)
    assert s.is_resolved(c)
    assert s.domain(u) == (3, 4)
    assert s.is_complete(u)


def test_resolvability_check_one_shot():
    s = Store()
    u = s.new_var(range(10))
    v = s.new_var([0, 1], closed=True)
    r = s.new_relation("r", 2)
    r.add(3, 0)
    r.add(4, 1)
    r.close_group(0)
    c = in_relation(u, (v,), r)
    ok, tests = s.resolvability_check(c)
    assert not ok and tests == 2          # group 0 closed, group 1 open
    r.close_group(1)
    ok, tests = s.resolvability_check(c)
    assert ok and tests == 3              # both groups + domain flag
    assert s.resolvability_check(eq(u, 3)) == (True, 0)


# -- snapshots ----------------------------------------------------------------

def test_restore_is_exact():
    s = Store()
    x = s.new_var([1, 2, 3])
    r = s.new_relation("r", 2)
    r.add(1, "k")
    snap = s.snapshot()
    fp = s.fingerprint()
    s.tell(neq(x, 2))
    r.add(2, "k")
    r.close_group("k")
    s.close_domain(x)
    s.restore(snap)
    assert s.fingerprint() == fp
    assert s.domain(x) == (1, 2, 3)
    assert not s.is_complete(x)
    assert r.group(("k",)) == (1,)
    assert not r.group_closed(("k",))


def test_restore_keeps_snapshot_live():
    s = Store()
    x = s.new_var([1, 2, 3])
    snap = s.snapshot()
    s.tell(neq(x, 1))
    s.restore(snap)
    assert snap.live
    s.tell(neq(x, 2))
    s.restore(snap)
    assert s.domain(x) == (1, 2, 3)


def test_restore_kills_younger_snapshots():
    s = Store()
    x = s.new_var([1, 2, 3])
    outer = s.snapshot()
    s.tell(neq(x, 1))
    inner = s.snapshot()
    s.restore(outer)
    assert not inner.live
    with pytest.raises(UsageError):
        s.restore(inner)


def test_restore_foreign_snapshot_rejected():
    s1, s2 = Store(), Store()
    snap = s1.snapshot()
    with pytest.raises(UsageError):
        s2.restore(snap)


def test_counters_survive_restore():
    s = Store()
    u = s.new_var(range(10))
    v = s.new_var([0], name="v")
    r = s.new_relation("r", 2)
    r.add(1, 0)
    s.tell(in_relation(u, (v,), r))
    snap = s.snapshot()
    r.close_group(0)
    s.close_domain(v)
    spent = s.counters.completeness_tests
    assert spent == 3
    s.restore(snap)
    assert s.counters.completeness_tests == spent   # cumulative
    # the same work after restore is counted again
    r.close_group(0)
    s.close_domain(v)
    assert s.counters.completeness_tests == 2 * spent


def test_trace_events():
    lines = []
    s = Store(trace=lines.append)
    x = s.new_var([1, 2], name="x")
    s.tell(neq(x, 1))
    s.close_domain(x)
    kinds = [ln.split()[1] for ln in lines]
    assert "post" in kinds and "prune" in kinds and "close" in kinds
    assert all(ln.startswith("EVENT ") for ln in lines)
