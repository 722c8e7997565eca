import pytest

from clparse.constraints import bool_post, eq
from clparse.errors import InconsistencyError, UsageError
from clparse.fstruct import Bool3, FeatureStructure, Ref
from clparse.grammar import load_grammar, load_grammar_file, parse_fcr
from clparse.hpsg import (
    DtrsSchema,
    LocalTree,
    Sign,
    _cancel,
    _split_realized,
    apply_hfp,
    apply_valency,
    attach_daughters,
    check_local_tree,
    compile_fcr,
    feature_alphabet,
    lexical_sign,
    parse_hpsg,
    post_fcrs,
    post_subcat,
    post_unicity,
    sign_dump,
    valency_of,
)
from clparse.logic import Not, Var
from clparse.store import Store

TOY_LEX = "grammars/toy_lex.clg"

CAT = ("synsem", "loc", "cat")


@pytest.fixture(scope="module")
def toy():
    return load_grammar_file(TOY_LEX)


def fresh():
    st = Store()
    return st, FeatureStructure(st)


def entry_sign(g, form, fs):
    return lexical_sign(fs, g.entries(form)[0])


# -- local tree gate ------------------------------------------------------


def test_np_det_nm_is_well_formed(toy):
    st, fs = fresh()
    det = entry_sign(toy, "the", fs)
    nm = entry_sign(toy, "cat", fs)
    result = check_local_tree(LocalTree("NP", (("Det", det), ("Nm", nm))), toy)
    assert result.ok
    assert result.violations == ()


def test_precedence_violation(toy):
    st, fs = fresh()
    det = entry_sign(toy, "the", fs)
    nm = entry_sign(toy, "cat", fs)
    result = check_local_tree(LocalTree("NP", (("Nm", nm), ("Det", det))), toy)
    assert not result.ok
    assert [v.kind for v in result.violations] == ["precedence"]


def test_distinctness_same_sign_twice(toy):
    st, fs = fresh()
    det = entry_sign(toy, "the", fs)
    result = check_local_tree(LocalTree("NP", (("Det", det), ("Det", det))), toy)
    kinds = {v.kind for v in result.violations}
    assert "distinctness" in kinds
    # nothing projects NP here either
    assert "projection" in kinds


def test_distinctness_needs_same_reference():
    g = load_grammar("rule X -> A A. proj A = X. start X.")
    st, fs = fresh()
    a1 = Sign(fs, fs.encode_node({"synsem": {"loc": {"cat": {}}}}), "A", st.new_bool())
    a2 = Sign(fs, fs.encode_node({"synsem": {"loc": {"cat": {}}}}), "A", st.new_bool())
    tree = LocalTree("X", (("A", a1), ("A", a2)))
    kinds = {v.kind for v in check_local_tree(tree, g).violations}
    assert "distinctness" not in kinds
    same = LocalTree("X", (("A", a1), ("A", a1)))
    kinds = {v.kind for v in check_local_tree(same, g).violations}
    assert "distinctness" in kinds


def test_rule_star_opts_out_of_distinctness():
    g = load_grammar("rule* X -> A A. proj A = X. start X.")
    st, fs = fresh()
    a = Sign(fs, fs.encode_node({"synsem": {"loc": {"cat": {}}}}), "A", st.new_bool())
    tree = LocalTree("X", (("A", a), ("A", a)))
    kinds = {v.kind for v in check_local_tree(tree, g).violations}
    assert "distinctness" not in kinds


def test_dominance_violation(toy):
    result = check_local_tree(LocalTree("S", (("NP", None), ("PP", None))), toy)
    assert "dominance" in {v.kind for v in result.violations}


def test_valency_violation(toy):
    st, fs = fresh()
    vb = entry_sign(toy, "sleeps", fs)
    det = entry_sign(toy, "the", fs)
    result = check_local_tree(LocalTree("VP", (("Vb", vb), ("Det", det))), toy)
    assert "valency" in {v.kind for v in result.violations}


def test_projection_violation(toy):
    result = check_local_tree(LocalTree("VP", (("NP", None),)), toy)
    assert "projection" in {v.kind for v in result.violations}


def test_local_tree_needs_daughters(toy):
    with pytest.raises(UsageError):
        check_local_tree(LocalTree("NP", ()), toy)


# -- valency bookkeeping ---------------------------------------------------


def test_cancellation_is_suffixwise():
    assert _cancel(("Det", "PP"), (), "comps") == ("Det", "PP")
    assert _cancel(("Det", "PP"), ("PP",), "comps") == ("Det",)
    assert _cancel(("Det", "PP"), ("Det", "PP"), "comps") == ()
    with pytest.raises(InconsistencyError):
        _cancel(("Det", "PP"), ("Det",), "comps")
    with pytest.raises(InconsistencyError):
        _cancel(("NP",), ("NP", "NP"), "subj")


def test_split_realized_prefers_complements():
    split = _split_realized(("NP",), ("Det", "PP"), ("PP", "NP"))
    assert split == (("NP",), ("PP",), (), ("Det",))


def test_split_realized_rejects_strangers():
    with pytest.raises(InconsistencyError):
        _split_realized((), (), ("PP",))


def test_valency_of_defaults_to_empty(toy):
    st, fs = fresh()
    sign = Sign(fs, fs.encode_node({"synsem": {"loc": {"cat": {}}}}), "X", st.new_bool())
    assert valency_of(sign) == ((), ())
    vb = entry_sign(toy, "sleeps", fs)
    assert valency_of(vb) == (("NP",), ())


def test_apply_valency_writes_mother_lists():
    st, fs = fresh()
    m = fs.encode_node({
        "synsem": {"loc": {"cat": {}}},
        "dtrs": {"head_dtr": {"synsem": {"loc": {"cat": {
            "subj": ("NP",), "comps": ("Det", "PP")}}}}},
    }, default_status=Bool3.TRUE)
    apply_valency(fs, m, realized_comps=("PP",))
    assert fs.resolve(CAT + ("subj",), m) == ("NP",)
    assert fs.resolve(CAT + ("comps",), m) == ("Det",)


def test_apply_valency_over_saturation():
    st, fs = fresh()
    m = fs.encode_node({
        "synsem": {"loc": {"cat": {}}},
        "dtrs": {"head_dtr": {"synsem": {"loc": {"cat": {
            "subj": (), "comps": ()}}}}},
    }, default_status=Bool3.TRUE)
    with pytest.raises(InconsistencyError):
        apply_valency(fs, m, realized_subj=("NP",))


# -- daughter slots ---------------------------------------------------------


def test_attach_daughters_builds_slots(toy):
    st, fs = fresh()
    vb = entry_sign(toy, "sleeps", fs)
    np = Sign(fs, fs.encode_node({"synsem": {"loc": {"cat": {}}}}), "NP", st.new_bool())
    mother = Sign(fs, fs.encode_node({"synsem": {"loc": {"cat": {}}}}), "S", st.new_bool())
    schema = attach_daughters(fs, mother, vb, subj=[np])
    assert fs.resolve(("dtrs", "head_dtr"), mother.root) == fs.canon(vb.root)
    assert fs.resolve(("dtrs", "subj_dtr"), mother.root) == fs.canon(np.root)
    assert len(schema.slot_vars) == 2
    assert post_unicity(schema, st)
    with pytest.raises(UsageError):
        attach_daughters(fs, mother, vb, subj=[np, np])


def test_unicity_detected_at_latest_on_assignment():
    st = Store()
    a, b, c = (st.new_var([1, 2], name=n, closed=True) for n in "abc")
    assert post_unicity(DtrsSchema(0, {}, (a, b, c)), st)   # a priori
    ok = st.tell(eq(a, 1))
    ok = ok and st.tell(eq(b, 2))
    ok = ok and st.tell(eq(c, 2))
    assert not ok


def test_unicity_prunes_two_slots():
    st = Store()
    a = st.new_var([1, 2], name="a", closed=True)
    b = st.new_var([1, 2], name="b", closed=True)
    assert post_unicity(DtrsSchema(0, {}, (a, b)), st)
    assert st.tell(eq(a, 1))
    assert list(st.domain(b)) == [2]


# -- boolean subcategorization ----------------------------------------------


def test_subcat_phrase_entails_compulsory_members(toy):
    st = Store()
    wf = {"NP": st.new_bool("NP"), "Det": st.new_bool("Det"), "Nm": st.new_bool("Nm")}
    assert post_subcat(toy.frames["NP"], st, wf)
    assert st.tell(bool_post(Not(Var(wf["Nm"]))))
    assert not st.tell(bool_post(Var(wf["NP"])))


def test_subcat_schema_requires_optional_members(toy):
    st = Store()
    wf = {"NP": st.new_bool("NP"), "Det": st.new_bool("Det"), "Nm": st.new_bool("Nm")}
    assert post_subcat(toy.frames["NP"], st, wf, schema=frozenset({"Det"}))
    assert st.tell(bool_post(Not(Var(wf["Det"]))))
    assert st.tell(bool_post(Var(wf["Nm"])))
    assert not st.tell(bool_post(Var(wf["NP"])))


def test_subcat_restricts_complement_categories(toy):
    st = Store()
    wf = {"NP": st.new_bool("NP"), "Det": st.new_bool("Det"), "Nm": st.new_bool("Nm")}
    v = st.new_var(["Det", "Nm", "Vb", "PP"], name="cat", closed=True)
    assert post_subcat(toy.frames["NP"], st, wf, complement_vars=[v])
    assert set(st.domain(v)) == {"Det", "Nm"}


# -- cooccurrence restrictions ------------------------------------------------


def test_fcr_realized_antecedent_forbids_consequent():
    st, fs = fresh()
    node = fs.encode_node({"pform": "with"}, default_status=Bool3.TRUE)
    f = parse_fcr("PFORM -> ~INDEX")
    assert st.tell(bool_post(compile_fcr(f, fs, node)))
    # the missing feature was materialized as a placeholder and pushed false
    assert fs.status_value("index", node) is Bool3.FALSE
    with pytest.raises(InconsistencyError):
        fs.set_status("index", Bool3.TRUE, node)


def test_fcr_value_literal_checks_the_atom():
    st, fs = fresh()
    node = fs.encode_node({"vform": "fin", "maj": "v"}, default_status=Bool3.TRUE)
    f = parse_fcr("VFORM -> MAJ[V]")
    assert st.tell(bool_post(compile_fcr(f, fs, node)))

    st2, fs2 = fresh()
    bad = fs2.encode_node({"vform": "fin", "maj": "n"}, default_status=Bool3.TRUE)
    assert not st2.tell(bool_post(compile_fcr(f, fs2, bad)))


def test_fcr_value_guard_waits_for_the_value():
    st, fs = fresh()
    node = fs.encode_node({"vform": "fin", "maj": None}, default_status=Bool3.TRUE)
    f = parse_fcr("VFORM -> MAJ[V]")
    assert st.tell(bool_post(compile_fcr(f, fs, node)))
    with pytest.raises(InconsistencyError):
        fs.add((("maj", node, "n", Bool3.TRUE),))

    st2, fs2 = fresh()
    late = fs2.encode_node({"vform": "fin", "maj": None}, default_status=Bool3.TRUE)
    assert st2.tell(bool_post(compile_fcr(f, fs2, late)))
    fs2.add((("maj", late, "v", Bool3.TRUE),))   # the sanctioned atom is fine


def test_fcr_unknown_feature_is_a_compile_error():
    st, fs = fresh()
    node = fs.encode_node({"pform": "with"}, default_status=Bool3.TRUE)
    f = parse_fcr("PFORM -> ~INDEX")
    with pytest.raises(UsageError):
        compile_fcr(f, fs, node, alphabet=frozenset({"pform"}))


@pytest.mark.parametrize("text", [
    "PFORM -> ~INDEX",
    "VFORM -> MAJ[V]",
    "PRD | VFORM -> VFORM[PAS] | VFORM[PRP]",
])
def test_canonical_restrictions_compile_and_post(text):
    st, fs = fresh()
    node = fs.encode_node({"maj": None}, default_status=Bool3.UNKNOWN)
    assert st.tell(bool_post(compile_fcr(parse_fcr(text), fs, node)))


def test_post_fcrs_instantiates_only_where_features_occur(toy):
    st, fs = fresh()
    sign = entry_sign(toy, "with", fs)
    post_fcrs(fs, sign.root, toy.fcrs, feature_alphabet(toy))
    head = fs.resolve(CAT + ("head",), sign.root)
    assert fs.status_value("index", head) is Bool3.FALSE


def test_feature_alphabet_collects_lexicon_and_skeleton(toy):
    feats = feature_alphabet(toy)
    for name in ("pform", "index", "maj", "vform", "case", "num", "cont",
                 "dtrs", "head_dtr", "comp_dtrs", "subj", "comps"):
        assert name in feats


# -- head feature sharing ------------------------------------------------------


def _headed_skeleton(fs, status):
    return fs.encode_node({
        "synsem": {"loc": {"cat": {}}},
        "dtrs": {"head_dtr": {"synsem": {"loc": {"cat": {"head": {"maj": "v"}}}}}},
    }, default_status=status)


def test_hfp_shares_the_head_node():
    st, fs = fresh()
    root = _headed_skeleton(fs, Bool3.TRUE)
    apply_hfp(fs, root)
    mother_head = fs.resolve(CAT + ("head",), root)
    daughter_head = fs.resolve(("dtrs", "head_dtr") + CAT + ("head",), root)
    assert mother_head == daughter_head
    # one node: a mutation through the daughter path shows through the mother
    fs.add((("vform", daughter_head, "fin", Bool3.TRUE),))
    assert fs.resolve(CAT + ("head", "vform"), root) == "fin"


def test_hfp_waits_for_all_nine_statuses():
    st, fs = fresh()
    root = _headed_skeleton(fs, Bool3.UNKNOWN)
    apply_hfp(fs, root)
    cat = fs.resolve(CAT, root)
    paths = ("synsem", "synsem.loc", "synsem.loc.cat",
             "dtrs", "dtrs.head_dtr", "dtrs.head_dtr.synsem",
             "dtrs.head_dtr.synsem.loc", "dtrs.head_dtr.synsem.loc.cat",
             "dtrs.head_dtr.synsem.loc.cat.head")
    for path in paths[:-1]:
        fs.set_status(path, Bool3.TRUE, root)
        assert fs.find(cat, "head") is None
    fs.set_status(paths[-1], Bool3.TRUE, root)
    cell = fs.find(cat, "head")
    assert cell is not None
    assert st.bool_value(cell.status) is Bool3.TRUE
    assert fs.canon(cell.value.index) == fs.resolve(
        ("dtrs", "head_dtr") + CAT + ("head",), root)


def test_hfp_does_not_fire_on_a_false_guard():
    st, fs = fresh()
    root = _headed_skeleton(fs, Bool3.UNKNOWN)
    apply_hfp(fs, root)
    fs.set_status("dtrs", Bool3.FALSE, root)
    for path in ("synsem", "synsem.loc", "synsem.loc.cat",
                 "dtrs.head_dtr", "dtrs.head_dtr.synsem",
                 "dtrs.head_dtr.synsem.loc", "dtrs.head_dtr.synsem.loc.cat",
                 "dtrs.head_dtr.synsem.loc.cat.head"):
        fs.set_status(path, Bool3.TRUE, root)
    assert fs.find(fs.resolve(CAT, root), "head") is None


def test_hfp_without_a_match_changes_nothing():
    st, fs = fresh()
    root = fs.encode_node({"synsem": {"loc": {"cat": {"head": {"maj": "n"}}}}},
                          default_status=Bool3.TRUE)
    before = fs.dump(statuses=True)
    apply_hfp(fs, root)
    assert fs.dump(statuses=True) == before


# -- the sentence pipeline ------------------------------------------------------


def test_parse_the_cat_sleeps(toy):
    signs, stats = parse_hpsg(["the", "cat", "sleeps"], toy)
    assert len(signs) == 1
    sign = signs[0]
    assert sign.category == "S"
    assert valency_of(sign) == ((), ())
    assert stats.signs_accepted == 1
    assert stats.trees_considered == 1
    assert stats.expansions == 6


def test_head_is_shared_down_the_spine(toy):
    signs, _ = parse_hpsg(["the", "cat", "sleeps"], toy)
    fs, root = signs[0].fs, signs[0].root
    s_head = fs.resolve(CAT + ("head",), root)
    vp = fs.resolve(("dtrs", "head_dtr"), root)
    vp_head = fs.resolve(CAT + ("head",), vp)
    vb = fs.resolve(("dtrs", "head_dtr"), vp)
    vb_head = fs.resolve(CAT + ("head",), vb)
    assert s_head == vp_head == vb_head
    assert fs.resolve(("vform",), s_head) == "fin"
    # one shared node, not copies: write through the top, read at the bottom
    fs.add((("tense", s_head, "present", Bool3.TRUE),))
    assert fs.resolve(CAT + ("head", "tense"), vb) == "present"


def test_valency_is_conserved_at_every_reduction(toy):
    signs, _ = parse_hpsg(["the", "cat", "sleeps"], toy)
    sign = signs[0]
    fs = sign.fs
    cats = {fs.canon(r): c for c, r, _ in sign.parts}
    phrases = [fs.canon(r) for _, r, _ in sign.parts
               if fs.resolve(("dtrs",), fs.canon(r)) is not None]
    assert phrases
    for node in phrases:
        head = fs.resolve(("dtrs", "head_dtr"), node)
        subj_dtr = fs.resolve(("dtrs", "subj_dtr"), node)
        comps_cell = fs.lookup(("dtrs", "comp_dtrs"), node)
        realized_subj = (cats[subj_dtr],) if subj_dtr is not None else ()
        realized_comps = tuple(cats[fs.canon(ref.index)]
                               for ref in (comps_cell.value if comps_cell else ()))
        for feat, realized in (("subj", realized_subj), ("comps", realized_comps)):
            mother = fs.resolve(CAT + (feat,), node) or ()
            head_list = fs.resolve(CAT + (feat,), head) or ()
            assert tuple(mother) + realized == tuple(head_list)
    assert valency_of(sign) == ((), ())


def test_unknown_word_is_a_usage_error(toy):
    with pytest.raises(UsageError):
        parse_hpsg(["the", "dog", "sleeps"], toy)
    with pytest.raises(UsageError):
        parse_hpsg([], toy)
    with pytest.raises(UsageError):
        parse_hpsg(["the"], toy, strategy="eager")


def test_limit_caps_accepted_signs(toy):
    signs, _ = parse_hpsg(["the", "cat", "sleeps"], toy, limit=0)
    assert signs == ()
    signs, _ = parse_hpsg(["the", "cat", "sleeps"], toy, limit=5)
    assert len(signs) == 1


def test_strategies_accept_the_same_signs(toy):
    sa, ta = parse_hpsg(["the", "cat", "sleeps"], toy, strategy="active")
    sg, tg = parse_hpsg(["the", "cat", "sleeps"], toy, strategy="gentest")
    assert [sign_dump(s) for s in sa] == [sign_dump(s) for s in sg]
    assert ta.expansions <= tg.expansions


def test_active_stops_earlier_on_a_lexical_clash(toy):
    text = open(TOY_LEX).read() + "\nfcr MAJ -> ~CASE.\n"
    g = load_grammar(text)
    sa, ta = parse_hpsg(["the", "cat", "sleeps"], g, strategy="active")
    sg, tg = parse_hpsg(["the", "cat", "sleeps"], g, strategy="gentest")
    assert sa == sg == ()
    assert ta.expansions < tg.expansions


def test_schema_rejection_through_the_boolean_layer(toy):
    text = open(TOY_LEX).read() + (
        '\nrule NP -> Nm.'
        '\nlex "dog" Nm [synsem: [loc: [cat: [head: [maj: n]]]]] subcat [].\n')
    g = load_grammar(text)
    # "cat" selects the Det schema, so a determinerless NP is out
    signs, _ = parse_hpsg(["cat", "sleeps"], g)
    assert signs == ()
    # "dog" has no schema and is happy alone
    signs, _ = parse_hpsg(["dog", "sleeps"], g)
    assert len(signs) == 1
    assert valency_of(signs[0]) == ((), ())


def test_sign_dump_carries_a_wf_line(toy):
    signs, _ = parse_hpsg(["the", "cat", "sleeps"], toy)
    dump = sign_dump(signs[0])
    wf = dump.splitlines()[-1]
    assert wf.startswith("WF ")
    for cat in ("Det", "Nm", "NP", "Vb", "VP", "S"):
        assert f"{cat}@" in wf
    assert wf.count("=T") == 6
