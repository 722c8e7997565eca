"""Concurrent-constraint parsing toolkit.

A finite-domain ask/tell store with completeness-aware entailment, a
flat indexed representation of typed feature structures, context-free
parsing by constraint-driven window splitting, and an HPSG-style
licensing pipeline on top of both.
"""

from .errors import ClparseError, GrammarError, InconsistencyError, UsageError
from .logic import (
    And,
    Bool3,
    Const,
    Equiv,
    Formula,
    Implies,
    Not,
    Or,
    Var,
    conj,
    disj,
    eval_formula,
    format_formula,
    parse_formula,
)
from .store import AskResult, Counters, Relation, Snapshot, Store, VarId, VarKind
from .constraints import (
    AllDistinct,
    BoolConstraint,
    Concat3,
    Constraint,
    Daughter,
    Element,
    Eq,
    InRelation,
    Neq,
    Size,
    all_distinct,
    bool_post,
    concat3,
    daughter,
    element,
    eq,
    in_relation,
    neq,
    parse_constraint,
    size,
)
from .fstruct import Ann, Cell, FeatureStructure, Ref, avm_equal, encode, parse_avm
from .grammar import (
    FCR,
    FcrLiteral,
    Frame,
    Grammar,
    LexEntry,
    PSRule,
    load_grammar,
    load_grammar_file,
    parse_fcr,
)
from .cfg import (
    ParseStats,
    derivations_to_tree,
    format_derivation,
    oracle_parse,
    parse,
    parse_derivation,
    tree_leaves,
)
from .hpsg import (
    HpsgStats,
    LocalTree,
    Sign,
    Violation,
    apply_hfp,
    apply_valency,
    attach_daughters,
    check_local_tree,
    compile_fcr,
    lexical_sign,
    parse_hpsg,
    post_fcrs,
    post_subcat,
    post_unicity,
    sign_dump,
    valency_of,
)

__version__ = "0.1.0"

__all__ = [
    "AllDistinct",
    "And",
    "Ann",
    "AskResult",
    "Bool3",
    "BoolConstraint",
    "Cell",
    "ClparseError",
    "Concat3",
    "Const",
    "Constraint",
    "Counters",
    "Daughter",
    "Element",
    "Eq",
    "Equiv",
    "FCR",
    "FcrLiteral",
    "FeatureStructure",
    "Formula",
    "Frame",
    "Grammar",
    "GrammarError",
    "HpsgStats",
    "Implies",
    "InRelation",
    "InconsistencyError",
    "LexEntry",
    "LocalTree",
    "Neq",
    "Not",
    "Or",
    "PSRule",
    "ParseStats",
    "Ref",
    "Relation",
    "Sign",
    "Size",
    "Snapshot",
    "Store",
    "UsageError",
    "Var",
    "VarId",
    "VarKind",
    "Violation",
    "all_distinct",
    "apply_hfp",
    "apply_valency",
    "attach_daughters",
    "avm_equal",
    "bool_post",
    "check_local_tree",
    "compile_fcr",
    "concat3",
    "conj",
    "daughter",
    "derivations_to_tree",
    "disj",
    "element",
    "encode",
    "eq",
    "eval_formula",
    "format_derivation",
    "format_formula",
    "in_relation",
    "lexical_sign",
    "load_grammar",
    "load_grammar_file",
    "neq",
    "oracle_parse",
    "parse",
    "parse_avm",
    "parse_constraint",
    "parse_derivation",
    "parse_fcr",
    "parse_formula",
    "parse_hpsg",
    "post_fcrs",
    "post_subcat",
    "post_unicity",
    "sign_dump",
    "size",
    "tree_leaves",
    "valency_of",
]
