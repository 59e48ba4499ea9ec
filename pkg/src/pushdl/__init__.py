"""Push-method Datalog: partial evaluation into code pieces run by a
backtrack-stack dispatch loop."""

from .compiler import Compilation, TablingError, compile_program, evaluate
from .engine import Counters, Engine, EngineError, RunResult, ShadowEngine, run
from .frontend import (
    Const,
    DatalogError,
    DatalogSyntaxError,
    EdbDecl,
    Literal,
    Program,
    Rule,
    Var,
    format_program,
    normalize_binary,
    parse_program,
    parse_schema,
    validate,
)
from .oracle import naive_eval, seminaive_eval
from .plangen import CodePieceProgram, build_plan, format_source, select_binding_pattern
from .storage import Cursor, LoadError, Relation, as_database, load_database, load_relation
from .symbolic import (
    RtVar,
    RuleApplicationGraph,
    SymbolicFact,
    TablingPlan,
    choose_tabling,
    prune_useless,
    recursive_nodes,
    symbolic_fixpoint,
    unify_fact_literal,
)

__all__ = [
    "CodePieceProgram",
    "Compilation",
    "Const",
    "Counters",
    "Cursor",
    "DatalogError",
    "DatalogSyntaxError",
    "EdbDecl",
    "Engine",
    "EngineError",
    "Literal",
    "LoadError",
    "Program",
    "Relation",
    "RtVar",
    "Rule",
    "RuleApplicationGraph",
    "RunResult",
    "ShadowEngine",
    "SymbolicFact",
    "TablingError",
    "TablingPlan",
    "Var",
    "as_database",
    "build_plan",
    "choose_tabling",
    "compile_program",
    "evaluate",
    "format_program",
    "format_source",
    "load_database",
    "load_relation",
    "naive_eval",
    "normalize_binary",
    "parse_program",
    "parse_schema",
    "prune_useless",
    "recursive_nodes",
    "run",
    "select_binding_pattern",
    "seminaive_eval",
    "symbolic_fixpoint",
    "unify_fact_literal",
    "validate",
]

__version__ = "0.1.0"
