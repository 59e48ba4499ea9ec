import pytest
from hypothesis import given, settings, strategies as st

from pushdl.frontend import (
    Const,
    DatalogError,
    DatalogSyntaxError,
    Literal,
    Var,
    format_program,
    infer_types,
    normalize_binary,
    parse_program,
    parse_schema,
    validate,
)
from pushdl.oracle import restrict, seminaive_eval

from programs import SUITE, random_data, random_program


def test_parse_rules_and_facts():
    prog = parse_program("""
        % comment line
        p(c1, X) :- e1(X).   % trailing comment
        q(1, "two words").
        answer(X) :- p(c1, X).
    """)
    assert [r.rule_no for r in prog.rules] == [1, 2, 3]
    r1, r2, _ = prog.rules
    assert r1.head == Literal("p", (Const("c1"), Var("X")))
    assert r1.body == (Literal("e1", (Var("X"),)),)
    assert r2.is_fact and r2.head.args == (Const(1), Const("two words"))
    assert prog.edb_preds == {"e1"}
    assert prog.idb_preds == {"p", "q", "answer"}
    assert [r.rule_no for r in prog.idb_facts] == [2]


def test_zero_arity_literals():
    prog = parse_program("flag :- e(X).\nanswer() :- flag.")
    assert prog.arities["flag"] == 0 and prog.arities["answer"] == 0


def test_schema_directives_inline_and_sidecar():
    prog = parse_program(".edb e(int, str) indexed(bf) indexed(fb)\nanswer(X) :- e(X, Y).")
    decl = prog.edb_decl("e")
    assert decl.types == ("int", "str")
    assert decl.access_patterns == ("ff", "bf", "fb")
    schema = parse_schema(".edb e1(int) indexed(b)\n% note\n")
    prog2 = parse_program("answer(X) :- e1(X).", schema)
    assert prog2.edb_decl("e1").patterns == ("b",)


def test_undeclared_edb_gets_default_decl():
    prog = parse_program("answer(X) :- e(X, Y).")
    decl = prog.edb_decl("e")
    assert decl.arity == 2 and decl.types is None and decl.access_patterns == ("ff",)


@pytest.mark.parametrize("text, line, col", [
    ("p(X) :- e(X)", 1, 13),          # missing period
    ("p(X) :- e(X).\nq(X :- e(X).", 2, 5),
    ("p(X) :- .", 1, 9),
])
def test_syntax_errors_carry_position(text, line, col):
    with pytest.raises(DatalogSyntaxError) as info:
        parse_program(text)
    assert (info.value.line, info.value.column) == (line, col)


def test_arity_mismatch_is_rejected():
    with pytest.raises(DatalogSyntaxError, match="arity"):
        parse_program("p(X) :- e(X).\nanswer(X) :- p(X, X).")


def test_answer_in_body_rejected():
    with pytest.raises(DatalogSyntaxError, match="answer"):
        parse_program("p(X) :- answer(X).")


def test_unknown_schema_type():
    with pytest.raises(DatalogError):
        parse_schema(".edb e(float)")


def test_validate_unbound_head_variable():
    prog = parse_program("p(X, Y) :- e(X).\nanswer(X) :- p(X, X).")
    problems = validate(prog)
    assert problems == ["rule 1: head variable Y is not bound in the body"]


def test_validate_edb_in_head():
    prog = parse_program(".edb e(int)\ne(X) :- f(X).\nanswer(X) :- e(X).")
    assert any("EDB predicate e" in p for p in validate(prog))


def test_validate_reports_all_violations():
    prog = parse_program(".edb e(int)\np(X, Y) :- e(X).\nq(Z) :- p(W, W).\nanswer(X) :- e(\"s\").")
    problems = validate(prog)
    assert [p.split(":")[0] for p in problems] == ["rule 1", "rule 2", "rule 3", "rule 3"]
    assert "constant s compared with int column e[1]" in problems[-1]


def test_type_inference_propagates_through_rules():
    prog = parse_program(".edb e(int, str)\np(Y, X) :- e(X, Y).\nanswer(A) :- p(A, 3).")
    types, problems = infer_types(prog)
    assert types[("p", 0)] == "str" and types[("p", 1)] == "int"
    assert problems == []


def test_type_conflict_detected():
    prog = parse_program(".edb e(int)\n.edb f(str)\np(X) :- e(X).\np(X) :- f(X).\nanswer(X) :- p(X).")
    (problem,) = infer_types(prog)[1]
    assert "p[1]" in problem


def test_normalize_folds_left_to_right():
    prog = parse_program("answer(X, W) :- a(X, Y), b(Y, Z), c(Z, W), d(W).")
    norm = normalize_binary(prog)
    text = [str(r) for r in norm.rules]
    assert text == [
        "answer(X, W) :- aux_1_2(X, W), d(W).",
        "aux_1_1(X, Z) :- a(X, Y), b(Y, Z).",
        "aux_1_2(X, W) :- aux_1_1(X, Z), c(Z, W).",
    ]
    assert [r.rule_no for r in norm.rules] == [1, 2, 3]


def test_normalize_leaves_binary_program_alone():
    prog = parse_program("p(X) :- e(X, Y), f(Y).\nanswer(X) :- p(X).")
    assert normalize_binary(prog) is prog


def test_normalize_avoids_name_clash():
    prog = parse_program("aux_1_1(X) :- e(X).\nanswer(X) :- aux_1_1(X), e(X), e(X).")
    norm = normalize_binary(prog)
    assert len(set(norm.arities)) == len(norm.arities)
    assert any(p.startswith("aux_2_1") for p in norm.idb_preds)


@pytest.mark.parametrize("case", SUITE, ids=lambda c: c.name)
def test_round_trip_suite(case):
    prog = parse_program(case.source)
    assert parse_program(format_program(prog)) == prog


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_round_trip_random(seed):
    prog = parse_program(random_program(seed))
    assert parse_program(format_program(prog)) == prog


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_normalization_preserves_model(seed):
    prog = parse_program(random_program(seed))
    data = random_data(seed)
    preds = prog.idb_preds
    assert restrict(seminaive_eval(normalize_binary(prog), data), preds) == restrict(seminaive_eval(prog, data), preds)
