from concurrent.futures import ThreadPoolExecutor

import pytest
from hypothesis import given, settings, strategies as st

import pushdl.plangen
from pushdl import EngineError, compile_program, evaluate, run
from pushdl.frontend import Const
from pushdl.oracle import seminaive_eval
from pushdl.storage import as_database, load_relation
from pushdl.symbolic import recursive_nodes

from programs import (
    CROSS_PRODUCT,
    USELESS_BRANCH,
    SUITE_BY_NAME,
    TC,
    TWO_IDB,
    cycle,
    random_data,
    random_program,
    suite_params,
)


def oracle_answers(comp, data):
    return seminaive_eval(comp.program, as_database(comp.program, data))[comp.program.answer]


@pytest.mark.parametrize("case, instance", suite_params(), ids=lambda x: getattr(x, "name", x))
def test_push_matches_oracle(case, instance):
    comp = compile_program(case.source)
    data = case.instances[instance]
    result = evaluate(comp, data, shadow=True)
    assert result.answer_set == oracle_answers(comp, data)
    assert len(result.answers) == len(result.answer_set)  # answer is tabled
    assert result.mismatches == []


@pytest.mark.parametrize("case, instance", suite_params(), ids=lambda x: getattr(x, "name", x))
def test_multiset_answers_same_set(case, instance):
    comp = compile_program(case.source, multiset_answers=True)
    data = case.instances[instance]
    assert evaluate(comp, data).answer_set == oracle_answers(comp, data)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_push_matches_oracle_random(seed):
    comp = compile_program(random_program(seed))
    data = random_data(seed)
    result = evaluate(comp, data, shadow=True)
    assert result.answer_set == oracle_answers(comp, data)
    assert result.mismatches == []


def test_useless_branch_run():
    result = evaluate(USELESS_BRANCH, {"e1": [(7,), (8,)], "e2": [(9,)]})
    assert sorted(result.answers) == [(7,), (8,)]
    assert result.counters.scans("e1") == 1 and result.counters.scans("e2") == 0


def test_useless_branch_no_materialization_without_dedup():
    result = evaluate(USELESS_BRANCH, {"e1": [(7,), (8,)], "e2": [(9,)]}, multiset_answers=True)
    assert result.counters.tuples_materialized == 0
    assert result.counters.scans("e2") == 0


def test_empty_database():
    result = evaluate(TC, {"e": []})
    assert result.answers == [] and result.counters.derivations == 0


def test_tc_three_cycle():
    result = evaluate(TC, {"e": cycle(3)}, record=True)
    p = {t for pred, t in result.derived if pred == "p"}
    assert len(p) == 9 and result.tables["p"] == p


def test_duplicates_do_not_count_as_derivations():
    once = evaluate(TC, {"e": [(1, 2)]}).counters.derivations
    # a second path to the same p fact is stopped by the duplicate table
    twice = evaluate(TC, {"e": [(1, 2), (2, 3), (1, 3)]})
    distinct = len(twice.tables["p"])
    assert twice.counters.derivations == 2 * distinct
    assert once == 2


def test_two_paths_one_answer_when_tabled():
    src = "answer(X) :- a(X).\nanswer(X) :- b(X)."
    data = {"a": [(1,)], "b": [(1,)]}
    assert evaluate(src, data).answers == [(1,)]
    assert sorted(evaluate(src, data, multiset_answers=True).answers) == [(1,), (1,)]


def test_cross_product_derivations():
    result = evaluate(CROSS_PRODUCT, {"a": [(1,), (2,)], "b": [(3,), (4,), (5,)]}, multiset_answers=True)
    assert len(result.answers) == 6 == result.counters.derivations


def test_two_idb_one_sided_input_only_stored():
    comp = compile_program(TWO_IDB)
    result = evaluate(comp, {"a": [(1, 2), (2, 3)], "b": []})
    assert result.answers == []
    assert result.counters.derivations == 2  # the two p facts, nothing joined
    assert result.counters.tuples_materialized == 2


def test_missing_relation():
    comp = compile_program(TC)
    with pytest.raises(EngineError, match="e"):
        run(comp.plan, {})


def test_type_mismatch_detected_at_startup():
    comp = compile_program("answer(X) :- e(X, 1).")
    db = {"e": load_relation("e", ["int", "str"], [(1, "a")])}
    with pytest.raises(EngineError):
        run(comp.plan, db)


def test_string_values():
    case = SUITE_BY_NAME["strings"]
    result = evaluate(case.source, case.instances["roads"])
    assert result.answer_set == {("a",), ("b",), ("c",), ("d",)}


def test_nullary_answer():
    case = SUITE_BY_NAME["nullary"]
    assert evaluate(case.source, case.instances["cyclic"]).answers == [()]
    assert evaluate(case.source, case.instances["acyclic"]).answers == []


def _adom(comp, data):
    values = {v for rows in data.values() for t in rows for v in t}
    for r in comp.normalized.rules:
        for lit in (r.head, *r.body):
            values |= {t.value for t in lit.args if isinstance(t, Const)}
    return values


def derivation_bound(comp, data) -> int:
    n = len(_adom(comp, data))
    arities = comp.normalized.arities
    total = 0
    for pred in comp.tabling:
        consumers = sum(1 for node in comp.graph.rule_nodes if node.input is not None and node.input.pred == pred)
        if pred == comp.program.answer:
            consumers += 1  # the sink
        total += n ** arities[pred] * max(consumers, 1)
    return total


@pytest.mark.parametrize("case, instance", suite_params(), ids=lambda x: getattr(x, "name", x))
def test_derivation_bound_with_full_tabling(case, instance):
    base = compile_program(case.source)
    comp = compile_program(case.source, table=base.normalized.idb_preds)
    data = case.instances[instance]
    result = evaluate(comp, data)
    assert result.answer_set == oracle_answers(comp, data)
    assert result.counters.derivations <= derivation_bound(comp, data)


def test_recorded_derivations_are_true_facts():
    for name in ("tc", "same_generation", "two_idb_recursive", "magic_chain"):
        case = SUITE_BY_NAME[name]
        comp = compile_program(case.source)
        for data in case.instances.values():
            model = seminaive_eval(comp.normalized, as_database(comp.normalized, data))
            result = evaluate(comp, data, record=True)
            assert all(t in model[p] for p, t in result.derived)


def test_concurrent_runs_share_database():
    comp = compile_program(TC)
    db = as_database(comp.normalized, {"e": cycle(12)})
    with ThreadPoolExecutor(4) as pool:
        results = list(pool.map(lambda _: run(comp.plan, db).answer_set, range(8)))
    assert all(r == results[0] for r in results) and len(results[0]) == 144


def test_protecting_only_cycle_nodes_is_not_enough(monkeypatch):
    # saving state only on nodes that lie on a cycle lets another node of the
    # same rule overwrite a value a pending task still needs
    monkeypatch.setattr(pushdl.plangen, "protected_nodes", recursive_nodes)
    comp = compile_program(TC)
    result = evaluate(comp, {"e": cycle(3)}, shadow=True)
    assert result.mismatches
    assert result.answer_set != oracle_answers(comp, {"e": cycle(3)})
