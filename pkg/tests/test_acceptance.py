"""End-to-end acceptance checks.

Each test prints one PASS/FAIL line (shown even when output is captured) and
then asserts.  Tolerances are exact unless a time limit is given.
"""

import random
import time
from pathlib import Path

import networkx as nx
import pytest

from pushdl import compile_program, evaluate
from pushdl.frontend import normalize_binary, parse_program
from pushdl.oracle import restrict, seminaive_eval
from pushdl.storage import as_database
from pushdl.symbolic import RtVar

from programs import CONFLICT_LITERAL, USELESS_BRANCH, SUITE, TC, VAR_MIN, cycle, random_data, random_program

GOLDEN = Path(__file__).parent / "golden"

SUITE_TIME_LIMIT = 10.0
TC_TIME_LIMIT = 1.0
NORMALIZE_TIME_LIMIT = 30.0


@pytest.fixture
def report(capsys):
    def emit(criterion: str, ok: bool, detail: str = ""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {criterion}" + (f": {detail}" if detail else ""))
        assert ok, detail
    return emit


def oracle_answers(comp, data):
    return seminaive_eval(comp.program, as_database(comp.program, data))[comp.program.answer]


def has_cycle(data) -> bool:
    g = nx.DiGraph()
    for rows in data.values():
        g.add_edges_from((t[0], t[1]) for t in rows if len(t) >= 2)
    return not nx.is_directed_acyclic_graph(g)


def closure(edges):
    reach = set(edges)
    while True:
        new = {(a, d) for a, b in reach for c, d in reach if b == c} - reach
        if not new:
            return reach
        reach |= new


def derivation_bound(comp, data) -> int:
    values = {v for rows in data.values() for t in rows for v in t}
    total = 0
    for pred in comp.tabling:
        consumers = sum(1 for n in comp.graph.rule_nodes if n.input is not None and n.input.pred == pred)
        consumers += pred == comp.program.answer
        total += len(values) ** comp.normalized.arities[pred] * max(consumers, 1)
    return total


def _suite_equivalence(cases):
    failures = []
    for case in cases:
        comp = compile_program(case.source)
        for name, data in case.instances.items():
            if evaluate(comp, data).answer_set != oracle_answers(comp, data):
                failures.append(f"{case.name}/{name}")
    return failures


def test_c1_oracle_equivalence(report):
    assert len(SUITE) >= 12
    shape_problems = []
    for case in SUITE:
        inst = case.instances.values()
        binary = any(parse_program(case.source).arities[p] >= 2 for p in parse_program(case.source).edb_preds)
        if len(inst) < 3 or not any(all(not rows for rows in d.values()) for d in inst):
            shape_problems.append(case.name)
        elif binary and not any(has_cycle(d) for d in inst):
            shape_problems.append(case.name)
    start = time.perf_counter()
    failures = _suite_equivalence(SUITE)
    elapsed = time.perf_counter() - start
    n = sum(len(c.instances) for c in SUITE)
    ok = not failures and not shape_problems and elapsed < SUITE_TIME_LIMIT
    report("C1 oracle equivalence", ok,
           f"{len(SUITE)} programs, {n} instances, {elapsed:.2f}s, mismatches={failures}, shape={shape_problems}")


def test_c2_useless_branch_structure(report):
    comp = compile_program(USELESS_BRANCH)
    g = comp.graph
    counts = (len(g.facts), len(g.rule_nodes))
    golden = (GOLDEN / "useless_branch.dot").read_text()
    ok = counts == (3, 3) and g.to_dot() == golden
    report("C2 pruned graph structure", ok, f"fact nodes, rule nodes = {counts}; golden DOT match={g.to_dot() == golden}")


def test_c3_variable_minimization(report):
    comp = compile_program(VAR_MIN)
    rule_no = next(r.rule_no for r in comp.program.rules if r.head.pred == "p")
    declared = comp.plan.rtvars_of_rule(rule_no)
    ok = declared == {RtVar(rule_no, "A")}
    report("C3 variable minimization", ok, f"rule {rule_no} declares {sorted(map(str, declared))}")


def test_c4_termination_on_cycle(report):
    data = {"e": cycle(3)}
    start = time.perf_counter()
    comp = compile_program(TC)
    result = evaluate(comp, data)
    elapsed = time.perf_counter() - start
    p = result.tables["p"]
    bound = derivation_bound(comp, data)
    ok = p == closure(cycle(3)) and len(p) == 9 and result.counters.derivations <= bound and elapsed < TC_TIME_LIMIT
    report("C4 termination on cyclic data", ok,
           f"|p|={len(p)}, derivations={result.counters.derivations} <= {bound}, {elapsed * 1000:.1f} ms")


def test_c5_no_materialization(report):
    comp = compile_program(USELESS_BRANCH, multiset_answers=True)
    result = evaluate(comp, {"e1": [(7,), (8,)], "e2": [(9,)]})
    c = result.counters
    ok = c.tuples_materialized == 0 and c.scans("e2") == 0 and sorted(result.answers) == [(7,), (8,)]
    report("C5 no materialization", ok, f"tuples_materialized={c.tuples_materialized}, e2 opens={c.scans('e2')}")


def test_c6_value_protection(report):
    comp = compile_program(TC)
    total, wrong, checked = 0, [], 0
    for seed in range(12):
        rng = random.Random(seed)
        edges = sorted({(rng.randrange(20), rng.randrange(20)) for _ in range(30)})
        result = evaluate(comp, {"e": edges}, shadow=True)
        total += len(result.mismatches)
        checked += 1
        if result.answer_set != oracle_answers(comp, {"e": edges}):
            wrong.append(seed)
    ok = total == 0 and not wrong
    report("C6 value protection", ok, f"{checked} seeds, 20 nodes, shadow mismatches={total}, wrong answers={wrong}")


def test_c7_conflict_handling(report):
    details, ok = [], True
    for name, source in (("literal", CONFLICT_LITERAL), ("tc", TC)):
        comp = compile_program(source)
        conflicted = [p for p in comp.plan.pieces if p.node.conflict]
        copy_all = bool(conflicted) and all(p.copy_all for p in conflicted)
        case = next(c for c in SUITE if c.source == source)
        failures = _suite_equivalence([case])
        ok = ok and copy_all and not failures
        details.append(f"{name}: {len(conflicted)} copy-all node(s), mismatches={failures}")
    report("C7 conflict handling", ok, "; ".join(details))


def test_c8_normalization_soundness(report):
    start = time.perf_counter()
    failures = []
    for seed in range(100):
        prog = parse_program(random_program(seed, max_body=4))
        data = random_data(seed)
        preds = prog.idb_preds
        if restrict(seminaive_eval(normalize_binary(prog), data), preds) != restrict(seminaive_eval(prog, data), preds):
            failures.append(seed)
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < NORMALIZE_TIME_LIMIT
    report("C8 normalization soundness", ok, f"100 programs, {elapsed:.2f}s, failing seeds={failures}")
