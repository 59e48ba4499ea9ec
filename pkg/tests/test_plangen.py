import pytest
from hypothesis import given, settings, strategies as st

from pushdl import compile_program
from pushdl.frontend import parse_program
from pushdl.plangen import (
    AssignVar,
    Col,
    DupCheck,
    EmitAnswer,
    FetchLoop,
    GuardSlotsEq,
    Goto,
    OpenCursor,
    PushBacktrack,
    RestoreState,
    SaveState,
    Temp,
    check_plan,
    select_binding_pattern,
    walk,
)
from pushdl.symbolic import RtVar, protected_nodes

from programs import CONFLICT_LITERAL, USELESS_BRANCH, SUITE, TC, TWO_EDB, VAR_MIN, random_program


def plan_of(source, **kw):
    return compile_program(source, **kw).plan


class TestBindingPatterns:
    def lit(self, text):
        return parse_program(f"answer :- {text}.").rules[0].body[0]

    def test_constant_binds(self):
        assert select_binding_pattern(self.lit("q(X, c1)"), [], ["ff", "fb"]) == "fb"

    def test_known_variable_binds(self):
        assert select_binding_pattern(self.lit("e(Y, Z)"), ["Y"], ["ff", "bf"]) == "bf"

    def test_unknown_variable_cannot_bind(self):
        assert select_binding_pattern(self.lit("e(Y, Z)"), [], ["ff", "bf"]) == "ff"

    def test_prefers_more_bound_then_leftmost(self):
        lit = self.lit("e(1, 2, Z)")
        assert select_binding_pattern(lit, [], ["fff", "fbf", "bff", "bbf"]) == "bbf"
        assert select_binding_pattern(lit, [], ["fff", "fbf", "bff"]) == "bff"

    def test_declaration_order_breaks_remaining_ties(self):
        lit = self.lit("e(1, 2)")
        # both bind one position; leftmost wins regardless of order
        assert select_binding_pattern(lit, [], ["ff", "fb", "bf"]) == "bf"


def test_useless_branch_plan_shape():
    plan = plan_of(USELESS_BRANCH)
    assert set(plan.rtvars) == {RtVar(3, "X")}
    assert {c.relation for c in plan.cursors.values()} == {"e1"}
    # rule 2 on p(c1, v3_X): nothing to check, nothing to assign
    (piece,) = plan.pieces_for_rule(2)
    (start,) = piece.labels
    assert [type(i) for i in plan.blocks[start]] == [Goto]


def test_variable_minimization():
    plan = plan_of(VAR_MIN)
    assert plan.rtvars_of_rule(2) == {RtVar(2, "A")}


def test_two_edb_inner_cursor_bound_to_outer_column():
    plan = plan_of(TWO_EDB)
    opens = [i for i in plan.instructions() if isinstance(i, OpenCursor)]
    inner = [o for o in opens if o.bound]
    assert len(inner) == 1 and isinstance(inner[0].bound[0], Col)
    assert plan.cursors[inner[0].cursor].pattern == "bf"


def test_bound_argument_from_idb_literal():
    plan = plan_of(TC)
    idb_edb = [p for p in plan.pieces if p.node.kind == "idb_edb"]
    assert idb_edb
    for p in idb_edb:
        assert plan.cursors[p.cursors[0]].pattern == "bf"


def test_conflicted_node_is_copy_all():
    for source in (CONFLICT_LITERAL, TC):
        plan = plan_of(source)
        conflicted = [p for p in plan.pieces if p.node.conflict]
        assert conflicted and all(p.copy_all for p in conflicted)
        for p in conflicted:
            start = next(l for l in p.labels if l.kind == "START")
            copies = [i for i in plan.blocks[start] if isinstance(i, AssignVar)]
            # the IDB literal's runtime variables are copied into this rule's own
            assert copies
            assert all(isinstance(c.target, Temp) or c.target.rule_no == p.node.rule_no for c in copies)


def test_protected_pieces_save_and_restore():
    plan = plan_of(TC)
    graph = plan.graph
    prot = protected_nodes(graph)
    for p in plan.pieces:
        kinds = {l.kind for l in p.labels}
        assert ("RESTORE" in kinds) == (p.node in prot)
        if p.node in prot:
            start = next(l for l in p.labels if l.kind == "START")
            restore = next(l for l in p.labels if l.kind == "RESTORE")
            save = next(i for i in plan.blocks[start] if isinstance(i, SaveState))
            back = next(i for i in plan.blocks[restore] if isinstance(i, RestoreState))
            assert save.rtvars == back.rtvars and save.cursor == back.cursor


def test_source_is_deterministic_and_labelled():
    for case in SUITE:
        a, b = plan_of(case.source).source(), plan_of(case.source).source()
        assert a == b
        assert a.startswith("// Declaration Section")
        assert "while(!backtrack_stack.is_empty())" in a


# plan invariants


def _dispatch_index(body) -> int | None:
    for k, ins in enumerate(body):
        if isinstance(ins, (Goto, PushBacktrack, EmitAnswer)):
            return k
    return None


def _dispatches(seq) -> bool:
    return any(isinstance(i, EmitAnswer) or isinstance(i, Goto) and i.label.kind == "START" for i in seq)


def _bodies(plan, piece):
    """Instruction sequences that end in dispatching the piece's output."""
    for lab in piece.labels:
        block = plan.blocks[lab]
        loops = [i for i in walk(block) if isinstance(i, FetchLoop)]
        if loops:
            for loop in loops:
                if _dispatches(loop.body):
                    yield lab, loop.body
        elif lab.kind == "START" and _dispatches(block):
            yield lab, block


def check_invariants(plan):
    check_plan(plan)
    # single writer: a runtime variable is only assigned by its own rule
    for lab, block in plan.blocks.items():
        for ins in walk(block):
            if isinstance(ins, AssignVar) and isinstance(ins.target, RtVar):
                assert ins.target.rule_no == lab.rule_no
        for k, ins in enumerate(block):
            if isinstance(ins, GuardSlotsEq):
                assert k == 0 and lab.kind == "START"
    for piece in plan.pieces:
        out_pred = piece.node.output.pred
        tabled = out_pred in plan.tabling
        cont = [l for l in piece.labels if l.kind == "CONT"]
        for lab, body in _bodies(plan, piece):
            dups = [k for k, i in enumerate(body) if isinstance(i, DupCheck)]
            first = _dispatch_index(body)
            # duplicate check exactly when tabled, and before anything is pushed on
            assert bool(dups) == tabled, (lab, body)
            if dups and first is not None:
                assert dups[0] < first
            gotos = [k for k, i in enumerate(body) if isinstance(i, Goto) and i.label.kind == "START"]
            if gotos and cont and body is not plan.blocks[lab]:
                pushes = [k for k, i in enumerate(body)
                          if isinstance(i, PushBacktrack) and i.label in cont]
                assert pushes and pushes[0] < gotos[0], (lab, body)
    for ins in plan.instructions():
        if isinstance(ins, DupCheck):
            assert ins.pred in plan.tabling
    # declaration minimality: every declared runtime variable is assigned
    # somewhere and occurs in some symbolic fact or copy of its rule
    assigned = {i.target for i in plan.instructions() if isinstance(i, AssignVar)}
    used = {v for n in plan.graph.rule_nodes for v in n.output.rtvars()}
    used |= {v for n in plan.graph.rule_nodes for v, _ in n.copies()}
    for v in plan.rtvars:
        assert v in assigned and v in used, v


@pytest.mark.parametrize("case", SUITE, ids=lambda c: c.name)
def test_plan_invariants_suite(case):
    check_invariants(plan_of(case.source))
    check_invariants(plan_of(case.source, multiset_answers=True))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_plan_invariants_random(seed):
    check_invariants(plan_of(random_program(seed)))


def test_labels_are_dense():
    plan = plan_of(TC)
    assert [l.id for l in plan.labels] == list(range(1, len(plan.labels) + 1))
