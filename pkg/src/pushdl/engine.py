"""Execution of a CodePieceProgram: the backtrack-stack dispatch loop.

The engine pops a label, runs its block until the block breaks (the next
label is popped) or jumps to another label, and stops when the backtrack
stack is empty.  Runtime variables live in one store keyed by
:class:`~pushdl.symbolic.RtVar`; saved values go to one stack per column
type; tabled predicates get a hash set of ground tuples each.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field

from .frontend import Const
from .plangen import (
    AssignVar,
    Break,
    CodePieceProgram,
    Col,
    DupCheck,
    EmitAnswer,
    FetchLoop,
    Goto,
    GuardColsEqCols,
    GuardColsEqConst,
    GuardSlotsEq,
    Label,
    OpenCursor,
    PushBacktrack,
    RestoreState,
    SaveState,
    StoreFact,
)
from .storage import Cursor, Relation, SideTable

__all__ = ["Counters", "Engine", "EngineError", "RunResult", "ShadowEngine", "run"]

log = logging.getLogger(__name__)

CONTINUE = object()
BREAK = object()


class EngineError(RuntimeError):
    """The plan cannot run against this database."""


@dataclass
class Counters:
    tuples_materialized: int = 0
    values_copied: int = 0
    max_backtrack_depth: int = 0
    derivations: int = 0
    cursor_opens: dict[str, int] = field(default_factory=dict)

    def scans(self, relation: str) -> int:
        return self.cursor_opens.get(relation, 0)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunResult:
    answers: list[tuple]
    counters: Counters
    tables: dict[str, set[tuple]]
    derived: list[tuple[str, tuple]] | None = None
    mismatches: list[str] | None = None

    @property
    def answer_set(self) -> set[tuple]:
        return set(self.answers)


def _type_of(value) -> str:
    return "int" if isinstance(value, int) else "str"


class Engine:
    """One evaluation of a plan over a database.

    ``db`` maps every EDB predicate used by the plan to a Relation.  Set
    ``record=True`` to keep the list of every derived ground fact.
    """

    def __init__(self, plan: CodePieceProgram, db: Mapping[str, Relation], record: bool = False):
        self.plan = plan
        self.record = record
        missing = sorted(p for p in plan.edb_preds if p not in db)
        if missing:
            raise EngineError(f"no relation for EDB predicate(s): {', '.join(missing)}")
        self.side: dict[str, SideTable] = {}
        for s in plan.side_tables.values():
            self.side[s.name] = SideTable(s.name, ["str"] * s.arity, s.patterns)
        self.cursors: dict[str, Cursor] = {}
        for c in plan.cursors.values():
            rel = self.side[c.relation] if c.side else db[c.relation]
            if c.pattern not in rel.patterns:
                rel.add_index(c.pattern)
            self.cursors[c.name] = Cursor(rel, c.pattern)
        self.var_types = self._resolve_types(db)
        self.vars: dict = {}
        self.stack: list[Label] = []
        self.value_stacks: dict[str, list] = {"int": [], "str": []}
        self.tables: dict[str, set[tuple]] = {p: set() for p in plan.tabling}
        self.answers: list[tuple] = []
        self.counters = Counters()
        self.derived: list[tuple[str, tuple]] = []
        self._dispatch = {
            OpenCursor: self._open,
            FetchLoop: self._loop,
            GuardColsEqConst: self._guard_const,
            GuardColsEqCols: self._guard_cols,
            GuardSlotsEq: self._guard_slots,
            AssignVar: self._assign,
            DupCheck: self._dupcheck,
            StoreFact: self._store,
            PushBacktrack: self._push,
            Goto: self._goto,
            SaveState: self._save,
            RestoreState: self._restore,
            EmitAnswer: self._emit,
            Break: self._break,
        }

    # ---- startup checks

    def _col_type(self, col: Col) -> str | None:
        rel = self.cursors[col.cursor].relation
        if isinstance(rel, SideTable) or not rel.typed:
            return None
        return rel.types[col.index]

    def _operand_type(self, op, types) -> str | None:
        if isinstance(op, Const):
            return _type_of(op.value)
        if isinstance(op, Col):
            return self._col_type(op)
        return types.get(op)

    def _resolve_types(self, db) -> dict:
        types: dict = {v: t for v, t in self.plan.rtvars.items() if t}
        instructions = list(self.plan.instructions())
        changed = True
        while changed:
            changed = False
            for ins in instructions:
                if isinstance(ins, AssignVar):
                    src = self._operand_type(ins.source, types)
                    old = types.get(ins.target)
                    if src is None:
                        continue
                    if old is None:
                        types[ins.target] = src
                        changed = True
                    elif old != src:
                        raise EngineError(f"{ins.target} is {old} but receives a {src} value")
        for ins in instructions:
            if isinstance(ins, GuardColsEqConst):
                for i, op in ins.checks:
                    a = self._col_type(Col(ins.cursor, i))
                    b = self._operand_type(op, types)
                    if a and b and a != b:
                        raise EngineError(f"{ins.cursor}.col_{i + 1} is {a}, compared with {b} value {op}")
            elif isinstance(ins, GuardColsEqCols):
                for i, j in ins.pairs:
                    a, b = self._col_type(Col(ins.cursor, i)), self._col_type(Col(ins.cursor, j))
                    if a and b and a != b:
                        raise EngineError(f"{ins.cursor}: columns {i + 1} and {j + 1} have different types")
            elif isinstance(ins, OpenCursor):
                cur = self.cursors[ins.cursor]
                bound = [k for k, c in enumerate(cur.pattern) if c == "b"]
                for k, op in zip(bound, ins.bound):
                    a = self._col_type(Col(ins.cursor, k))
                    b = self._operand_type(op, types)
                    if a and b and a != b:
                        raise EngineError(f"{ins.cursor} opened with {b} value for {a} column {k + 1}")
        return types

    # ---- operands

    def value(self, op):
        if isinstance(op, Const):
            return op.value
        if isinstance(op, Col):
            return self.cursors[op.cursor].col(op.index)
        return self.vars[op]

    def values(self, ops) -> tuple:
        return tuple(self.value(o) for o in ops)

    # ---- instructions; each returns None, CONTINUE, BREAK or a Label

    def step(self, ins):
        return self._dispatch[type(ins)](ins)

    def _open(self, ins: OpenCursor):
        cur = self.cursors[ins.cursor]
        cur.open(*self.values(ins.bound))
        rel = cur.relation.name
        self.counters.cursor_opens[rel] = self.counters.cursor_opens.get(rel, 0) + 1

    def _loop(self, ins: FetchLoop):
        cur = self.cursors[ins.cursor]
        body = ins.body
        step = self.step
        while cur.fetch():
            for sub in body:
                r = step(sub)
                if r is None:
                    continue
                if r is CONTINUE:
                    break
                return r
        return None

    def _guard_const(self, ins: GuardColsEqConst):
        cur = self.cursors[ins.cursor]
        for i, op in ins.checks:
            if cur.col(i) != self.value(op):
                return CONTINUE
        return None

    def _guard_cols(self, ins: GuardColsEqCols):
        cur = self.cursors[ins.cursor]
        for i, j in ins.pairs:
            if cur.col(i) != cur.col(j):
                return CONTINUE
        return None

    def _guard_slots(self, ins: GuardSlotsEq):
        for a, b in ins.pairs:
            if self.value(a) != self.value(b):
                return BREAK
        return None

    def _assign(self, ins: AssignVar):
        self.vars[ins.target] = self.value(ins.source)
        self.counters.values_copied += 1

    def _dupcheck(self, ins: DupCheck):
        tup = self.values(ins.slots)
        table = self.tables[ins.pred]
        if tup in table:
            return CONTINUE if ins.on_dup == "continue" else BREAK
        table.add(tup)
        self.counters.tuples_materialized += 1
        self.counters.values_copied += len(tup)
        return None

    def _store(self, ins: StoreFact):
        tup = self.values(ins.slots)
        self.side[ins.table].append(tup)
        self.counters.tuples_materialized += 1
        self.counters.values_copied += len(tup)

    def _push(self, ins: PushBacktrack):
        self.push_label(ins.label)

    def push_label(self, label: Label) -> None:
        self.stack.append(label)
        if len(self.stack) > self.counters.max_backtrack_depth:
            self.counters.max_backtrack_depth = len(self.stack)

    def _goto(self, ins: Goto):
        label = ins.label
        if label.kind == "START":
            self._derived(label.fact)
        return label

    def _derived(self, fact) -> None:
        self.counters.derivations += 1
        if self.record:
            self.derived.append((fact.pred, self.values(fact.slots)))

    def _save(self, ins: SaveState):
        if ins.cursor:
            self.cursors[ins.cursor].push_state()
        for v in ins.rtvars:
            self.value_stacks[self.var_types.get(v) or "str"].append(self.vars.get(v))
            self.counters.values_copied += 1

    def _restore(self, ins: RestoreState):
        for v in reversed(ins.rtvars):
            stack = self.value_stacks[self.var_types.get(v) or "str"]
            if not stack:
                raise EngineError(f"value stack underflow restoring {v}")
            old = stack.pop()
            if old is None:
                self.vars.pop(v, None)
            else:
                self.vars[v] = old
            self.counters.values_copied += 1
        if ins.cursor:
            self.cursors[ins.cursor].pop_state()

    def _emit(self, ins: EmitAnswer):
        tup = self.values(ins.slots)
        self._sink(tup)

    def _sink(self, tup: tuple) -> None:
        self.counters.derivations += 1
        self.answers.append(tup)
        if self.record:
            self.derived.append((self.plan.answer_pred, tup))

    def _break(self, ins: Break):
        return BREAK

    # ---- main loop

    def run_block(self, label: Label) -> None:
        """Run from ``label`` until a block breaks."""
        blocks = self.plan.blocks
        step = self.step
        while True:
            for ins in blocks[label]:
                r = step(ins)
                if r is None:
                    continue
                if r is BREAK or r is CONTINUE:
                    return
                label = r
                break
            else:
                raise EngineError(f"block {label} fell through")

    def pop_label(self) -> Label:
        return self.stack.pop()

    def run(self) -> RunResult:
        fresh: set[tuple] = set()
        for pred, values in self.plan.init_facts:
            if values not in self.tables[pred]:
                self.tables[pred].add(values)
                self.counters.tuples_materialized += 1
                if pred == self.plan.answer_pred:
                    fresh.add(values)
        answer_tabled = self.plan.answer_pred in self.plan.tabling
        for values in self.plan.init_answers:
            # a repeated answer fact is emitted once under set semantics
            if not answer_tabled:
                self._sink(values)
            elif values in fresh:
                fresh.discard(values)
                self._sink(values)
        for label in self.plan.init:
            self.push_label(label)
        while self.stack:
            self.run_block(self.pop_label())
        log.debug("run finished: %s", self.counters)
        return RunResult(
            self.answers,
            self.counters,
            self.tables,
            self.derived if self.record else None,
        )


class ShadowEngine(Engine):
    """Engine that checks value protection on every popped task.

    When a label is pushed, the values of the runtime variables its block
    reads are recorded; when it is popped they must be unchanged.
    """

    def __init__(self, plan: CodePieceProgram, db, record: bool = False):
        super().__init__(plan, db, record)
        self.reads = {lab: sorted(plan.reads(lab), key=str) for lab in plan.blocks}
        self.snapshots: list[tuple] = []
        self.mismatches: list[str] = []
        self.checked = 0

    def _snapshot(self, label: Label) -> tuple:
        return tuple(self.vars.get(v) for v in self.reads[label])

    def push_label(self, label: Label) -> None:
        super().push_label(label)
        self.snapshots.append(self._snapshot(label))

    def pop_label(self) -> Label:
        label = super().pop_label()
        before = self.snapshots.pop()
        now = self._snapshot(label)
        self.checked += 1
        if before != now:
            diff = [
                f"{v}: {a!r} -> {b!r}"
                for v, a, b in zip(self.reads[label], before, now)
                if a != b
            ]
            self.mismatches.append(f"{label}: {', '.join(diff)}")
        return label

    def run(self) -> RunResult:
        result = super().run()
        result.mismatches = self.mismatches
        return result


def run(plan: CodePieceProgram, db: Mapping[str, Relation], *, shadow: bool = False,
        record: bool = False) -> RunResult:
    """Evaluate ``plan`` over ``db`` and return answers and counters."""
    engine = (ShadowEngine if shadow else Engine)(plan, db, record)
    return engine.run()
