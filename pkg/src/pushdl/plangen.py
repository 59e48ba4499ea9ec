"""Translation of rule nodes into labelled code pieces.

Every rule node of the pruned rule application graph becomes one code piece:
a few instruction blocks, each reachable through a label that can be pushed
on the backtrack stack or jumped to directly.  The instruction set mirrors
the statements the templates generate (``c.open(...)``, ``while(c.fetch())``,
guards, variable assignments, duplicate checks, backtrack pushes and gotos),
so the finished :class:`CodePieceProgram` is both directly executable by the
engine and printable as pseudo-source.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from typing import Union

from .frontend import Const, Literal, Var, infer_types
from .symbolic import (
    FactNode,
    RtVar,
    RuleApplicationGraph,
    RuleNode,
    Slot,
    SymbolicFact,
    TablingPlan,
    protected_nodes,
)

__all__ = [
    "AssignVar",
    "Break",
    "CodePiece",
    "CodePieceProgram",
    "Col",
    "CursorDecl",
    "DupCheck",
    "EmitAnswer",
    "FetchLoop",
    "Goto",
    "GuardColsEqCols",
    "GuardColsEqConst",
    "GuardSlotsEq",
    "Label",
    "OpenCursor",
    "PlanBuilder",
    "PlanError",
    "PushBacktrack",
    "RestoreState",
    "SaveState",
    "SideTableDecl",
    "StoreFact",
    "Temp",
    "build_plan",
    "format_source",
    "select_binding_pattern",
]


class PlanError(AssertionError):
    """The generated program is malformed (a compiler bug)."""


# --------------------------------------------------------------------------
# operands, labels, instructions


@dataclass(frozen=True)
class Col:
    """Column ``index`` (0-based) of the current tuple of a cursor."""

    cursor: str
    index: int

    def __str__(self):
        return f"{self.cursor}.col_{self.index + 1}()"


@dataclass(frozen=True)
class Temp:
    name: str

    def __str__(self):
        return self.name


Operand = Union[Const, RtVar, Col, Temp]


def _op(x) -> str:
    if isinstance(x, Const):
        return f'"{x.value}"' if isinstance(x.value, str) else str(x.value)
    return str(x)


@dataclass(frozen=True)
class Label:
    id: int
    kind: str  # START, INIT, CONT, OUTER, RESTORE
    rule_no: int
    name: str
    node: int | None = None
    fact: SymbolicFact | None = None
    pos: int | None = None

    @property
    def case(self) -> str:
        return f"L_{self.kind}_{self.id}"

    @property
    def target(self) -> str:
        return f"l_{self.kind.lower()}_{self.id}"

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class OpenCursor:
    cursor: str
    bound: tuple[Operand, ...] = ()


@dataclass(frozen=True)
class FetchLoop:
    """``while(cursor.fetch()) { body }``; falling off the body continues."""

    cursor: str
    body: tuple = ()


@dataclass(frozen=True)
class GuardColsEqConst:
    """Skip the tuple unless each column equals a value known before the loop
    (a constant, a runtime variable, or a column of an enclosing cursor)."""

    cursor: str
    checks: tuple[tuple[int, Operand], ...]


@dataclass(frozen=True)
class GuardColsEqCols:
    """Skip the tuple unless the paired columns hold equal values."""

    cursor: str
    pairs: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class GuardSlotsEq:
    """Runtime residue of unification; ends the code piece on failure."""

    pairs: tuple[tuple[Slot, Slot], ...]


@dataclass(frozen=True)
class AssignVar:
    target: RtVar | Temp
    source: Operand


@dataclass(frozen=True)
class DupCheck:
    pred: str
    slots: tuple[Operand, ...]
    on_dup: str  # "continue" | "break"


@dataclass(frozen=True)
class StoreFact:
    table: str
    slots: tuple[Operand, ...]


@dataclass(frozen=True)
class PushBacktrack:
    label: Label


@dataclass(frozen=True)
class Goto:
    label: Label


@dataclass(frozen=True)
class SaveState:
    cursor: str | None
    rtvars: tuple[RtVar, ...]


@dataclass(frozen=True)
class RestoreState:
    cursor: str | None
    rtvars: tuple[RtVar, ...]


@dataclass(frozen=True)
class EmitAnswer:
    slots: tuple[Operand, ...]


@dataclass(frozen=True)
class Break:
    pass


Instruction = Union[
    OpenCursor, FetchLoop, GuardColsEqConst, GuardColsEqCols, GuardSlotsEq, AssignVar,
    DupCheck, StoreFact, PushBacktrack, Goto, SaveState, RestoreState, EmitAnswer, Break,
]


def walk(instructions: Iterable) -> Iterator:
    """All instructions, descending into loop bodies."""
    for ins in instructions:
        yield ins
        if isinstance(ins, FetchLoop):
            yield from walk(ins.body)


# --------------------------------------------------------------------------
# the program


@dataclass(frozen=True)
class CursorDecl:
    name: str
    relation: str
    pattern: str
    side: bool = False


@dataclass(frozen=True)
class SideTableDecl:
    name: str
    pred: str
    arity: int
    patterns: tuple[str, ...] = ()


@dataclass
class CodePiece:
    node: RuleNode
    labels: list[Label]
    cursors: list[str] = field(default_factory=list)
    protected: bool = False

    @property
    def copy_all(self) -> bool:
        return self.node.conflict


@dataclass
class CodePieceProgram:
    blocks: dict[Label, tuple]
    init: tuple[Label, ...]
    init_facts: tuple[tuple[str, tuple], ...]
    init_answers: tuple[tuple, ...]
    rtvars: dict[RtVar, str | None]
    temps: dict[Temp, str | None]
    cursors: dict[str, CursorDecl]
    side_tables: dict[str, SideTableDecl]
    tabling: TablingPlan
    pieces: list[CodePiece]
    graph: RuleApplicationGraph
    answer_pred: str = "answer"

    @property
    def labels(self) -> list[Label]:
        return list(self.blocks)

    @property
    def edb_preds(self) -> set[str]:
        return {c.relation for c in self.cursors.values() if not c.side}

    def instructions(self) -> Iterator:
        for block in self.blocks.values():
            yield from walk(block)

    def pieces_for_rule(self, rule_no: int) -> list[CodePiece]:
        return [p for p in self.pieces if p.node.rule_no == rule_no]

    def rtvars_of_rule(self, rule_no: int) -> set[RtVar]:
        return {v for v in self.rtvars if v.rule_no == rule_no}

    def reads(self, label: Label) -> frozenset:
        """Runtime variables a block reads before writing them itself."""
        read, written = set(), set()
        for ins in walk(self.blocks[label]):
            ops: tuple = ()
            if isinstance(ins, OpenCursor):
                ops = ins.bound
            elif isinstance(ins, GuardColsEqConst):
                ops = tuple(v for _, v in ins.checks)
            elif isinstance(ins, GuardSlotsEq):
                ops = tuple(x for pair in ins.pairs for x in pair)
            elif isinstance(ins, AssignVar):
                ops = (ins.source,)
                written.add(ins.target)
            elif isinstance(ins, (DupCheck, StoreFact, EmitAnswer)):
                ops = ins.slots
            read.update(o for o in ops if isinstance(o, (RtVar, Temp)))
        return frozenset(read - written)

    def source(self) -> str:
        return format_source(self)


# --------------------------------------------------------------------------
# binding patterns


def select_binding_pattern(lit: Literal, known: Iterable[str], patterns: Iterable[str]) -> str:
    """Pick the access path for ``lit`` given the variables already known.

    A position can be bound when it holds a constant or a known variable.
    Among usable patterns the one with most bound positions wins, then the
    one whose bound positions come first, then declaration order.  The full
    scan is always usable.
    """
    known = set(known)
    usable = [
        i
        for i, t in enumerate(lit.args)
        if isinstance(t, Const) or (isinstance(t, Var) and t.name in known)
    ]
    patterns = list(dict.fromkeys(["f" * lit.arity, *patterns]))
    best = None
    for order, p in enumerate(patterns):
        if len(p) != lit.arity:
            raise ValueError(f"pattern {p!r} does not fit {lit}")
        bound = [i for i, c in enumerate(p) if c == "b"]
        if not set(bound) <= set(usable):
            continue
        key = (-len(bound), bound, order)
        if best is None or key < best[0]:
            best = (key, p)
    return best[1]


# --------------------------------------------------------------------------
# compilation


def _sequentialize(moves: list[tuple[RtVar, Slot]], temp: callable) -> list[AssignVar]:
    """Order a parallel assignment, breaking cycles with temporaries."""
    pending = [(d, s) for d, s in moves if d != s]
    out: list[AssignVar] = []
    while pending:
        sources = {s for _, s in pending}
        ready = [m for m in pending if m[0] not in sources]
        if ready:
            d, s = ready[0]
            out.append(AssignVar(d, s))
            pending.remove(ready[0])
            continue
        # every target is still needed as a source: a cyclic permutation
        d0, _ = pending[0]
        t = temp()
        out.append(AssignVar(t, d0))
        pending = [(d, t if s == d0 else s) for d, s in pending]
    return out


class PlanBuilder:
    """Compiles the rule nodes of a pruned graph into a CodePieceProgram."""

    def __init__(self, graph: RuleApplicationGraph, tabling: TablingPlan):
        self.graph = graph
        self.program = graph.program
        self.tabling = tabling
        self.answer = self.program.answer
        self.types = infer_types(self.program)[0]
        self.protected = protected_nodes(graph)
        self.nodes = sorted(graph.rule_nodes, key=lambda n: (n.rule_no, n.id))
        self.rtvars: dict[RtVar, str | None] = {}
        self.temps: dict[Temp, str | None] = {}
        self.cursors: dict[str, CursorDecl] = {}
        self.side_tables: dict[str, SideTableDecl] = {}
        self.blocks: dict[Label, tuple] = {}
        self._temp_count: dict[int, int] = {}
        self._allocate_labels()

    # ---- labels and names

    def _allocate_labels(self) -> None:
        self.start: dict[int, Label] = {}
        self.labels_of: dict[int, dict[str, Label]] = {}
        per_rule: dict[int, int] = {}
        for n in self.nodes:
            per_rule[n.rule_no] = per_rule.get(n.rule_no, 0) + 1
        seen: dict[int, int] = {}
        self.node_tag: dict[int, str] = {}
        next_id = 1
        for n in self.nodes:
            seen[n.rule_no] = seen.get(n.rule_no, 0) + 1
            tag = str(n.rule_no) if per_rule[n.rule_no] == 1 else f"{n.rule_no}_{seen[n.rule_no]}"
            self.node_tag[n.id] = tag
            kinds = []
            if n.kind in ("edb", "edb2"):
                kinds.append("INIT")
                if n.kind == "edb2":
                    kinds.append("OUTER")
                kinds.append("CONT")
            else:
                kinds.append("START")
                if n.kind in ("idb_edb", "idb2"):
                    kinds.append("CONT")
                    if n in self.protected:
                        kinds.append("RESTORE")
            labels = {}
            for kind in kinds:
                if kind == "START":
                    name = f"START({n.input}, {n.rule_no}, {n.pos + 1})"
                    lab = Label(next_id, kind, n.rule_no, name, n.id, n.input, n.pos)
                    self.start[n.id] = lab
                else:
                    lab = Label(next_id, kind, n.rule_no, f"{kind}({tag})", n.id)
                labels[kind] = lab
                next_id += 1
            self.labels_of[n.id] = labels

    def _temp(self, rule_no: int) -> Temp:
        k = self._temp_count[rule_no] = self._temp_count.get(rule_no, 0) + 1
        t = Temp(f"t{rule_no}_{k}")
        self.temps[t] = None
        return t

    def _declare(self, var: RtVar, typ: str | None) -> None:
        if self.rtvars.get(var) is None:
            self.rtvars[var] = typ

    def _cursor(self, n: RuleNode, relation: str, pattern: str, suffix: str = "", side=False) -> str:
        name = f"c{self.node_tag[n.id]}{suffix}"
        self.cursors[name] = CursorDecl(name, relation, pattern, side)
        return name

    # ---- shared pieces

    def _patterns(self, pred: str) -> tuple[str, ...]:
        return self.program.edb_decl(pred).access_patterns

    def compile_answer_dispatch(self, fact: SymbolicFact) -> list:
        """Pass a derived fact on: emit answers, jump into consumers otherwise."""
        if fact.pred == self.answer:
            return [EmitAnswer(fact.slots)]
        consumers = self.graph.consumers(fact)
        if not consumers:
            raise PlanError(f"fact {fact} has no consumer in the pruned graph")
        out: list = [PushBacktrack(self.start[c.id]) for c in consumers[1:]]
        out.append(Goto(self.start[consumers[0].id]))
        return out

    def _dup(self, fact: SymbolicFact, on_dup: str) -> list:
        if fact.pred in self.tabling:
            return [DupCheck(fact.pred, fact.slots, on_dup)]
        return []

    def _loop_tail(self, fact: SymbolicFact, cont: Label) -> list:
        tail = self._dup(fact, "continue")
        if fact.pred == self.answer:
            tail.extend(self.compile_answer_dispatch(fact))
        else:
            tail.append(PushBacktrack(cont))
            tail.extend(self.compile_answer_dispatch(fact))
        return tail

    def _scan(self, lit: Literal, cursor: str, pattern: str, env: dict[str, Operand]) -> tuple[tuple, list, dict[str, Col]]:
        """Bound operands, per-tuple guards and column sources for ``lit``.

        ``env`` gives the value of every variable known before the scan.
        """
        bound, checks, first = [], [], {}
        groups: dict[str, list[int]] = {}
        for i, t in enumerate(lit.args):
            value = t if isinstance(t, Const) else env.get(t.name)
            if pattern[i] == "b":
                bound.append(value)
            elif value is not None:
                checks.append((i, value))
            else:
                groups.setdefault(t.name, []).append(i)
                first.setdefault(t.name, Col(cursor, i))
        guards: list = []
        if checks:
            guards.append(GuardColsEqConst(cursor, tuple(checks)))
        pairs = tuple((g[k], g[k + 1]) for g in groups.values() for k in range(len(g) - 1))
        if pairs:
            guards.append(GuardColsEqCols(cursor, pairs))
        return tuple(bound), guards, first

    def _assigns(self, n: RuleNode, sources: dict[str, Col], col_types: dict[str, str | None]) -> list:
        out = []
        for v in n.rule.head.variables():
            if v in sources:
                target = RtVar(n.rule_no, v)
                self._declare(target, col_types.get(v))
                out.append(AssignVar(target, sources[v]))
        return out

    def _col_types(self, lit: Literal, pred: str) -> dict[str, str | None]:
        out = {}
        for i, t in enumerate(lit.args):
            if isinstance(t, Var):
                out.setdefault(t.name, self.types.get((pred, i)))
        return out

    # ---- the rule shapes

    def compile_one_edb(self, n: RuleNode) -> CodePiece:
        labels = self.labels_of[n.id]
        lit = n.rule.body[0]
        pattern = select_binding_pattern(lit, (), self._patterns(lit.pred))
        c = self._cursor(n, lit.pred, pattern)
        bound, guards, sources = self._scan(lit, c, pattern, {})
        body = guards + self._assigns(n, sources, self._col_types(lit, lit.pred))
        body += self._loop_tail(n.output, labels["CONT"])
        self.blocks[labels["INIT"]] = (OpenCursor(c, bound), Goto(labels["CONT"]))
        self.blocks[labels["CONT"]] = (FetchLoop(c, tuple(body)), Break())
        return CodePiece(n, list(labels.values()), [c])

    def compile_two_edb(self, n: RuleNode) -> CodePiece:
        labels = self.labels_of[n.id]
        outer_lit, inner_lit = n.rule.body
        p_out = select_binding_pattern(outer_lit, (), self._patterns(outer_lit.pred))
        c_out = self._cursor(n, outer_lit.pred, p_out)
        bound_out, guards_out, sources_out = self._scan(outer_lit, c_out, p_out, {})
        p_in = select_binding_pattern(inner_lit, set(sources_out), self._patterns(inner_lit.pred))
        c_in = self._cursor(n, inner_lit.pred, p_in, suffix="b")
        bound_in, guards_in, sources_in = self._scan(inner_lit, c_in, p_in, dict(sources_out))
        sources = {**sources_in, **sources_out}
        col_types = {**self._col_types(inner_lit, inner_lit.pred), **self._col_types(outer_lit, outer_lit.pred)}
        inner_body = guards_in + self._assigns(n, sources, col_types) + self._loop_tail(n.output, labels["CONT"])
        outer_body = guards_out + [OpenCursor(c_in, bound_in), Goto(labels["CONT"])]
        self.blocks[labels["INIT"]] = (OpenCursor(c_out, bound_out), Goto(labels["OUTER"]))
        self.blocks[labels["OUTER"]] = (FetchLoop(c_out, tuple(outer_body)), Break())
        self.blocks[labels["CONT"]] = (FetchLoop(c_in, tuple(inner_body)), Goto(labels["OUTER"]))
        return CodePiece(n, list(labels.values()), [c_out, c_in])

    def _entry(self, n: RuleNode) -> list:
        pairs = tuple(n.residue)
        return [GuardSlotsEq(pairs)] if pairs else []

    def compile_one_idb(self, n: RuleNode) -> CodePiece:
        labels = self.labels_of[n.id]
        block = self._entry(n) + self._dup(n.output, "break")
        block += self.compile_answer_dispatch(n.output)
        if n.output.pred == self.answer:
            block.append(Break())
        self.blocks[labels["START"]] = tuple(block)
        return CodePiece(n, list(labels.values()))

    def _idb_with_scan(self, n: RuleNode, lit: Literal, relation: str, patterns,
                       side: bool, col_pred: str, store: list) -> CodePiece:
        labels = self.labels_of[n.id]
        protected = n in self.protected
        env = n.env()
        pattern = select_binding_pattern(lit, set(env), patterns)
        c = self._cursor(n, relation, pattern, side=side)
        block = self._entry(n) + store
        writes = n.writes()
        if protected:
            block += [SaveState(c, tuple(writes)), PushBacktrack(labels["RESTORE"])]
        for dst, src in n.copies():
            self._declare(dst, self.rtvars.get(src) if isinstance(src, RtVar) else None)
        copies = _sequentialize(n.copies(), lambda: self._temp(n.rule_no))
        block += copies
        bound, guards, sources = self._scan(lit, c, pattern, env)
        block += [OpenCursor(c, bound), Goto(labels["CONT"])]
        assigns = self._assigns(n, sources, self._col_types(lit, col_pred))
        body = guards + assigns + self._loop_tail(n.output, labels["CONT"])
        self.blocks[labels["START"]] = tuple(block)
        self.blocks[labels["CONT"]] = (FetchLoop(c, tuple(body)), Break())
        if protected:
            self.blocks[labels["RESTORE"]] = (RestoreState(c, tuple(writes)), Break())
        return CodePiece(n, list(labels.values()), [c], protected)

    def compile_idb_edb(self, n: RuleNode) -> CodePiece:
        lit = n.rule.body[n.other_pos]
        return self._idb_with_scan(n, lit, lit.pred, self._patterns(lit.pred), False, lit.pred, [])

    def side_table(self, rule_no: int, pos: int) -> SideTableDecl:
        name = f"t{rule_no}_{pos + 1}"
        if name not in self.side_tables:
            rule = self.program.rule(rule_no)
            lit, sel = rule.body[pos], rule.body[1 - pos]
            known = set(sel.variables())
            pattern = "".join(
                "b" if isinstance(t, Const) or t.name in known else "f" for t in lit.args
            )
            self.side_tables[name] = SideTableDecl(name, lit.pred, lit.arity, (pattern,))
        return self.side_tables[name]

    def compile_two_idb(self, n: RuleNode) -> CodePiece:
        own = self.side_table(n.rule_no, n.pos)
        other = self.side_table(n.rule_no, n.other_pos)
        lit = n.rule.body[n.other_pos]
        store = [StoreFact(own.name, n.input.slots)]
        patterns = ("f" * other.arity, *other.patterns)
        return self._idb_with_scan(n, lit, other.name, patterns, True, lit.pred, store)

    def compile_idb_fact(self, f: FactNode) -> list[Label]:
        """START labels to push at initialization, last consumer first."""
        return [self.start[c.id] for c in reversed(self.graph.consumers(f.fact))]

    def compile_node(self, n: RuleNode) -> CodePiece:
        return {
            "edb": self.compile_one_edb,
            "edb2": self.compile_two_edb,
            "idb": self.compile_one_idb,
            "idb_edb": self.compile_idb_edb,
            "idb2": self.compile_two_idb,
        }[n.kind](n)

    def assemble(self) -> CodePieceProgram:
        pieces = [self.compile_node(n) for n in self.nodes]
        # initialization ordered by rule number; IDB facts are numbered rules too
        sources: list[tuple[int, object]] = [(n.rule_no, n) for n in self.nodes if n.pos is None]
        fact_rule = {}
        for r in self.program.idb_facts:
            fact_rule.setdefault(SymbolicFact(r.head.pred, r.head.args), r.rule_no)
        for f in self.graph.facts.values():
            if f.given:
                sources.append((fact_rule[f.fact], f))
        sources.sort(key=lambda s: s[0])
        init: list[Label] = []
        init_facts, init_answers = [], []
        for _, src in sources:
            if isinstance(src, RuleNode):
                init.append(self.labels_of[src.id]["INIT"])
                continue
            values = tuple(s.value for s in src.fact.slots)
            if src.fact.pred in self.tabling:
                init_facts.append((src.fact.pred, values))
            if src.fact.pred == self.answer:
                init_answers.append(values)
            init.extend(self.compile_idb_fact(src))
        blocks = dict(sorted(self.blocks.items(), key=lambda kv: kv[0].id))
        plan = CodePieceProgram(
            blocks=blocks,
            init=tuple(init),
            init_facts=tuple(init_facts),
            init_answers=tuple(init_answers),
            rtvars=dict(sorted(self.rtvars.items())),
            temps=self.temps,
            cursors=self.cursors,
            side_tables=self.side_tables,
            tabling=self.tabling,
            pieces=pieces,
            graph=self.graph,
            answer_pred=self.answer,
        )
        check_plan(plan)
        return plan


def build_plan(graph: RuleApplicationGraph, tabling: TablingPlan) -> CodePieceProgram:
    return PlanBuilder(graph, tabling).assemble()


def check_plan(plan: CodePieceProgram) -> None:
    """Well-formedness checks; raises PlanError on the first problem."""
    labels = set(plan.blocks)
    ids = sorted(lab.id for lab in labels)
    if ids != list(range(1, len(ids) + 1)):
        raise PlanError("labels are not numbered densely")
    for lab in plan.init:
        if lab not in labels:
            raise PlanError(f"initialization pushes unknown label {lab}")
    for lab, block in plan.blocks.items():
        if not block or not isinstance(block[-1], (Break, Goto)):
            raise PlanError(f"block {lab} does not end in break or goto")
        for i, ins in enumerate(block):
            if isinstance(ins, GuardSlotsEq) and (lab.kind != "START" or i != 0):
                raise PlanError(f"unification guard outside piece entry in {lab}")
        for ins in walk(block):
            if isinstance(ins, (Goto, PushBacktrack)) and ins.label not in labels:
                raise PlanError(f"dangling label {ins.label} in {lab}")
            if isinstance(ins, AssignVar) and isinstance(ins.target, RtVar):
                if ins.target.rule_no != lab.rule_no:
                    raise PlanError(f"{ins.target} assigned in a piece of rule {lab.rule_no}")
            if isinstance(ins, (OpenCursor, FetchLoop)) and ins.cursor not in plan.cursors:
                raise PlanError(f"undeclared cursor {ins.cursor}")


# --------------------------------------------------------------------------
# pseudo-source


def _fmt(ins, indent: str, next_label: Label | None) -> list[str]:
    if isinstance(ins, OpenCursor):
        return [f"{indent}{ins.cursor}.open({', '.join(map(_op, ins.bound))});"]
    if isinstance(ins, FetchLoop):
        lines = [f"{indent}while({ins.cursor}.fetch()) {{"]
        for sub in ins.body:
            lines.extend(_fmt(sub, indent + "    ", None))
        lines.append(f"{indent}}}")
        return lines
    if isinstance(ins, GuardColsEqConst):
        cond = " || ".join(f"{ins.cursor}.col_{i + 1}() != {_op(v)}" for i, v in ins.checks)
        return [f"{indent}if({cond})", f"{indent}    continue;"]
    if isinstance(ins, GuardColsEqCols):
        cond = " || ".join(f"{ins.cursor}.col_{i + 1}() != {ins.cursor}.col_{j + 1}()" for i, j in ins.pairs)
        return [f"{indent}if({cond})", f"{indent}    continue;"]
    if isinstance(ins, GuardSlotsEq):
        cond = " || ".join(f"{_op(a)} != {_op(b)}" for a, b in ins.pairs)
        return [f"{indent}if({cond})", f"{indent}    break;"]
    if isinstance(ins, AssignVar):
        return [f"{indent}{ins.target} = {_op(ins.source)};"]
    if isinstance(ins, DupCheck):
        args = ", ".join(map(_op, ins.slots))
        return [f"{indent}if(!{ins.pred}_table.insert({args}))", f"{indent}    {ins.on_dup};"]
    if isinstance(ins, StoreFact):
        return [f"{indent}{ins.table}.append({', '.join(map(_op, ins.slots))});"]
    if isinstance(ins, PushBacktrack):
        return [f"{indent}backtrack_stack.push({ins.label.case});  // {ins.label}"]
    if isinstance(ins, Goto):
        if next_label is not None and ins.label == next_label:
            return []
        return [f"{indent}goto {ins.label.target};"]
    if isinstance(ins, SaveState):
        lines = [f"{indent}{ins.cursor}.push();"] if ins.cursor else []
        lines += [f"{indent}value_stack.push({v});" for v in ins.rtvars]
        return lines
    if isinstance(ins, RestoreState):
        lines = [f"{indent}{v} = value_stack.pop();" for v in reversed(ins.rtvars)]
        if ins.cursor:
            lines.append(f"{indent}{ins.cursor}.pop();")
        return lines
    if isinstance(ins, EmitAnswer):
        return [f"{indent}answer_sink.insert({', '.join(map(_op, ins.slots))});"]
    if isinstance(ins, Break):
        return [f"{indent}break;"]
    raise TypeError(ins)


def format_source(plan: CodePieceProgram) -> str:
    """Pseudo-source in the shape of the generated C++ main loop."""
    out = ["// Declaration Section"]
    for v, t in plan.rtvars.items():
        out.append(f"{t or 'auto'} {v};")
    for t, typ in plan.temps.items():
        out.append(f"{typ or 'auto'} {t};")
    for c in plan.cursors.values():
        kind = "side_cursor" if c.side else "cursor"
        out.append(f"{kind}_{c.relation}_{c.pattern} {c.name};")
    for s in plan.side_tables.values():
        out.append(f"side_table<{s.pred}/{s.arity}> {s.name};")
    for p in plan.tabling:
        out.append(f"hash_table<{p}> {p}_table;")
    out.append("")
    out.append("// Initialization Section")
    for pred, values in plan.init_facts:
        out.append(f"{pred}_table.insert({', '.join(_op(Const(v)) for v in values)});")
    for values in plan.init_answers:
        out.append(f"answer_sink.insert({', '.join(_op(Const(v)) for v in values)});")
    for lab in plan.init:
        out.append(f"backtrack_stack.push({lab.case});  // {lab}")
    out.append("while(!backtrack_stack.is_empty()) {")
    out.append("    switch(backtrack_stack.pop()) {")
    labels = list(plan.blocks)
    for k, lab in enumerate(labels):
        nxt = labels[k + 1] if k + 1 < len(labels) else None
        out.append(f"    case {lab.case}:  // {lab}")
        out.append(f"    {lab.target}:")
        block = plan.blocks[lab]
        for i, ins in enumerate(block):
            out.extend(_fmt(ins, " " * 8, nxt if i == len(block) - 1 else None))
    out.append("    }")
    out.append("}")
    return "\n".join(out) + "\n"
