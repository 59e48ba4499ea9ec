"""Compile-time partial evaluation over symbolic facts.

A symbolic fact records what is known about a fact before the database is
seen: a constant in some argument positions, the name of the runtime
variable that will hold the value in the others.  Running the rules over
symbolic facts to a fixpoint yields the rule application graph, a bipartite
graph of fact nodes and rule nodes from which the code pieces are generated.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Union

import networkx as nx

from .frontend import Const, Literal, Program, Rule, Var

__all__ = [
    "FactNode",
    "RtVar",
    "RuleApplicationGraph",
    "RuleNode",
    "SymbolicFact",
    "TablingPlan",
    "choose_tabling",
    "derive_head",
    "detect_conflict",
    "protected_nodes",
    "prune_useless",
    "recursive_nodes",
    "residue",
    "symbolic_fixpoint",
    "uncovered_cycle",
    "unify_fact_literal",
]


@dataclass(frozen=True, order=True)
class RtVar:
    """Runtime variable ``v<rule_no>_<var>``, written only by its own rule."""

    rule_no: int
    var: str

    def __str__(self):
        return f"v{self.rule_no}_{self.var}"


Slot = Union[Const, RtVar]
Subst = dict  # Var | RtVar -> Slot


@dataclass(frozen=True)
class SymbolicFact:
    pred: str
    slots: tuple[Slot, ...] = ()

    def rtvars(self) -> list[RtVar]:
        return list(dict.fromkeys(s for s in self.slots if isinstance(s, RtVar)))

    def is_ground(self) -> bool:
        return all(isinstance(s, Const) for s in self.slots)

    def subsumes(self, values: tuple) -> bool:
        """True if the ground tuple is an instance of this symbolic fact."""
        if len(values) != len(self.slots):
            return False
        seen: dict[RtVar, object] = {}
        for s, v in zip(self.slots, values):
            if isinstance(s, Const):
                if s.value != v:
                    return False
            elif seen.setdefault(s, v) != v:
                return False
        return True

    def __str__(self):
        if not self.slots:
            return self.pred
        return f"{self.pred}({', '.join(map(str, self.slots))})"


# --------------------------------------------------------------------------
# unification


def _rank(x, first_seen: dict) -> tuple:
    if isinstance(x, Const):
        return (0, 0)
    if isinstance(x, RtVar):
        return (1, first_seen[x])
    return (2, 0)


def unify_fact_literal(fact: SymbolicFact, lit: Literal) -> Subst | None:
    """Most general unifier of a symbolic fact and a body literal.

    Variable-to-variable bindings always send logic variables to runtime
    variables; between two runtime variables the one occurring first in the
    fact is kept.  Returns None when the two do not unify.

    >>> f = SymbolicFact("p", (Const("c1"), RtVar(1, "Y")))
    >>> s = unify_fact_literal(f, Literal("p", (Var("X"), Var("X"))))
    >>> sorted((str(k), str(v)) for k, v in s.items())
    [('X', 'c1'), ('v1_Y', 'c1')]
    """
    if fact.pred != lit.pred or len(fact.slots) != len(lit.args):
        raise ValueError(f"cannot unify {fact} with {lit}")
    parent: dict = {}
    first_seen: dict[RtVar, int] = {}
    for i, s in enumerate(fact.slots):
        if isinstance(s, RtVar):
            first_seen.setdefault(s, i)

    def find(x):
        while parent.get(x, x) != x:
            x = parent[x]
        return x

    for slot, term in zip(fact.slots, lit.args):
        a, b = find(slot), find(term)
        if a == b:
            continue
        if isinstance(a, Const) and isinstance(b, Const):
            return None
        if _rank(b, first_seen) < _rank(a, first_seen):
            a, b = b, a
        parent[b] = a

    subst = {}
    for x in list(parent):
        rep = find(x)
        if rep != x:
            subst[x] = rep
    return subst


def residue(subst: Subst) -> list[tuple[RtVar, Slot]]:
    """Runtime part of a unification: pairs that must hold as equalities."""
    return [(v, s) for v, s in subst.items() if isinstance(v, RtVar)]


def written_vars(rule: Rule, pos: int | None) -> list[RtVar]:
    """Runtime variables the rule assigns when not in copy-all mode.

    These are the head variables that do not appear in the selected IDB body
    literal; their values come from the other body literal.
    """
    from_idb = set(rule.body[pos].variables()) if pos is not None else set()
    return [RtVar(rule.rule_no, v) for v in rule.head.variables() if v not in from_idb]


def derive_head(rule: Rule, subst: Subst | None, pos: int | None = None,
                copy_all: bool = False) -> SymbolicFact:
    """Symbolic fact produced by applying ``rule`` with unifier ``subst``.

    Head constants stay constants, variables of the selected IDB literal take
    their value from the unifier, everything else becomes a runtime variable
    of this rule.  In copy-all mode the IDB literal's variables are copied
    into the rule's own runtime variables as well.
    """
    idb_vars = set(rule.body[pos].variables()) if pos is not None else set()
    slots = []
    for t in rule.head.args:
        if isinstance(t, Const):
            slots.append(t)
        elif t.name in idb_vars:
            if subst is None:
                raise ValueError(f"rule {rule.rule_no}: unifier required for {t}")
            value = subst.get(t, t)
            if isinstance(value, Var):
                raise AssertionError(f"rule {rule.rule_no}: {t} left unbound by unifier")
            if copy_all and isinstance(value, RtVar):
                value = RtVar(rule.rule_no, t.name)
            slots.append(value)
        elif any(t.name in lit.variables() for lit in rule.body):
            slots.append(RtVar(rule.rule_no, t.name))
        else:
            raise AssertionError(f"rule {rule.rule_no}: head variable {t} is not range restricted")
    return SymbolicFact(rule.head.pred, tuple(slots))


# --------------------------------------------------------------------------
# the graph


@dataclass(eq=False)
class FactNode:
    id: int
    fact: SymbolicFact
    given: bool = False  # an IDB fact of the program

    @property
    def name(self) -> str:
        return f"fact{self.id}"


@dataclass(eq=False)
class RuleNode:
    """A symbolic rule application.

    ``pos`` is the position of the selected IDB body literal and ``input``
    the symbolic fact fed into it; both are None for rules without IDB
    body literals.
    """

    id: int
    rule: Rule
    pos: int | None
    input: SymbolicFact | None
    subst: Subst | None
    output: SymbolicFact
    conflict: bool = False
    idb_positions: tuple[int, ...] = ()

    @property
    def name(self) -> str:
        return f"app{self.id}"

    @property
    def rule_no(self) -> int:
        return self.rule.rule_no

    @property
    def kind(self) -> str:
        """One of ``edb``, ``edb2``, ``idb``, ``idb_edb``, ``idb2``."""
        n = len(self.rule.body)
        if self.pos is None:
            return "edb" if n == 1 else "edb2"
        if n == 1:
            return "idb"
        return "idb2" if len(self.idb_positions) == 2 else "idb_edb"

    @property
    def other_pos(self) -> int | None:
        if self.pos is None or len(self.rule.body) < 2:
            return None
        return 1 - self.pos

    @property
    def residue(self) -> list[tuple[RtVar, Slot]]:
        return residue(self.subst or {})

    def env(self) -> dict[str, Slot]:
        """Value source for each variable of the selected IDB literal."""
        if self.pos is None:
            return {}
        out = {}
        for v in self.rule.body[self.pos].variables():
            value = self.subst.get(Var(v), Var(v))
            if self.conflict and isinstance(value, RtVar):
                value = RtVar(self.rule_no, v)
            out[v] = value
        return out

    def copies(self) -> list[tuple[RtVar, Slot]]:
        """Copy-all moves: (own runtime variable, input slot)."""
        if not self.conflict:
            return []
        moves = []
        for v in self.rule.body[self.pos].variables():
            src = self.subst.get(Var(v), Var(v))
            if isinstance(src, RtVar):
                moves.append((RtVar(self.rule_no, v), src))
        return moves

    def writes(self) -> list[RtVar]:
        """Runtime variables assigned by the code piece of this node."""
        out = [dst for dst, _ in self.copies()]
        out.extend(v for v in written_vars(self.rule, self.pos) if v not in out)
        return out

    def label_text(self) -> str:
        return str(self.rule)


class RuleApplicationGraph:
    def __init__(self, program: Program):
        self.program = program
        self.facts: dict[SymbolicFact, FactNode] = {}
        self.rule_nodes: list[RuleNode] = []
        self._consumers: dict[SymbolicFact, list[RuleNode]] = {}
        self._producers: dict[SymbolicFact, list[RuleNode]] = {}

    def add_fact(self, fact: SymbolicFact, given: bool = False) -> tuple[FactNode, bool]:
        node = self.facts.get(fact)
        if node is not None:
            node.given = node.given or given
            return node, False
        node = FactNode(len(self.facts) + 1, fact, given)
        self.facts[fact] = node
        return node, True

    def add_rule_node(self, node: RuleNode) -> None:
        self.rule_nodes.append(node)
        if node.input is not None:
            self._consumers.setdefault(node.input, []).append(node)
        self._producers.setdefault(node.output, []).append(node)

    def consumers(self, fact: SymbolicFact) -> list[RuleNode]:
        """Rule nodes using ``fact``, ordered by (rule number, literal position)."""
        return sorted(self._consumers.get(fact, ()), key=lambda n: (n.rule_no, n.pos, n.id))

    def producers(self, fact: SymbolicFact) -> list[RuleNode]:
        return list(self._producers.get(fact, ()))

    def nodes_of_rule(self, rule_no: int) -> list[RuleNode]:
        return [n for n in self.rule_nodes if n.rule_no == rule_no]

    @property
    def answer_facts(self) -> list[FactNode]:
        return [n for n in self.facts.values() if n.fact.pred == self.program.answer]

    def __len__(self):
        return len(self.facts) + len(self.rule_nodes)

    def to_networkx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        for f in self.facts.values():
            g.add_node(f.name, node=f)
        for r in self.rule_nodes:
            g.add_node(r.name, node=r)
            if r.input is not None:
                g.add_edge(self.facts[r.input].name, r.name)
            g.add_edge(r.name, self.facts[r.output].name)
        return g

    def subgraph(self, keep: set[str]) -> RuleApplicationGraph:
        """Copy restricted to the named nodes, ids unchanged."""
        out = RuleApplicationGraph(self.program)
        for f in self.facts.values():
            if f.name in keep:
                out.facts[f.fact] = f
        for r in self.rule_nodes:
            if r.name in keep:
                out.add_rule_node(r)
        return out

    def to_dot(self) -> str:
        """Graphviz rendering; fact nodes are ellipses, rule nodes boxes."""

        def q(text: str) -> str:
            return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'

        lines = ["digraph rule_application_graph {", "  rankdir=BT;"]
        for f in sorted(self.facts.values(), key=lambda n: n.id):
            extra = ", peripheries=2" if f.given else ""
            lines.append(f"  {f.name} [shape=ellipse, label={q(str(f.fact))}{extra}];")
        for r in sorted(self.rule_nodes, key=lambda n: n.id):
            lines.append(f"  {r.name} [shape=box, label={q(r.label_text())}];")
        for r in sorted(self.rule_nodes, key=lambda n: n.id):
            if r.input is not None:
                lines.append(f"  {self.facts[r.input].name} -> {r.name};")
            lines.append(f"  {r.name} -> {self.facts[r.output].name};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _conflicts(rule: Rule, pos: int, fact: SymbolicFact) -> bool:
    return bool(set(fact.slots) & set(written_vars(rule, pos)))


def detect_conflict(node: RuleNode) -> bool:
    """True if the input fact holds a runtime variable the rule reassigns."""
    if node.pos is None or node.input is None:
        return False
    return _conflicts(node.rule, node.pos, node.input)


def _fact_bound(program: Program) -> int:
    arities = program.arities
    preds = program.idb_preds
    consts = {t for r in program.rules for lit in (r.head, *r.body) for t in lit.args if isinstance(t, Const)}
    n_vars = sum(len(r.variables()) for r in program.rules)
    max_arity = max((arities[p] for p in preds), default=0)
    return len(preds) * (len(consts) + n_vars) ** max_arity + len(program.idb_facts)


def symbolic_fixpoint(program: Program) -> RuleApplicationGraph:
    """All symbolic facts derivable from the program, as a graph.

    ``program`` must be validated and binary.  Fact nodes are processed in
    FIFO order; the result is the same set whatever the order.
    """
    if any(len(r.body) > 2 for r in program.rules):
        raise ValueError("symbolic_fixpoint needs a binary program; call normalize_binary first")
    idb = program.idb_preds
    graph = RuleApplicationGraph(program)
    queue: deque[SymbolicFact] = deque()
    by_pred: dict[str, list[tuple[Rule, int, tuple[int, ...]]]] = {}

    def emit(node: RuleNode):
        graph.add_rule_node(node)
        _, new = graph.add_fact(node.output)
        if new:
            queue.append(node.output)

    for r in program.rules:
        positions = tuple(i for i, lit in enumerate(r.body) if lit.pred in idb)
        for i in positions:
            by_pred.setdefault(r.body[i].pred, []).append((r, i, positions))
        if r.is_fact:
            fact = SymbolicFact(r.head.pred, tuple(r.head.args))
            _, new = graph.add_fact(fact, given=True)
            if new:
                queue.append(fact)
        elif not positions:
            emit(RuleNode(len(graph.rule_nodes) + 1, r, None, None, None, derive_head(r, None)))

    bound = _fact_bound(program)
    while queue:
        fact = queue.popleft()
        for r, pos, positions in by_pred.get(fact.pred, ()):
            subst = unify_fact_literal(fact, r.body[pos])
            if subst is None:
                continue
            conflict = _conflicts(r, pos, fact)
            out = derive_head(r, subst, pos, copy_all=conflict)
            emit(RuleNode(len(graph.rule_nodes) + 1, r, pos, fact, subst, out, conflict, positions))
        assert len(graph.facts) <= bound, "symbolic fixpoint exceeded its size bound"
    return graph


def prune_useless(graph: RuleApplicationGraph) -> RuleApplicationGraph:
    """Keep exactly the nodes from which an ``answer`` fact node is reachable."""
    g = graph.to_networkx()
    keep: set[str] = set()
    for f in graph.answer_facts:
        keep.add(f.name)
        keep |= nx.ancestors(g, f.name)
    return graph.subgraph(keep)


def recursive_nodes(graph: RuleApplicationGraph) -> set[RuleNode]:
    """Rule nodes lying on a directed cycle."""
    g = graph.to_networkx()
    out = set()
    for comp in nx.strongly_connected_components(g):
        if len(comp) > 1:
            out.update(g.nodes[n]["node"] for n in comp if n.startswith("app"))
    return out


def protected_nodes(graph: RuleApplicationGraph) -> set[RuleNode]:
    """Rule nodes whose code piece must save and restore its state.

    A node needs protection when it can run while values it overwrites are
    still awaited by pending tasks: that is when it is reachable from a node
    of the same rule, itself included (a cycle).  Nodes with no input never
    qualify.
    """
    g = graph.to_networkx()
    out = set(recursive_nodes(graph))
    by_rule: dict[int, list[RuleNode]] = {}
    for n in graph.rule_nodes:
        by_rule.setdefault(n.rule_no, []).append(n)
    for nodes in by_rule.values():
        if len(nodes) < 2:
            continue
        names = {n.name for n in nodes}
        for n in nodes:
            for d in nx.descendants(g, n.name) & names:
                out.add(g.nodes[d]["node"])
    return out


# --------------------------------------------------------------------------
# tabling


@dataclass(frozen=True)
class TablingPlan:
    preds: frozenset[str] = field(default_factory=frozenset)

    def __contains__(self, pred):
        return pred in self.preds

    def __iter__(self):
        return iter(sorted(self.preds))

    def __len__(self):
        return len(self.preds)

    def with_pred(self, pred: str) -> TablingPlan:
        return TablingPlan(self.preds | {pred})


def _without_tabled(graph: RuleApplicationGraph, preds) -> nx.DiGraph:
    g = graph.to_networkx()
    g.remove_nodes_from([r.name for r in graph.rule_nodes if r.output.pred in preds])
    return g


def uncovered_cycle(graph: RuleApplicationGraph, preds) -> list[str] | None:
    """A cycle (as node labels) containing no rule node deriving a tabled
    predicate, or None when every cycle is covered."""
    g = _without_tabled(graph, preds)
    try:
        edges = nx.find_cycle(g)
    except nx.NetworkXNoCycle:
        return None
    labels = []
    for u, _ in edges:
        node = g.nodes[u]["node"]
        labels.append(str(node.fact) if isinstance(node, FactNode) else f"rule {node.rule_no}")
    return labels


def _cyclic_members(g: nx.DiGraph) -> set[str]:
    return {n for comp in nx.strongly_connected_components(g) if len(comp) > 1 for n in comp}


def choose_tabling(graph: RuleApplicationGraph) -> TablingPlan:
    """Greedy cycle cover by predicates.

    Repeatedly tables the predicate whose removal takes the most nodes off
    cycles; ties go to the smaller arity, then the name.
    """
    arities = graph.program.arities
    chosen: set[str] = set()
    while True:
        g = _without_tabled(graph, chosen)
        cyclic = _cyclic_members(g)
        if not cyclic:
            return TablingPlan(frozenset(chosen))
        candidates = {g.nodes[n]["node"].fact.pred for n in cyclic if n.startswith("fact")}
        best = None
        for pred in candidates:
            h = _without_tabled(graph, chosen | {pred})
            score = len(cyclic) - len(_cyclic_members(h) & cyclic)
            key = (-score, arities[pred], pred)
            if best is None or key < best[0]:
                best = (key, pred)
        chosen.add(best[1])
