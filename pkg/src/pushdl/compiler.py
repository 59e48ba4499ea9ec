"""The whole compile pipeline: source text to executable plan."""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass

from .engine import RunResult, run
from .frontend import DatalogError, Program, normalize_binary, parse_program, validate
from .plangen import CodePieceProgram, build_plan
from .storage import Relation, as_database
from .symbolic import (
    RuleApplicationGraph,
    TablingPlan,
    choose_tabling,
    prune_useless,
    symbolic_fixpoint,
    uncovered_cycle,
)

__all__ = ["Compilation", "TablingError", "compile_program", "evaluate"]


class TablingError(DatalogError):
    """A requested tabling plan leaves a recursive cycle unguarded."""


@dataclass
class Compilation:
    program: Program
    normalized: Program
    full_graph: RuleApplicationGraph
    graph: RuleApplicationGraph
    tabling: TablingPlan
    plan: CodePieceProgram


def compile_program(
    source: str | Program,
    *,
    schema: str | None = None,
    table: Iterable[str] | None = None,
    multiset_answers: bool = False,
) -> Compilation:
    """Parse, check, normalize, partially evaluate and generate code.

    ``table`` overrides the automatic tabling choice; it must still break
    every cycle of the pruned graph.  Unless ``multiset_answers`` is set the
    answer predicate is tabled too, giving set semantics for answers.
    """
    program = parse_program(source, schema) if isinstance(source, str) else source
    problems = validate(program)
    if problems:
        raise DatalogError("; ".join(problems))
    normalized = normalize_binary(program)
    full = symbolic_fixpoint(normalized)
    graph = prune_useless(full)
    if table is None:
        tabling = choose_tabling(graph)
    else:
        tabling = TablingPlan(frozenset(table))
        cycle = uncovered_cycle(graph, tabling.preds)
        if cycle is not None:
            raise TablingError("tabling plan leaves a cycle uncovered: " + " -> ".join(cycle))
    if not multiset_answers:
        tabling = tabling.with_pred(program.answer)
    plan = build_plan(graph, tabling)
    return Compilation(program, normalized, full, graph, tabling, plan)


def evaluate(
    source: str | Program | Compilation,
    data: Mapping[str, Iterable],
    **options,
) -> RunResult:
    """Compile (unless given a Compilation) and run over in-memory rows."""
    shadow = options.pop("shadow", False)
    record = options.pop("record", False)
    comp = source if isinstance(source, Compilation) else compile_program(source, **options)
    db: Mapping[str, Relation] = as_database(comp.normalized, data)
    return run(comp.plan, db, shadow=shadow, record=record)
