"""Reference bottom-up evaluation (naive and semi-naive).

Both evaluators compute the least model of a program over an EDB database
one iteration of the immediate-consequence operator at a time.  They accept
rules with any number of body literals, so they also validate binary
normalization.  Speed is not a goal.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass

from .frontend import Const, Literal, Program, Rule

__all__ = ["EvalStats", "Interpretation", "naive_eval", "restrict", "seminaive_eval"]

Interpretation = dict[str, set[tuple]]


@dataclass
class EvalStats:
    iterations: int = 0
    rule_firings: int = 0  # body instantiations found


def _edb_facts(program: Program, db: Mapping[str, Iterable]) -> Interpretation:
    out: Interpretation = {}
    for pred in program.edb_preds:
        out[pred] = {tuple(t) for t in db.get(pred, ())}
    return out


def _match(lit: Literal, tup: tuple, env: dict) -> dict | None:
    new = env
    for t, v in zip(lit.args, tup):
        if isinstance(t, Const):
            if t.value != v:
                return None
        else:
            bound = new.get(t.name, _MISSING)
            if bound is _MISSING:
                if new is env:
                    new = dict(env)
                new[t.name] = v
            elif bound != v:
                return None
    return new


_MISSING = object()


def _solve(body, sources, env, stats: EvalStats):
    if not body:
        stats.rule_firings += 1
        yield env
        return
    lit, rest = body[0], body[1:]
    for tup in sources[0]:
        new = _match(lit, tup, env)
        if new is not None:
            yield from _solve(rest, sources[1:], new, stats)


def _head(rule: Rule, env: dict) -> tuple:
    return tuple(t.value if isinstance(t, Const) else env[t.name] for t in rule.head.args)


def _fire(rule: Rule, sources, stats: EvalStats) -> set[tuple]:
    return {_head(rule, env) for env in _solve(rule.body, sources, {}, stats)}


def naive_eval(program: Program, db: Mapping[str, Iterable], stats: EvalStats | None = None) -> Interpretation:
    """Least fixpoint by re-applying every rule to all known facts."""
    stats = stats if stats is not None else EvalStats()
    model = _edb_facts(program, db)
    for pred in program.idb_preds:
        model.setdefault(pred, set())
    while True:
        stats.iterations += 1
        new: Interpretation = {}
        for r in program.rules:
            derived = _fire(r, [model[lit.pred] for lit in r.body], stats)
            fresh = derived - model[r.head.pred]
            if fresh:
                new.setdefault(r.head.pred, set()).update(fresh)
        if not new:
            return model
        for pred, tuples in new.items():
            model[pred] |= tuples


def seminaive_eval(program: Program, db: Mapping[str, Iterable], stats: EvalStats | None = None) -> Interpretation:
    """Least fixpoint where each iteration only uses rule instances that
    involve at least one fact derived in the previous iteration."""
    stats = stats if stats is not None else EvalStats()
    idb = program.idb_preds
    model = _edb_facts(program, db)
    for pred in idb:
        model.setdefault(pred, set())

    # first round: all rules over the EDB and an empty IDB
    stats.iterations += 1
    delta: Interpretation = {p: set() for p in idb}
    for r in program.rules:
        if any(lit.pred in idb for lit in r.body):
            continue
        delta[r.head.pred] |= _fire(r, [model[lit.pred] for lit in r.body], stats)
    for p in idb:
        model[p] |= delta[p]

    while any(delta.values()):
        stats.iterations += 1
        old = {p: model[p] - delta[p] for p in idb}
        new: Interpretation = {p: set() for p in idb}
        for r in program.rules:
            positions = [i for i, lit in enumerate(r.body) if lit.pred in idb]
            for k in positions:
                if not delta[r.body[k].pred]:
                    continue
                # literals before k see the old facts, k sees the delta, later ones all facts
                sources = []
                for i, lit in enumerate(r.body):
                    if i == k:
                        sources.append(delta[lit.pred])
                    elif i in positions and i < k:
                        sources.append(old[lit.pred])
                    else:
                        sources.append(model[lit.pred])
                new[r.head.pred] |= _fire(r, sources, stats)
        delta = {p: new[p] - model[p] for p in idb}
        for p in idb:
            model[p] |= delta[p]
    return model


def restrict(model: Interpretation, preds: Iterable[str]) -> Interpretation:
    return {p: set(model.get(p, ())) for p in preds}
