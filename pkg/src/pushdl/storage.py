"""EDB relation storage with binding-pattern cursors.

A :class:`Relation` keeps its tuples in insertion order and one hash index
per declared binding pattern.  A :class:`Cursor` walks the tuples that match
the values given for the bound positions of its pattern and can save and
restore its scan state on a private stack.
"""

from __future__ import annotations

import csv
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

from .frontend import COLUMN_TYPES, Program

__all__ = [
    "Cursor",
    "CursorError",
    "LoadError",
    "Relation",
    "SideTable",
    "as_database",
    "load_csv",
    "load_database",
    "load_relation",
]


class LoadError(ValueError):
    """A row does not conform to the relation's column types."""


class CursorError(RuntimeError):
    """Cursor protocol violation (always a bug in the caller)."""


def _check_pattern(pattern: str, arity: int) -> str:
    if len(pattern) != arity or set(pattern) - {"b", "f"}:
        raise ValueError(f"invalid binding pattern {pattern!r} for arity {arity}")
    return pattern


def _bound_positions(pattern: str) -> tuple[int, ...]:
    return tuple(i for i, c in enumerate(pattern) if c == "b")


class Relation:
    """An in-memory relation with set semantics."""

    def __init__(self, name: str, types: Sequence[str], patterns: Iterable[str] = ()):
        self.name = name
        self.types = tuple(types)
        self.typed = True
        self.tuples: list[tuple] = []
        self._members: set[tuple] = set()
        self._indexes: dict[str, tuple[tuple[int, ...], dict[tuple, list[int]]]] = {}
        for p in patterns:
            self.add_index(p)

    @property
    def arity(self) -> int:
        return len(self.types)

    @property
    def patterns(self) -> tuple[str, ...]:
        scan = "f" * self.arity
        return (scan, *(p for p in self._indexes if p != scan))

    def __len__(self):
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)

    def __contains__(self, tup):
        return tuple(tup) in self._members

    def __repr__(self):
        return f"Relation({self.name!r}, {self.types}, {len(self)} tuples)"

    def add_index(self, pattern: str) -> None:
        _check_pattern(pattern, self.arity)
        bound = _bound_positions(pattern)
        if not bound or pattern in self._indexes:
            return
        index: dict[tuple, list[int]] = {}
        for pos, tup in enumerate(self.tuples):
            index.setdefault(tuple(tup[i] for i in bound), []).append(pos)
        self._indexes[pattern] = (bound, index)

    def _add(self, tup: tuple) -> bool:
        if tup in self._members:
            return False
        pos = len(self.tuples)
        self.tuples.append(tup)
        self._members.add(tup)
        for bound, index in self._indexes.values():
            index.setdefault(tuple(tup[i] for i in bound), []).append(pos)
        return True

    def positions(self, pattern: str, key: tuple) -> Sequence[int]:
        """Positions of tuples matching ``key`` on the bound columns.

        The returned sequence may grow later (side tables); callers that need
        a snapshot record its length.
        """
        bound = _bound_positions(pattern)
        if not bound:
            return range(len(self.tuples))
        if pattern not in self._indexes:
            raise ValueError(f"relation {self.name} has no access path {pattern}")
        return self._indexes[pattern][1].get(key, ())

    def cursor(self, pattern: str | None = None) -> Cursor:
        return Cursor(self, pattern)


class SideTable(Relation):
    """Append-only table of facts seen for one IDB body literal.

    Unlike EDB relations, a side table keeps duplicates: each arriving fact
    is joined once, so it must be stored once per arrival.
    """

    def append(self, tup: tuple) -> None:
        pos = len(self.tuples)
        self.tuples.append(tup)
        self._members.add(tup)
        for bound, index in self._indexes.values():
            index.setdefault(tuple(tup[i] for i in bound), []).append(pos)


_CLOSED = None


class Cursor:
    """Scan over the tuples of a relation matching a binding pattern.

    The scan sees only tuples present when :meth:`open` was called, so rows
    appended to a side table during an active scan are not returned.
    """

    def __init__(self, relation: Relation, pattern: str | None = None):
        self.relation = relation
        self.pattern = _check_pattern(pattern or "f" * relation.arity, relation.arity)
        if self.pattern not in relation.patterns:
            raise ValueError(f"relation {relation.name} has no access path {self.pattern}")
        self.n_bound = len(_bound_positions(self.pattern))
        self._state = _CLOSED
        self._saved: list = []

    # state: (bound values, candidate positions, end, next index, current row)

    def open(self, *bound) -> None:
        if len(bound) != self.n_bound:
            raise CursorError(
                f"cursor on {self.relation.name}_{self.pattern} expects {self.n_bound} bound values"
            )
        positions = self.relation.positions(self.pattern, tuple(bound))
        self._state = [tuple(bound), positions, len(positions), 0, None]

    def fetch(self) -> bool:
        st = self._state
        if st is _CLOSED:
            raise CursorError(f"fetch on unopened cursor over {self.relation.name}")
        if st[3] >= st[2]:
            st[4] = None
            return False
        st[4] = self.relation.tuples[st[1][st[3]]]
        st[3] += 1
        return True

    def col(self, i: int):
        """Value of column ``i`` (0-based) of the current tuple."""
        st = self._state
        if st is _CLOSED or st[4] is None:
            raise CursorError(f"col({i}) on {self.relation.name} without a current tuple")
        return st[4][i]

    @property
    def current(self) -> tuple | None:
        return None if self._state is _CLOSED else self._state[4]

    def close(self) -> None:
        self._state = _CLOSED

    def push_state(self) -> None:
        st = self._state
        self._saved.append(None if st is _CLOSED else list(st))

    def pop_state(self) -> None:
        if not self._saved:
            raise CursorError(f"pop_state on {self.relation.name} with empty state stack")
        self._state = self._saved.pop()

    @property
    def depth(self) -> int:
        return len(self._saved)


# --------------------------------------------------------------------------
# loading


def _convert(value, typ: str, row_no: int, col: int, name: str):
    if typ == "int":
        if isinstance(value, bool):
            pass
        elif isinstance(value, int):
            return value
        elif isinstance(value, str):
            try:
                return int(value.strip())
            except ValueError:
                pass
        raise LoadError(f"{name}: row {row_no}, column {col + 1}: expected int, got {value!r}")
    if isinstance(value, str):
        return value
    raise LoadError(f"{name}: row {row_no}, column {col + 1}: expected str, got {value!r}")


def _looks_int(value) -> bool:
    if isinstance(value, bool):
        return False
    if isinstance(value, int):
        return True
    try:
        int(str(value).strip())
    except ValueError:
        return False
    return True


def load_relation(
    name: str,
    column_types: Sequence[str] | None,
    rows: Iterable[Sequence],
    patterns: Iterable[str] = (),
    arity: int | None = None,
) -> Relation:
    """Build a relation from rows, converting and checking column types.

    With ``column_types=None`` each column is typed ``int`` when every value
    parses as an integer and ``str`` otherwise.  Exact duplicate rows are
    dropped.
    """
    rows = [tuple(r) for r in rows]
    declared = column_types is not None
    if column_types is None:
        if arity is None:
            arity = len(rows[0]) if rows else 0
        column_types = [
            "int" if rows and all(_looks_int(r[i]) for r in rows if len(r) == arity) else "str"
            for i in range(arity)
        ]
    for t in column_types:
        if t not in COLUMN_TYPES:
            raise ValueError(f"unknown column type {t!r}")
    rel = Relation(name, column_types)
    # inferred types of an empty relation carry no information
    rel.typed = declared or bool(rows)
    for row_no, row in enumerate(rows, start=1):
        if len(row) != rel.arity:
            raise LoadError(f"{name}: row {row_no}: expected {rel.arity} columns, got {len(row)}")
        rel._add(tuple(_convert(v, t, row_no, i, name) for i, (v, t) in enumerate(zip(row, rel.types))))
    for p in patterns:
        rel.add_index(p)
    return rel


def load_csv(path: str | Path, name: str, column_types: Sequence[str] | None, arity: int,
             patterns: Iterable[str] = ()) -> Relation:
    with open(path, newline="", encoding="utf-8") as fh:
        if arity == 0:
            rows = [()] if fh.read() else []
        else:
            rows = [row for row in csv.reader(fh) if row]
    return load_relation(name, column_types, rows, patterns, arity=arity)


def load_database(directory: str | Path, program: Program,
                  preds: Iterable[str] | None = None) -> dict[str, Relation]:
    """Load ``<pred>.csv`` from ``directory`` for every EDB predicate."""
    directory = Path(directory)
    db = {}
    for pred in sorted(program.edb_preds if preds is None else preds):
        decl = program.edb_decl(pred)
        path = directory / f"{pred}.csv"
        if not path.exists():
            raise FileNotFoundError(f"missing data file {path}")
        db[pred] = load_csv(path, pred, decl.types, decl.arity, decl.patterns)
    return db


def as_database(program: Program, data: Mapping[str, Iterable[Sequence]]) -> dict[str, Relation]:
    """Build relations for every EDB predicate from in-memory rows.

    Predicates missing from ``data`` get an empty relation.
    """
    db = {}
    for pred in sorted(program.edb_preds):
        decl = program.edb_decl(pred)
        rows = data.get(pred, ())
        if isinstance(rows, Relation):
            rel = rows
            for p in decl.patterns:
                rel.add_index(p)
        else:
            rel = load_relation(pred, decl.types, rows, decl.patterns, arity=decl.arity)
        db[pred] = rel
    return db
