"""Datalog front end: parsing, validation and binary normalization.

The accepted dialect is plain Datalog without negation or function symbols::

    % a comment
    .edb e1(int) indexed(b)
    answer(X) :- q(X, c1).
    p(c1, X) :- e1(X).
    p(c2, 7).

Variables start with an uppercase letter, constants are lowercase
identifiers, quoted strings or integers.  ``.edb`` directives declare the
column types of a stored relation and any access paths beyond the full scan.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field, replace
from typing import Union

__all__ = [
    "ANSWER",
    "Const",
    "DatalogError",
    "DatalogSyntaxError",
    "EdbDecl",
    "Literal",
    "Program",
    "Rule",
    "Term",
    "Var",
    "format_program",
    "infer_types",
    "normalize_binary",
    "parse_program",
    "parse_schema",
    "validate",
]

ANSWER = "answer"
COLUMN_TYPES = ("int", "str")

_VAR_RE = re.compile(r"[A-Z][A-Za-z0-9_]*\Z")
_IDENT_RE = re.compile(r"[a-z][A-Za-z0-9_]*\Z")


class DatalogError(ValueError):
    """Raised for malformed or inconsistent programs."""


class DatalogSyntaxError(DatalogError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if not _VAR_RE.match(self.name):
            raise DatalogError(f"invalid variable name {self.name!r}")

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    value: int | str

    def __str__(self):
        return format_value(self.value)


Term = Union[Var, Const]


def format_value(value: int | str) -> str:
    if isinstance(value, int):
        return str(value)
    if _IDENT_RE.match(value):
        return value
    escaped = value.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


@dataclass(frozen=True)
class Literal:
    pred: str
    args: tuple[Term, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.args)

    def variables(self) -> list[str]:
        """Variable names in order of first occurrence."""
        seen: dict[str, None] = {}
        for t in self.args:
            if isinstance(t, Var):
                seen.setdefault(t.name)
        return list(seen)

    def __str__(self):
        if not self.args:
            return self.pred
        return f"{self.pred}({', '.join(map(str, self.args))})"


@dataclass(frozen=True)
class Rule:
    rule_no: int
    head: Literal
    body: tuple[Literal, ...] = ()

    @property
    def is_fact(self) -> bool:
        return not self.body

    def body_variables(self) -> set[str]:
        return {v for lit in self.body for v in lit.variables()}

    def variables(self) -> list[str]:
        seen: dict[str, None] = {}
        for lit in (self.head, *self.body):
            for v in lit.variables():
                seen.setdefault(v)
        return list(seen)

    def __str__(self):
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(map(str, self.body))}."


@dataclass(frozen=True)
class EdbDecl:
    """Declared EDB relation: column types and extra binding patterns.

    ``types`` is None when the relation was not declared; column types are
    then inferred from the data at load time.
    """

    name: str
    arity: int
    types: tuple[str, ...] | None = None
    patterns: tuple[str, ...] = ()

    @property
    def access_patterns(self) -> tuple[str, ...]:
        """All available patterns; the full scan comes first."""
        scan = "f" * self.arity
        return (scan, *(p for p in self.patterns if p != scan))

    def __str__(self):
        types = ", ".join(self.types or ())
        text = f".edb {self.name}({types})"
        for p in self.patterns:
            text += f" indexed({p})"
        return text


@dataclass(frozen=True)
class Program:
    rules: tuple[Rule, ...]
    edb: dict[str, EdbDecl] = field(default_factory=dict)
    answer: str = ANSWER

    def __hash__(self):
        return hash(self.rules)

    @property
    def arities(self) -> dict[str, int]:
        out: dict[str, int] = {d.name: d.arity for d in self.edb.values()}
        for r in self.rules:
            for lit in (r.head, *r.body):
                out.setdefault(lit.pred, lit.arity)
        return out

    @property
    def idb_preds(self) -> set[str]:
        return {r.head.pred for r in self.rules}

    @property
    def edb_preds(self) -> set[str]:
        heads = self.idb_preds
        body = {lit.pred for r in self.rules for lit in r.body}
        return set(self.edb) | (body - heads)

    @property
    def idb_facts(self) -> list[Rule]:
        return [r for r in self.rules if r.is_fact]

    def is_idb(self, pred: str) -> bool:
        return pred in self.idb_preds

    def edb_decl(self, pred: str) -> EdbDecl:
        """Declaration for ``pred``; undeclared EDB predicates get a default."""
        if pred in self.edb:
            return self.edb[pred]
        if pred not in self.edb_preds:
            raise KeyError(pred)
        return EdbDecl(pred, self.arities[pred])

    def rule(self, rule_no: int) -> Rule:
        for r in self.rules:
            if r.rule_no == rule_no:
                return r
        raise KeyError(rule_no)

    def __str__(self):
        return format_program(self)


# --------------------------------------------------------------------------
# tokenizer and parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>%[^\n]*)
  | (?P<implies>:-)
  | (?P<punct>[(),.])
  | (?P<int>-?\d+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<var>[A-Z][A-Za-z0-9_]*)
  | (?P<ident>[a-z][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> Iterator[_Tok]:
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DatalogSyntaxError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            yield _Tok(kind, m.group(), line, m.start() - line_start + 1)
        pos = m.end()
    yield _Tok("eof", "", line, pos - line_start + 1)


def _unquote(text: str) -> str:
    return re.sub(r"\\(.)", r"\1", text[1:-1])


class _Parser:
    def __init__(self, text: str):
        self.toks = list(_tokenize(text))
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text or tok.kind == "string":
            self.fail(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok)
        return tok

    def fail(self, message: str, tok: _Tok):
        raise DatalogSyntaxError(message, tok.line, tok.col)

    def clauses(self) -> Iterator[tuple[Literal, list[Literal], _Tok]]:
        while self.peek().kind != "eof":
            start = self.peek()
            head = self.literal()
            body = []
            tok = self.next()
            if tok.kind == "implies":
                body.append(self.literal())
                while self.peek().text == "," and self.peek().kind == "punct":
                    self.next()
                    body.append(self.literal())
                tok = self.next()
            if tok.text != "." or tok.kind != "punct":
                self.fail(f"expected '.', found {tok.text or 'end of input'!r}", tok)
            yield head, body, start

    def literal(self) -> Literal:
        tok = self.next()
        if tok.kind != "ident":
            self.fail(f"expected literal, found {tok.text or 'end of input'!r}", tok)
        args: list[Term] = []
        if self.peek().text == "(" and self.peek().kind == "punct":
            self.next()
            if self.peek().text == ")":
                self.next()
                return Literal(tok.text, ())
            args.append(self.term())
            while self.peek().text == ",":
                self.next()
                args.append(self.term())
            self.expect(")")
        return Literal(tok.text, tuple(args))

    def term(self) -> Term:
        tok = self.next()
        if tok.kind == "var":
            return Var(tok.text)
        if tok.kind == "ident":
            return Const(tok.text)
        if tok.kind == "int":
            return Const(int(tok.text))
        if tok.kind == "string":
            return Const(_unquote(tok.text))
        self.fail(f"expected term, found {tok.text or 'end of input'!r}", tok)


_DIRECTIVE_RE = re.compile(r"\.edb\s+(?P<name>[a-z][A-Za-z0-9_]*)\s*\((?P<types>[^)]*)\)(?P<rest>.*)\Z")
_INDEX_RE = re.compile(r"\s*indexed\s*\((?P<pats>[bf,\s]*)\)")


def _parse_directive(line: str, lineno: int) -> EdbDecl:
    m = _DIRECTIVE_RE.match(line.strip())
    if m is None:
        raise DatalogSyntaxError("malformed .edb directive", lineno, 1)
    types = tuple(t.strip() for t in m["types"].split(",") if t.strip())
    for t in types:
        if t not in COLUMN_TYPES:
            raise DatalogSyntaxError(f"unknown column type {t!r}", lineno, 1)
    rest = m["rest"].split("%", 1)[0]
    patterns: list[str] = []
    pos = 0
    while rest[pos:].strip():
        im = _INDEX_RE.match(rest, pos)
        if im is None:
            raise DatalogSyntaxError("expected indexed(...)", lineno, len(line) - len(rest) + pos + 1)
        for p in im["pats"].split(","):
            p = p.strip()
            if len(p) != len(types):
                raise DatalogSyntaxError(
                    f"binding pattern {p!r} does not match arity {len(types)}", lineno, 1
                )
            patterns.append(p)
        pos = im.end()
    return EdbDecl(m["name"], len(types), types, tuple(dict.fromkeys(patterns)))


def _split_directives(text: str) -> tuple[str, list[EdbDecl]]:
    decls = []
    lines = text.split("\n")
    for i, line in enumerate(lines):
        if line.lstrip().startswith(".edb"):
            decls.append(_parse_directive(line, i + 1))
            lines[i] = ""
    return "\n".join(lines), decls


def parse_schema(text: str) -> dict[str, EdbDecl]:
    """Parse a schema sidecar consisting of ``.edb`` lines and comments."""
    rest, decls = _split_directives(text)
    leftover = next(_tokenize(rest))
    if leftover.kind != "eof":
        raise DatalogSyntaxError("schema may only contain .edb directives", leftover.line, leftover.col)
    return _decl_map(decls)


def _decl_map(decls: Iterable[EdbDecl]) -> dict[str, EdbDecl]:
    out: dict[str, EdbDecl] = {}
    for d in decls:
        if d.name in out and out[d.name].types != d.types:
            raise DatalogError(f"conflicting declarations for {d.name}")
        if d.name in out:
            d = replace(d, patterns=tuple(dict.fromkeys(out[d.name].patterns + d.patterns)))
        out[d.name] = d
    return out


def parse_program(text: str, schema: str | dict[str, EdbDecl] | None = None) -> Program:
    """Parse Datalog source into a Program; rules are numbered from 1."""
    body_text, decls = _split_directives(text)
    if isinstance(schema, str):
        decls.extend(parse_schema(schema).values())
    elif schema:
        decls.extend(schema.values())
    edb = _decl_map(decls)

    arities: dict[str, tuple[int, _Tok | None]] = {d.name: (d.arity, None) for d in edb.values()}
    rules = []
    parser = _Parser(body_text)
    for rule_no, (head, body, start) in enumerate(parser.clauses(), start=1):
        for lit in (head, *body):
            known = arities.setdefault(lit.pred, (lit.arity, start))
            if known[0] != lit.arity:
                raise DatalogSyntaxError(
                    f"predicate {lit.pred} used with arity {lit.arity}, previously {known[0]}",
                    start.line,
                    start.col,
                )
        for lit in body:
            if lit.pred == ANSWER:
                raise DatalogSyntaxError(f"{ANSWER} may not occur in a rule body", start.line, start.col)
        rules.append(Rule(rule_no, head, tuple(body)))
    return Program(tuple(rules), edb)


def format_program(program: Program) -> str:
    lines = [str(d) for d in program.edb.values()]
    lines.extend(str(r) for r in program.rules)
    return "\n".join(lines) + ("\n" if lines else "")


# --------------------------------------------------------------------------
# validation


def infer_types(program: Program) -> tuple[dict[tuple[str, int], str], list[str]]:
    """Propagate declared EDB column types through the rules.

    Returns the inferred type of every (predicate, position) that can be
    determined, plus the list of type conflicts found on the way.
    """
    types: dict[tuple[str, int], str] = {}
    problems: list[str] = []
    for d in program.edb.values():
        for i, t in enumerate(d.types or ()):
            types[(d.name, i)] = t

    def const_type(c: Const) -> str:
        return "int" if isinstance(c.value, int) else "str"

    changed = True
    while changed:
        changed = False
        for r in program.rules:
            var_types: dict[str, str] = {}
            for lit in r.body:
                for i, t in enumerate(lit.args):
                    col = types.get((lit.pred, i))
                    if col is None:
                        continue
                    if isinstance(t, Const):
                        if const_type(t) != col:
                            msg = f"rule {r.rule_no}: constant {t} compared with {col} column {lit.pred}[{i + 1}]"
                            if msg not in problems:
                                problems.append(msg)
                    elif var_types.setdefault(t.name, col) != col:
                        msg = f"rule {r.rule_no}: variable {t.name} used at both int and str columns"
                        if msg not in problems:
                            problems.append(msg)
            for i, t in enumerate(r.head.args):
                new = const_type(t) if isinstance(t, Const) else var_types.get(t.name)
                if new is None:
                    continue
                old = types.get((r.head.pred, i))
                if old is None:
                    types[(r.head.pred, i)] = new
                    changed = True
                elif old != new:
                    msg = f"rule {r.rule_no}: {r.head.pred}[{i + 1}] receives both {old} and {new}"
                    if msg not in problems:
                        problems.append(msg)
    return types, problems


def validate(program: Program) -> list[str]:
    """Return every range-restriction, EDB/IDB and type violation."""
    violations = []
    for r in program.rules:
        body_vars = r.body_variables()
        for v in r.head.variables():
            if v not in body_vars:
                violations.append(f"rule {r.rule_no}: head variable {v} is not bound in the body")
        if r.head.pred in program.edb:
            violations.append(f"rule {r.rule_no}: EDB predicate {r.head.pred} occurs in a rule head")
        for lit in r.body:
            if lit.pred == program.answer:
                violations.append(f"rule {r.rule_no}: {program.answer} occurs in a rule body")
    violations.extend(infer_types(program)[1])
    return violations


# --------------------------------------------------------------------------
# normalization


def normalize_binary(program: Program) -> Program:
    """Split rules with more than two body literals by left-to-right folding.

    The first two body literals become the body of a fresh predicate
    ``aux_<rule_no>_<k>`` whose arguments are the variables still needed by
    the remaining literals or the head, in order of first occurrence.
    """
    if all(len(r.body) <= 2 for r in program.rules):
        return program
    taken = set(program.arities)
    next_no = max(r.rule_no for r in program.rules) + 1
    main_rules: list[Rule] = []
    aux_rules: list[Rule] = []
    for r in program.rules:
        body = list(r.body)
        k = 1
        while len(body) > 2:
            prefix, rest = body[:2], body[2:]
            needed = {v for lit in (r.head, *rest) for v in lit.variables()}
            params: dict[str, None] = {}
            for lit in prefix:
                for v in lit.variables():
                    if v in needed:
                        params.setdefault(v)
            name = f"aux_{r.rule_no}_{k}"
            while name in taken:
                name += "_"
            taken.add(name)
            head = Literal(name, tuple(Var(v) for v in params))
            aux_rules.append(Rule(next_no, head, tuple(prefix)))
            next_no += 1
            body = [head, *rest]
            k += 1
        main_rules.append(replace(r, body=tuple(body)))
    return replace(program, rules=tuple(main_rules + aux_rules))
