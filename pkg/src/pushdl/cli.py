"""Command line interface.

    pushdl run PROGRAM --data DIR [--engine push|oracle|both] [--out FILE] [--stats]
    pushdl inspect PROGRAM [--dump-graph [FILE]] [--emit-source [FILE]]
    pushdl test CASES_DIR

Exit codes: 0 success, 1 answer mismatch between engines, 2 usage or input
error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .compiler import Compilation, compile_program
from .engine import EngineError, run
from .frontend import DatalogError
from .oracle import seminaive_eval
from .storage import LoadError, load_database

log = logging.getLogger("pushdl")

EXIT_OK, EXIT_MISMATCH, EXIT_INPUT = 0, 1, 2


@dataclass
class RunConfig:
    program: Path
    data: Path | None = None
    schema: Path | None = None
    engine: str = "push"
    out: Path | None = None
    dump_graph: str | None = None
    emit_source: str | None = None
    stats: bool = False
    multiset_answers: bool = False
    table: list[str] | None = None
    full_graph: bool = False
    extra: dict = field(default_factory=dict)


class InputError(Exception):
    pass


def _sort_key(tup: tuple):
    return tuple((isinstance(v, str), v) for v in tup)


def _compile(cfg: RunConfig) -> Compilation:
    try:
        text = cfg.program.read_text(encoding="utf-8")
        schema = cfg.schema.read_text(encoding="utf-8") if cfg.schema else None
    except OSError as exc:
        raise InputError(str(exc)) from exc
    return compile_program(text, schema=schema, table=cfg.table, multiset_answers=cfg.multiset_answers)


def _write_csv(rows, stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    for row in rows:
        writer.writerow(row)


def _emit(text: str, target: str | None) -> None:
    if target in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(target).write_text(text, encoding="utf-8")


def _oracle_answers(comp: Compilation, db) -> set[tuple]:
    model = seminaive_eval(comp.program, db)
    return model.get(comp.program.answer, set())


def _first_difference(push: set, oracle: set) -> str:
    only_push = sorted(push - oracle, key=_sort_key)
    only_oracle = sorted(oracle - push, key=_sort_key)
    candidates = [(t, "push") for t in only_push[:1]] + [(t, "oracle") for t in only_oracle[:1]]
    t, side = min(candidates, key=lambda c: _sort_key(c[0]))
    return f"answer{t} derived only by {side} ({len(only_push)} push-only, {len(only_oracle)} oracle-only)"


def cmd_run(cfg: RunConfig) -> int:
    comp = _compile(cfg)
    if cfg.data is None:
        raise InputError("--data is required")
    db = load_database(cfg.data, comp.program)
    if cfg.dump_graph is not None:
        _emit(comp.graph.to_dot(), cfg.dump_graph)
    if cfg.emit_source is not None:
        _emit(comp.plan.source(), cfg.emit_source)

    status = EXIT_OK
    stats: dict = {}
    if cfg.engine in ("push", "both"):
        result = run(comp.plan, db)
        answers = result.answers
        stats = result.counters.as_dict()
    if cfg.engine in ("oracle", "both"):
        expected = _oracle_answers(comp, db)
        if cfg.engine == "oracle":
            answers = list(expected)
        elif set(answers) != expected:
            print("mismatch: " + _first_difference(set(answers), expected), file=sys.stderr)
            status = EXIT_MISMATCH

    buf = io.StringIO()
    _write_csv(sorted(answers, key=_sort_key), buf)
    if cfg.out is None:
        sys.stdout.write(buf.getvalue())
    else:
        cfg.out.write_text(buf.getvalue(), encoding="utf-8")
    if cfg.stats:
        print(json.dumps(stats, sort_keys=True), file=sys.stderr)
    return status


def cmd_inspect(cfg: RunConfig) -> int:
    comp = _compile(cfg)
    graph = comp.full_graph if cfg.full_graph else comp.graph
    if cfg.dump_graph is None and cfg.emit_source is None:
        cfg.dump_graph = "-"
    if cfg.dump_graph is not None:
        _emit(graph.to_dot(), cfg.dump_graph)
    if cfg.emit_source is not None:
        _emit(comp.plan.source(), cfg.emit_source)
    return EXIT_OK


def _case_data_dirs(case: Path) -> list[Path]:
    dirs = sorted(p for p in case.iterdir() if p.is_dir() and p.name.startswith("data"))
    return dirs or [case]


def _run_case(case: Path) -> tuple[str, int, list[str]]:
    lines = []
    program = case / "program.dl"
    schema = case / "schema.edb"
    cfg = RunConfig(program, schema=schema if schema.exists() else None)
    try:
        comp = _compile(cfg)
        worst = EXIT_OK
        for data in _case_data_dirs(case):
            db = load_database(data, comp.program)
            got = set(run(comp.plan, db).answers)
            expected = _oracle_answers(comp, db)
            if got == expected:
                lines.append(f"ok    {case.name}/{data.name if data != case else '.'} ({len(got)} answers)")
            else:
                worst = EXIT_MISMATCH
                lines.append(f"FAIL  {case.name}/{data.name}: {_first_difference(got, expected)}")
        return case.name, worst, lines
    except (DatalogError, LoadError, EngineError, InputError, OSError) as exc:
        return case.name, EXIT_INPUT, [f"ERROR {case.name}: {exc}"]


def cmd_test(cases_dir: Path, jobs: int = 1) -> int:
    if not cases_dir.is_dir():
        raise InputError(f"{cases_dir} is not a directory")
    cases = sorted(p for p in cases_dir.iterdir() if (p / "program.dl").exists())
    if not cases:
        raise InputError(f"no cases (subdirectories with program.dl) in {cases_dir}")
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(_run_case, cases))
    status = EXIT_OK
    for _, code, lines in results:
        for line in lines:
            print(line)
        status = max(status, code)
    return status


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pushdl", description="Push-method Datalog evaluation")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("program", type=Path)
        p.add_argument("--schema", type=Path, help="file of .edb declarations")
        p.add_argument("--table", help="comma-separated predicates to table (overrides the heuristic)")
        p.add_argument("--multiset-answers", action="store_true", help="do not deduplicate answers")

    p = sub.add_parser("run", help="evaluate a program over CSV data")
    common(p)
    p.add_argument("--data", type=Path, required=True, help="directory with <pred>.csv files")
    p.add_argument("--engine", choices=("push", "oracle", "both"), default="push")
    p.add_argument("--out", type=Path)
    p.add_argument("--stats", action="store_true", help="print counters as JSON on stderr")
    p.add_argument("--dump-graph", metavar="FILE")
    p.add_argument("--emit-source", metavar="FILE")

    p = sub.add_parser("inspect", help="show the rule application graph or generated code")
    common(p)
    p.add_argument("--dump-graph", nargs="?", const="-", metavar="FILE")
    p.add_argument("--emit-source", nargs="?", const="-", metavar="FILE")
    p.add_argument("--full-graph", action="store_true", help="show the graph before pruning")

    p = sub.add_parser("test", help="compare push and oracle answers over a directory of cases")
    p.add_argument("cases", type=Path)
    p.add_argument("-j", "--jobs", type=int, default=1)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        if args.command == "test":
            return cmd_test(args.cases, args.jobs)
        cfg = RunConfig(
            program=args.program,
            schema=args.schema,
            table=[t.strip() for t in args.table.split(",") if t.strip()] if args.table else None,
            multiset_answers=args.multiset_answers,
            dump_graph=args.dump_graph,
            emit_source=args.emit_source,
        )
        if args.command == "run":
            cfg.data, cfg.engine, cfg.out, cfg.stats = args.data, args.engine, args.out, args.stats
            return cmd_run(cfg)
        cfg.full_graph = args.full_graph
        return cmd_inspect(cfg)
    except (DatalogError, LoadError, EngineError, InputError, FileNotFoundError) as exc:
        print(f"pushdl: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
