"""The pushdl command line, driven from Python.

Writes a program and CSV data to a scratch directory, then runs the
``run``, ``inspect`` and ``test`` subcommands.  The same calls work from a
shell as ``pushdl run prog.dl --data data --engine both --stats``.

    python demos/05_cli_walkthrough.py
"""

import contextlib
import sys
import tempfile
from pathlib import Path

from pushdl.cli import main

TC = """\
.edb e(int, int) indexed(bf)
p(A, B) :- e(A, B).
p(A, C) :- p(A, B), e(B, C).
answer(X, Y) :- p(X, Y).
"""

# counters and errors go to stderr; fold them into stdout so the order reads right
with tempfile.TemporaryDirectory() as tmp, contextlib.redirect_stderr(sys.stdout):
    root = Path(tmp)
    (root / "tc.dl").write_text(TC)
    data = root / "data"
    data.mkdir()
    (data / "e.csv").write_text("1,2\n2,3\n3,1\n")

    print("$ pushdl run tc.dl --data data --engine both --stats")
    code = main(["run", str(root / "tc.dl"), "--data", str(data), "--engine", "both", "--stats"])
    print("exit code", code)

    print("\n$ pushdl inspect tc.dl --table answer")
    print("exit code", main(["inspect", str(root / "tc.dl"), "--table", "answer"]))

    case = root / "cases" / "tc"
    (case / "data1").mkdir(parents=True)
    (case / "program.dl").write_text(TC)
    (case / "data1" / "e.csv").write_text("1,2\n2,1\n")
    print("\n$ pushdl test cases")
    print("exit code", main(["test", str(root / "cases")]))
