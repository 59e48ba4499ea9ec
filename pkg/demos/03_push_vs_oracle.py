"""Push evaluation against the semi-naive reference.

Runs same-generation over a small family tree and transitive closure over
a random graph, printing answer counts and the engine counters.

    python demos/03_push_vs_oracle.py
"""

import random

from pushdl import as_database, compile_program, evaluate, seminaive_eval

SAME_GEN = """
.edb up(int, int) indexed(bf)
.edb down(int, int) indexed(bf)
.edb flat(int, int)
sg(X, Y) :- flat(X, Y).
sg(X, Y) :- up(X, A), sg(A, B), down(B, Y).
answer(X, Y) :- sg(X, Y).
"""

TC = """
.edb e(int, int) indexed(bf)
p(A, B) :- e(A, B).
p(A, C) :- p(A, B), e(B, C).
answer(X, Y) :- p(X, Y).
"""

family = {
    "up": [(3, 1), (4, 1), (5, 2), (6, 2), (7, 3), (8, 6)],
    "down": [(1, 3), (1, 4), (2, 5), (2, 6), (3, 7), (6, 8)],
    "flat": [(1, 2), (2, 1)],
}
rng = random.Random(7)
graph = {"e": sorted({(rng.randrange(40), rng.randrange(40)) for _ in range(60)})}

for title, source, data in (("same generation", SAME_GEN, family), ("transitive closure", TC, graph)):
    comp = compile_program(source)
    result = evaluate(comp, data)
    expected = seminaive_eval(comp.program, as_database(comp.program, data))["answer"]
    print(f"{title}: {len(result.answers)} answers, oracle agrees: {result.answer_set == expected}")
    for key, value in result.counters.as_dict().items():
        print(f"    {key:20} {value}")
    print()

# without answer deduplication an acyclic chain stores nothing at all
useless_branch = "answer(X) :- q(X, c1).\nq(X, Y) :- p(Y, X).\np(c1, X) :- e1(X).\np(c2, X) :- e2(X)."
r = evaluate(useless_branch, {"e1": [(7,), (8,)], "e2": [(9,)]}, multiset_answers=True)
print("acyclic chain, multiset answers:", sorted(r.answers),
      "tuples stored:", r.counters.tuples_materialized, "e2 scans:", r.counters.scans("e2"))
