"""Variable conflicts and value protection.

When a rule consumes a symbolic fact holding one of its own runtime
variables, the generated piece copies its inputs into fresh variables
first.  Pieces that can be re-entered while older tasks are pending save
their cursor and variables and restore them from a RESTORE task.  The
shadow engine snapshots what each pushed task will read and checks it is
unchanged when the task is popped.

    python demos/04_conflicts_and_protection.py
"""

import random

import pushdl.plangen
from pushdl import compile_program, evaluate, recursive_nodes
from pushdl.plangen import AssignVar

TC = """
.edb e(int, int) indexed(bf)
p(A, B) :- e(A, B).
p(A, C) :- p(A, B), e(B, C).
answer(X, Y) :- p(X, Y).
"""

comp = compile_program(TC)
for piece in comp.plan.pieces:
    if not piece.copy_all:
        continue
    start = next(l for l in piece.labels if l.kind == "START")
    copies = [f"{i.target} = {i.source}" for i in comp.plan.blocks[start] if isinstance(i, AssignVar)]
    print(f"conflict: rule {piece.node.rule_no} on {piece.node.input}, copies {copies}")

rng = random.Random(0)
edges = sorted({(rng.randrange(20), rng.randrange(20)) for _ in range(30)})
result = evaluate(comp, {"e": edges}, shadow=True)
print(f"\nshadow check on 20 nodes: {len(result.answers)} answers, {len(result.mismatches)} mismatches")

# Protecting only the nodes on a cycle is not enough: another node of the
# same rule overwrites v2_C while the answer task for it is still pending.
saved = pushdl.plangen.protected_nodes
pushdl.plangen.protected_nodes = recursive_nodes
try:
    weak = compile_program(TC)
    bad = evaluate(weak, {"e": [(1, 2), (2, 3), (3, 1)]}, shadow=True)
finally:
    pushdl.plangen.protected_nodes = saved
print(f"\ncycle-only protection: {len(bad.answer_set)} of 9 answers, mismatches:")
for m in bad.mismatches:
    print("   ", m)
