"""What the compiler emits for transitive closure.

The plan is a set of labelled code pieces driven by one backtrack stack.
The source printed here has the shape of the C++ main loop; the engine
interprets the very same instruction objects.

    python demos/02_generated_code.py
"""

from pushdl import compile_program

TC = """
.edb e(int, int) indexed(bf)
p(A, B) :- e(A, B).
p(A, C) :- p(A, B), e(B, C).
answer(X, Y) :- p(X, Y).
"""

comp = compile_program(TC)
plan = comp.plan

print("tabled predicates:", ", ".join(plan.tabling))
print("runtime variables:", ", ".join(map(str, plan.rtvars)))
print()
for piece in plan.pieces:
    n = piece.node
    flags = []
    if piece.protected:
        flags.append("saves state")
    if piece.copy_all:
        flags.append("copy-all")
    labels = " ".join(l.kind for l in piece.labels)
    print(f"rule {n.rule_no} on {n.input or '(EDB)'}: {labels}" + (f"  [{', '.join(flags)}]" if flags else ""))

print()
print(plan.source())
