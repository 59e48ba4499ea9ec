"""Symbolic facts and the rule application graph.

Four rules, one of which feeds a path that can never reach the answer.
Partial evaluation finds every symbolic fact, then pruning drops the
branch through p(c2, ...).

    python demos/01_rule_application_graph.py
"""

from pushdl import compile_program

SOURCE = """
answer(X) :- q(X, c1).
q(X, Y) :- p(Y, X).
p(c1, X) :- e1(X).
p(c2, X) :- e2(X).
"""

comp = compile_program(SOURCE)

print("Symbolic facts before pruning:")
for node in comp.full_graph.facts.values():
    print(f"  {node.name:7} {node.fact}")

print("\nRule applications before pruning:")
for n in comp.full_graph.rule_nodes:
    fed_by = n.input if n.input is not None else "(EDB only)"
    print(f"  {n.name:5} rule {n.rule_no} on {fed_by} -> {n.output}")

g = comp.graph
print(f"\nAfter pruning: {len(g.facts)} fact nodes, {len(g.rule_nodes)} rule nodes")
print("p(c2, v4_X) survives pruning:", any(str(f.fact) == "p(c2, v4_X)" for f in g.facts.values()))

# render with `dot -Tpng` if graphviz is around
print("\n" + g.to_dot())
