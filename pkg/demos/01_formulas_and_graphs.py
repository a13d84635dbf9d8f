"""Formulas, graphs, and penman: the core representations.

A ULF formula is an s-expression whose leaves are typed atoms.  The graph
form gives each atom a vertex, makes the leftmost constituent the parent,
and introduces a COMPLEX vertex (with an :INSTANCE edge) wherever the
leftmost constituent is itself non-atomic.
"""

from ulfparse.core import (
    emit_penman,
    graph_to_tree,
    parse_penman,
    parse_sexpr,
    render_sexpr,
    tree_to_graph,
)

formula = "(i.pro ((pres want.v) (to (dance.v (adv-a (in.p (my.d ((mod-n new.a) (plur shoe.n)))))))))"
print("formula:")
print(" ", formula)

tree = parse_sexpr(formula)
graph = tree_to_graph(tree)
print("\ngraph: %d vertices, %d edges" % (len(graph.vertices), len(graph.edges)))
for vid, vert in enumerate(graph.vertices):
    kids = ", ".join("%s->%d" % (lab, c) for c, lab in graph.children(vid))
    print("  v%-2d %-10s %s" % (vid, vert.symbol.render(), kids))

print("\npenman form:")
print(" ", emit_penman(graph))

# both conversions invert exactly
assert render_sexpr(graph_to_tree(graph)) == formula
assert emit_penman(parse_penman(emit_penman(graph))) == emit_penman(graph)
print("\nround-trips: formula -> graph -> formula and graph -> penman -> graph hold")
