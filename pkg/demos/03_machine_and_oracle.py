"""The transition machine and the oracle.

The machine parses by generating vertices from buffer words (or from
nothing), placing them into a two-slot cache, forming arcs between the
slots, promoting unary operators over completed constituents, and
retiring finished vertices through pops.  The oracle extracts the action
sequence that rebuilds a gold graph exactly.
"""

from ulfparse.core import (
    Sentence,
    graph_to_tree,
    graphs_equal,
    parse_sexpr,
    render_sexpr,
    tree_to_graph,
)
from ulfparse.machine import Machine
from ulfparse.oracle import extract_with_alignment

sentence = Sentence.make(["I", "run", "."], ["i", "run", "."],
                         ["PRP", "VBP", "."])
gold = tree_to_graph(parse_sexpr("(i.pro ((pres run.v)))"))

actions, amap = extract_with_alignment(sentence, gold)
print("oracle actions for %r:" % sentence.raw)
print(" ", " ".join(actions))

machine = Machine()
config = machine.init(sentence)
print("\nstep-by-step replay (cache after each action):")
for a in actions:
    config = machine.apply(config, a)
    cache = ["$" if v is None else config.verts[v].symbol.render()
             for v in config.cache]
    print("  %-20s cache=[%s, %s] phase=%s" % (a, cache[0], cache[1],
                                               config.phase))

frags = machine.extract_result(config)
assert machine.is_terminal(config)
assert len(frags) == 1 and graphs_equal(frags[0], gold)
print("\nterminal; single fragment equals the gold graph:")
print(" ", render_sexpr(graph_to_tree(frags[0])))
