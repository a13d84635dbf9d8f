"""Word/atom alignment: the similarity heuristic and greedy matching.

Each (word, atom) pair is scored from string overlap between the word (or
its lemma) and the atom stem, overlap between the POS tag and the type
suffix, and how close their relative positions are.  Pairs are accepted
greedily in score order under connectivity constraints, then merged into
span/subgraph pairs.
"""

from ulfparse.align import align, olap, sim
from ulfparse.core import Sentence, parse_sexpr, tree_to_graph
from ulfparse.oracle import DEFAULT_PROMOTE_SYMBOLS

sentence = Sentence.make(
    ["I", "want", "to", "dance", "in", "my", "new", "shoes"],
    ["i", "want", "to", "dance", "in", "my", "new", "shoe"],
    ["PRP", "VBP", "TO", "VB", "IN", "PRP$", "JJ", "NNS"])
gold = tree_to_graph(parse_sexpr(
    "(i.pro ((pres want.v) (to (dance.v (adv-a (in.p (my.d "
    "((mod-n new.a) (plur shoe.n)))))))))"))

print("string overlap is the longest shared substring, normalized:")
for x, y in [("shoes", "shoe"), ("dance", "dance"), ("my", "mod-n")]:
    print("  olap(%r, %r) = %.3f" % (x, y, olap(x, y)))

print("\npair scores for word 'shoes' (acceptance threshold is 1.0):")
for vid, vert in enumerate(gold.vertices):
    s = sim(sentence.token(8), len(sentence), vert.symbol, vid + 1,
            len(gold.vertices))
    print("  shoes ~ %-10s %.3f" % (vert.symbol.render(), s))

amap = align(sentence, gold, never_align=frozenset(DEFAULT_PROMOTE_SYMBOLS))
print("\naccepted token pairs (word index, vertex):")
for w, v in sorted(amap.token_pairs):
    print("  %d %-8s -> v%d %s" % (w, sentence.token(w).surface, v,
                                   gold.vertices[v].symbol.render()))
print("\nspan/subgraph pairs:", amap.span_pairs)
