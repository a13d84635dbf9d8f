"""Graph comparison metrics: EL-Smatch and SemBLEU.

EL-Smatch scores precision/recall/F1 over instance and relation triples
under the best variable mapping found by hill-climbing.  SemBLEU extends
BLEU to node/edge label n-grams read off directed paths, so it needs no
variable matching at all.
"""

from ulfparse.core import parse_sexpr, tree_to_graph
from ulfparse.metrics import corpus_eval, el_smatch, graph_ngrams, sembleu

gold = tree_to_graph(parse_sexpr("(he.pro ((past tell.v) me.pro (to (buy.v (k bread.n)))))"))
close = tree_to_graph(parse_sexpr("(he.pro ((past tell.v) me.pro (to (buy.v bread.n))))"))
wrong = tree_to_graph(parse_sexpr("(she.pro ((pres see.v) it.pro))"))

for name, cand in [("identical", gold), ("one vertex short", close),
                   ("unrelated", wrong)]:
    f1, p, r = el_smatch(cand, gold, restarts=4, seed=0)
    sb = sembleu(cand, gold)
    print("%-18s EL-Smatch F1 %.3f (P %.3f R %.3f)   SemBLEU %.3f"
          % (name, f1, p, r, sb))

print("\nsome n-grams extracted from the gold graph:")
bag = graph_ngrams(gold, k=3)
for gram in sorted(bag, key=len)[:4] + [max(bag, key=len)]:
    print("  ", " ".join(gram))

print("\ncorpus-level pooling over a 2-sentence corpus (one perfect, one empty):")
report = corpus_eval([(gold, gold), ([], close)], seed=0, ids=["s1", "s2"])
print(report.to_tsv())
