"""Training the perceptron scorer and decoding with constraints.

The bundled 25-sentence corpus splits 10/10/5 by the round-robin rule.
We extract oracle sequences for the training split, fit the averaged
perceptron, and beam-decode the dev split with and without the lexicon
and type-composition constraints.
"""

import statistics

from ulfparse import decode as dec, metrics
from ulfparse.cli import load_mini_corpus, split_round_robin
from ulfparse.core import graph_to_tree, render_sexpr
from ulfparse.oracle import extract_with_alignment
from ulfparse.typesys import Lexicon, TypeGrammar

records = load_mini_corpus()
train, dev, test = split_round_robin(records)
print("corpus split: %d train / %d dev / %d test" %
      (len(train), len(dev), len(test)))

items = []
for rec in train:
    actions, _ = extract_with_alignment(rec.sentence, rec.gold_graph)
    items.append((rec.sentence, rec.deps, actions))
model, machine = dec.train_perceptron(items, epochs=10, seed=0)
print("trained: %d weight updates over %d actions" %
      (model.updates, sum(len(a) for _, _, a in items)))

grammar = TypeGrammar.default()
lexicon = Lexicon({"run": ["run.v"], "dance": ["dance.v"], "dog": ["dog.n"],
                   "sleep": ["sleep.v"], "work": ["work.v"]})

settings = [
    ("beam 3", dict(beam_size=3)),
    ("beam 3 + lexicon", dict(beam_size=3, lexicon=lexicon)),
    ("beam 10 + types", dict(beam_size=10, grammar=grammar)),
]
for name, kw in settings:
    pairs, nfrags = [], []
    for rec in dev:
        res = dec.beam_decode(rec.sentence, dec.PerceptronScorer(model),
                              machine, dep=rec.deps, **kw)
        pairs.append((res.fragments, rec.gold_graph))
        nfrags.append(len(res.fragments))
    agg = metrics.corpus_eval(pairs, seed=0).aggregate
    print("%-18s SemBLEU %.3f  EL-Smatch F1 %.3f (P %.3f R %.3f)  "
          "fragments/sentence %.2f" %
          (name, agg["sembleu"], agg["elsmatch_f1"], agg["elsmatch_p"],
           agg["elsmatch_r"], statistics.fmean(nfrags)))

print("\na dev parse:")
rec = dev[0]
res = dec.beam_decode(rec.sentence, dec.PerceptronScorer(model), machine,
                      beam_size=3, dep=rec.deps)
print("  input:", rec.sentence.raw)
print("  gold: ", rec.ulf)
for frag in res.fragments:
    print("  parse:", render_sexpr(graph_to_tree(frag, strict=False)))
