import json
import sys

import pytest

from ulfparse import decode as dec
from ulfparse import machine as tm
from ulfparse.cli import load_mini_corpus
from ulfparse.core import Sentence, graphs_equal
from ulfparse.oracle import extract_with_alignment
from ulfparse.typesys import Lexicon, TypeGrammar


@pytest.fixture(scope="module")
def corpus_items():
    items = []
    for rec in load_mini_corpus():
        actions, _ = extract_with_alignment(rec.sentence, rec.gold_graph)
        items.append((rec, actions))
    return items


@pytest.fixture(scope="module")
def trained(corpus_items):
    items = [(rec.sentence, rec.deps, acts) for rec, acts in corpus_items]
    model, machine = dec.train_perceptron(items, epochs=10, seed=0)
    return model, machine


# -- attention ----------------------------------------------------------------

def test_attention_arc_phase():
    m = tm.Machine()
    s = Sentence.make(["a", "b", "c", "d", "e"])
    c = m.init(s)
    for a in ["SKIP", "SKIP", "SKIP", "SKIP", "WORDGEN", "TOKEN", "SUFFIX:n",
              "PUSHIDX:1"]:
        c = m.apply(c, a)
    assert c.phase == tm.ARC
    word, sym = dec.attention_indices(c)
    assert word == 5 and sym == 1  # rightmost cache symbol, its word


def test_attention_push_after_symgen():
    m = tm.Machine()
    c = m.init(Sentence.make(["a", "b"]))
    c = m.apply(c, "SYMGEN:that.pro")
    assert c.phase == tm.PUSH
    word, sym = dec.attention_indices(c)
    assert word == 0 and sym == 1  # unaligned symbol: word sentinel


def test_attention_gen_default():
    m = tm.Machine()
    c = m.init(Sentence.make(["a", "b"]))
    for a in ["WORDGEN", "TOKEN", "SUFFIX:n", "PUSHIDX:0", "NOARC",
              "NOPROMOTE", "NOPOP"]:
        c = m.apply(c, a)
    word, sym = dec.attention_indices(c)
    assert word == 2 and sym == 1  # buffer word 2, one symbol so far


# -- features -----------------------------------------------------------------

def test_features_fresh_config():
    m = tm.Machine()
    c = m.init(Sentence.make(["Run"], ["run"], ["VB"]))
    feats = dec.extract_features(c)
    assert feats.get("phase=GEN") == 1.0
    assert feats.get("buf.w=run") == 1.0
    assert feats.get("c1.sym=<none>") == 1.0


def test_features_arc_distances():
    m = tm.Machine()
    s = Sentence.make(["a", "b"])
    c = m.init(s)
    for a in ["WORDGEN", "TOKEN", "SUFFIX:n", "PUSHIDX:0", "NOARC", "NOPROMOTE",
              "NOPOP", "WORDGEN", "TOKEN", "SUFFIX:v", "PUSHIDX:1"]:
        c = m.apply(c, a)
    c = m.apply(c, "NOARC")
    assert c.phase == tm.PROMOTE
    feats = dec.extract_features(c, dep=[(2, "x"), (0, "root")])
    assert feats.get("dist.sym=1") == 1.0
    assert feats.get("dist.word=1") == 1.0
    assert "dist.dep=1" in feats


def test_features_promotearc_uses_promoted_vertex():
    m = tm.Machine()
    c = m.init(Sentence.make(["shoes"], ["shoe"], ["NNS"]))
    for a in ["WORDGEN", "LEMMA", "SUFFIX:n", "PUSHIDX:1", "NOARC",
              "PROMOTE_SYM:plur"]:
        c = m.apply(c, a)
    assert c.phase == tm.PROMOTEARC
    feats = dec.extract_features(c)
    assert feats.get("c1.sym=plur") == 1.0


# -- perceptron ---------------------------------------------------------------

def test_train_memorizes_one_sentence(corpus_items):
    rec, actions = corpus_items[0]
    model, machine = dec.train_perceptron(
        [(rec.sentence, rec.deps, actions)], epochs=10, seed=0)
    res = dec.beam_decode(rec.sentence, dec.PerceptronScorer(model), machine,
                          beam_size=1, dep=rec.deps)
    assert res.actions == list(actions)
    assert graphs_equal(res.fragments[0], rec.gold_graph)


def test_two_seeds_both_memorize(corpus_items):
    rec, actions = corpus_items[0]
    for seed in (1, 2):
        model, machine = dec.train_perceptron(
            [(rec.sentence, rec.deps, actions)], epochs=10, seed=seed)
        res = dec.beam_decode(rec.sentence, dec.PerceptronScorer(model),
                              machine, beam_size=1, dep=rec.deps)
        assert res.actions == list(actions)


def test_zero_epochs_uniform_and_deterministic(corpus_items):
    rec, actions = corpus_items[0]
    model, machine = dec.train_perceptron(
        [(rec.sentence, rec.deps, actions)], epochs=0, seed=0)
    assert model.updates == 0
    r1 = dec.beam_decode(rec.sentence, dec.PerceptronScorer(model), machine,
                         beam_size=1, cap=60)
    r2 = dec.beam_decode(rec.sentence, dec.PerceptronScorer(model), machine,
                         beam_size=1, cap=60)
    assert r1.actions == r2.actions  # tie-break order, reproducible


def test_train_empty_corpus_rejected():
    with pytest.raises(ValueError):
        dec.train_perceptron([], epochs=1, seed=0)


def test_model_json_roundtrip(trained):
    model, _ = trained
    clone = dec.PerceptronModel.from_json(model.to_json())
    assert clone.salt == model.salt and clone.dim == model.dim
    assert clone.weights == model.weights
    assert clone.actions == model.actions
    with pytest.raises(ValueError):
        dec.PerceptronModel.from_json(json.dumps({"format": "other"}))


# -- scorers -------------------------------------------------------------------

def test_oracle_scorer_replays_gold_everywhere(corpus_items):
    machine = dec.machine_from_actions([a for _, a in corpus_items])
    for rec, actions in corpus_items:
        res = dec.beam_decode(rec.sentence, dec.OracleScorer(actions), machine,
                              beam_size=1, dep=rec.deps)
        assert res.finished
        assert len(res.fragments) == 1
        assert graphs_equal(res.fragments[0], rec.gold_graph)


def test_random_scorer_deterministic():
    s = Sentence.make(["a", "b"])
    m = tm.Machine(arc_labels=[":ARG0"], suffixes=["n"], symgen_vocab=["k"],
                   promote_syms=["pres"])
    r1 = dec.beam_decode(s, dec.RandomScorer(7), m, beam_size=2, cap=50)
    r2 = dec.beam_decode(s, dec.RandomScorer(7), m, beam_size=2, cap=50)
    assert r1.actions == r2.actions
    r3 = dec.beam_decode(s, dec.RandomScorer(8), m, beam_size=2, cap=50)
    assert r1.actions != r3.actions or r1.score != r3.score


ECHO_SCORER = r"""
import json, sys
while True:
    header = sys.stdin.readline()
    if not header:
        break
    n = int(header.strip())
    body = sys.stdin.read(n)
    sys.stdin.readline()
    req = json.loads(body)
    scores = {a: float(i) for i, a in enumerate(sorted(req["legal"]))}
    out = json.dumps({"scores": scores})
    sys.stdout.write("%d\n%s\n" % (len(out.encode()), out))
    sys.stdout.flush()
"""


def test_external_scorer_echo():
    scorer = dec.ExternalScorer([sys.executable, "-c", ECHO_SCORER])
    try:
        m = tm.Machine()
        c = m.init(Sentence.make(["a"]))
        scores = scorer.score(c, {"f": 1.0}, ["WORDGEN", "SKIP"])
        assert scores == {"SKIP": 0.0, "WORDGEN": 1.0}
    finally:
        scorer.close()


def test_external_scorer_timeout():
    scorer = dec.ExternalScorer(
        [sys.executable, "-c", "import time; time.sleep(30)"], timeout=0.3)
    m = tm.Machine()
    c = m.init(Sentence.make(["a"]))
    with pytest.raises(dec.ExternalScorerError):
        scorer.score(c, {}, ["SKIP"])


# -- beam search with constraints ----------------------------------------------

def test_lexicon_empty_intersection_falls_back(corpus_items):
    # lexicon maps "run" to an atom outside the suffix vocabulary: the
    # intersection is empty and the word falls back to the unconstrained set
    rec, actions = corpus_items[0]
    machine = dec.machine_from_actions([actions])
    lex = Lexicon({"run": ["run.zzz"], "i": ["i.pro"]})
    res = dec.beam_decode(rec.sentence, dec.OracleScorer(actions), machine,
                          beam_size=1, lexicon=lex, dep=rec.deps)
    assert res.finished
    assert graphs_equal(res.fragments[0], rec.gold_graph)


def test_lexicon_restricts_suffix(corpus_items):
    rec, actions = corpus_items[0]  # "I run ."
    machine = dec.machine_from_actions([a for _, a in corpus_items])
    # force run -> run.n: the oracle's SUFFIX:v is filtered out, so the
    # decode follows a different (still legal) path
    lex = Lexicon({"run": ["run.n"], "i": ["i.pro"]})
    res = dec.beam_decode(rec.sentence, dec.OracleScorer(actions), machine,
                          beam_size=1, lexicon=lex, dep=rec.deps)
    rendered = [v.symbol.render() for f in res.fragments for v in f.vertices]
    assert "run.v" not in rendered


def test_type_constraint_vetoes_bad_arcs(trained, corpus_items):
    model, machine = trained
    grammar = TypeGrammar.default()
    from ulfparse.typesys import check_arc, type_of
    for rec, actions in corpus_items[:6]:
        res = dec.beam_decode(rec.sentence, dec.PerceptronScorer(model),
                              machine, beam_size=10, grammar=grammar,
                              dep=rec.deps)
        # replay the surviving trace: every arc must compose in the same
        # creation order the decoder checked it
        c = machine.init(rec.sentence)
        types = []
        for a in res.actions:
            c2 = machine.apply(c, a)
            while len(types) < len(c2.verts):
                types.append(type_of(c2.verts[len(types)].symbol, grammar))
            kind = tm.action_kind(a)
            if kind in ("ARC", "PROMOTE_ARC"):
                src, dst, _lab = c2.edges[-1]
                ok, t2 = check_arc(types[src], types[dst])
                assert ok, "vetoed arc survived: %s" % a
                types[src] = t2
            c = c2


def test_oracle_equals_gold_with_constraints_off(trained, corpus_items):
    machine = dec.machine_from_actions([a for _, a in corpus_items])
    for rec, actions in corpus_items:
        res = dec.beam_decode(rec.sentence, dec.OracleScorer(actions), machine,
                              beam_size=3, dep=rec.deps)
        assert graphs_equal(res.fragments[0], rec.gold_graph)


def test_beam_monotone_best_score(trained):
    model, machine = trained
    recs = load_mini_corpus()
    for rec in recs[:8]:
        scores = []
        for b in (1, 3, 10):
            res = dec.beam_decode(rec.sentence, dec.PerceptronScorer(model),
                                  machine, beam_size=b, dep=rec.deps)
            scores.append(res.score)
        assert scores[1] >= scores[0] - 1e-9
        assert scores[2] >= scores[1] - 1e-9


def test_decode_emits_only_legal_actions(trained):
    model, machine = trained
    rec = load_mini_corpus()[3]
    res = dec.beam_decode(rec.sentence, dec.PerceptronScorer(model), machine,
                          beam_size=3, dep=rec.deps)
    c = machine.init(rec.sentence)
    for a in res.actions:
        assert machine.is_legal(c, a)
        c = machine.apply(c, a)


def test_cap_finalizes_as_is(trained):
    model, machine = trained
    rec = load_mini_corpus()[1]
    res = dec.beam_decode(rec.sentence, dec.PerceptronScorer(model), machine,
                          beam_size=2, cap=12, dep=rec.deps)
    assert not res.finished
    assert len(res.actions) <= 12
    for frag in res.fragments:
        frag.validate()
