"""Beam-search decoding with a pluggable scorer.

The scorer interface is ``score(config, features, legal) -> {action:
log-weight}``.  Implementations: an averaged perceptron over sparse
transition-state features, an oracle-following scorer for testing, a
seeded random scorer for baselines, and a line-protocol client for
external scorer processes.

Decoding applies two optional constraints: a lexicon restricting which
word-anchored symbols may be generated, and a type-composition filter
that vetoes arcs whose endpoint types cannot compose.
"""

from __future__ import annotations

import json
import subprocess
import threading
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import machine as tm
from .typesys import check_arc, lexicon_filter, type_of

SENTINEL = 0
EXTERNAL_TIMEOUT = 5.0


# ---------------------------------------------------------------------------
# Hard attention and transition-state features


def attention_indices(c: tm.Config):
    """(word index, symbol index) most relevant to the next decision.

    Symbol indices are 1-based over the generation order; 0 is the
    missing-value sentinel for both.
    """
    if c.phase in (tm.ARC, tm.PROMOTE):
        sym = c.cache[1]
    elif c.phase == tm.PROMOTEARC:
        sym = c.promoted
    elif c.phase == tm.PUSH:
        sym = c.pending
    else:
        sym = len(c.verts) - 1 if c.verts else None
    if c.phase in (tm.ARC, tm.PROMOTE, tm.PROMOTEARC, tm.PUSH):
        word = c.verts[sym].alignment if sym is not None else None
    else:
        word = c.cursor if not c.buffer_empty else None
    return (word or SENTINEL, sym + 1 if sym is not None else SENTINEL)


def _token_feats(out, prefix, c, widx):
    if widx is None or widx < 1 or widx > len(c.sentence):
        out["%s.w=<none>" % prefix] = 1.0
        return
    tok = c.sentence.token(widx)
    out["%s.w=%s" % (prefix, tok.surface.lower())] = 1.0
    out["%s.l=%s" % (prefix, tok.lemma.lower())] = 1.0
    out["%s.pos=%s" % (prefix, tok.pos)] = 1.0
    out["%s.ner=%s" % (prefix, tok.ner)] = 1.0


def _symbol_feats(out, prefix, c, vid):
    if vid is None:
        out["%s.sym=<none>" % prefix] = 1.0
        return
    out["%s.sym=%s" % (prefix, c.verts[vid].symbol.render())] = 1.0
    _token_feats(out, prefix, c, c.verts[vid].alignment)


def _dep_children(dep, head_widx):
    return [(j + 1, lab) for j, (h, lab) in enumerate(dep) if h == head_widx]


def _dep_feats(out, prefix, dep, widx):
    if dep is None or widx is None or widx < 1 or widx > len(dep):
        out["%s.dep=<none>" % prefix] = 1.0
        return
    rightward = [(j, lab) for j, lab in _dep_children(dep, widx) if j > widx]
    out["%s.ndep=%d" % (prefix, len(rightward))] = 1.0
    for i, (_, lab) in enumerate(rightward[:3]):
        out["%s.dlab%d=%s" % (prefix, i, lab)] = 1.0


def _ulf_arc_feats(out, prefix, c, vid, n_out=3, n_in=1):
    if vid is None:
        return
    outgoing = [lab for src, _, lab in c.edges if src == vid]
    out["%s.narc=%d" % (prefix, len(outgoing))] = 1.0
    for i, lab in enumerate(outgoing[:n_out]):
        out["%s.alab%d=%s" % (prefix, i, lab)] = 1.0
    if n_in:
        incoming = [lab for _, dst, lab in c.edges if dst == vid]
        if incoming:
            out["%s.inlab=%s" % (prefix, incoming[0])] = 1.0


def _dep_distance(dep, w1, w2):
    if dep is None or w1 is None or w2 is None:
        return None
    n = len(dep)
    if not (1 <= w1 <= n and 1 <= w2 <= n):
        return None

    def ancestors(w):
        path, seen = [w], {w}
        while True:
            h = dep[path[-1] - 1][0]
            if h == 0 or h in seen or not (1 <= h <= n):
                return path
            path.append(h)
            seen.add(h)

    p1, p2 = ancestors(w1), ancestors(w2)
    common = set(p1) & set(p2)
    if not common:
        return None
    return min(p1.index(a) + p2.index(a) for a in common)


def _pair_feats(out, c, dep, left_vid, right_vid):
    _symbol_feats(out, "c0", c, left_vid)
    _symbol_feats(out, "c1", c, right_vid)
    if left_vid is not None and right_vid is not None:
        out["dist.sym=%d" % abs(right_vid - left_vid)] = 1.0
        w1 = c.verts[left_vid].alignment
        w2 = c.verts[right_vid].alignment
        if w1 and w2:
            out["dist.word=%d" % abs(w2 - w1)] = 1.0
        dd = _dep_distance(dep, w1, w2)
        if dd is not None:
            out["dist.dep=%d" % dd] = 1.0
    for prefix, vid in (("c0", left_vid), ("c1", right_vid)):
        widx = c.verts[vid].alignment if vid is not None else None
        _dep_feats(out, prefix, dep, widx)
        _ulf_arc_feats(out, prefix, c, vid, n_out=2, n_in=1)


def extract_features(c: tm.Config, dep=None) -> dict:
    """Sparse transition-state features keyed by phase group, plus
    surrounding state the sequence model would otherwise carry: buffer
    lookahead tokens, stack depth and top slot, the previous action kind,
    and sentence length, with a few conjunctions."""
    out = {"phase=%s" % c.phase: 1.0}
    buf = c.cursor if not c.buffer_empty else None
    if c.phase in (tm.POP, tm.GEN, tm.WORDGEN, tm.NAMEGEN, tm.LEMMAGEN, tm.TOKENGEN):
        _symbol_feats(out, "c1", c, c.cache[1])
        _symbol_feats(out, "c0", c, c.cache[0])
        _token_feats(out, "buf", c, buf)
        widx = c.verts[c.cache[1]].alignment if c.cache[1] is not None else None
        _dep_feats(out, "c1", dep, widx)
        _ulf_arc_feats(out, "c1", c, c.cache[1])
    elif c.phase in (tm.ARC, tm.PROMOTE):
        _pair_feats(out, c, dep, c.cache[0], c.cache[1])
    elif c.phase == tm.PROMOTEARC:
        _pair_feats(out, c, dep, c.cache[0], c.promoted)
    elif c.phase == tm.PUSH:
        _token_feats(out, "buf", c, buf)
        _symbol_feats(out, "c0", c, c.cache[0])
        _symbol_feats(out, "c1", c, c.cache[1])
        _symbol_feats(out, "pend", c, c.pending)
    _state_feats(out, c, buf)
    _conjoin(out, c)
    return out


def _state_feats(out, c, buf):
    n = len(c.sentence)
    out["sent.n=%d" % min(n, 20)] = 1.0
    out["stack.n=%d" % min(len(c.stack), 8)] = 1.0
    if c.stack:
        i, v = c.stack[-1]
        out["stack.top=%d" % i] = 1.0
        out["stack.topsym=%s" % (c.verts[v].symbol.render() if v is not None
                                 else "<nil>")] = 1.0
    if c.last_action is not None:
        out["last=%s" % tm.action_kind(c.last_action)] = 1.0
    if buf is not None:
        for ahead in (1, 2):
            if buf + ahead <= n:
                tok = c.sentence.token(buf + ahead)
                out["buf+%d.w=%s" % (ahead, tok.surface.lower())] = 1.0
                out["buf+%d.pos=%s" % (ahead, tok.pos)] = 1.0
            else:
                out["buf+%d.w=<none>" % ahead] = 1.0
        out["buf.merged=%d" % c.merged] = 1.0


def _conjoin(out, c):
    phase = "phase=%s" % c.phase

    def grab(prefix):
        return [f for f in out if f.startswith(prefix)]

    pairs = []
    if c.phase in (tm.POP, tm.GEN):
        pairs = [("buf.pos=", "c1.sym="), ("buf.w=", "c1.sym="),
                 ("c1.narc=", "c1.sym="), ("c1.inlab=", "c1.sym="),
                 ("stack.topsym=", "c1.sym="), ("stack.top=", "c1.sym="),
                 ("c0.sym=", "c1.sym="), ("buf.w=", "buf+1.w=")]
    elif c.phase == tm.PUSH:
        pairs = [("pend.sym=", "c1.sym="), ("pend.sym=", "c0.sym="),
                 ("pend.pos=", "buf.pos="), ("pend.sym=", "buf.pos=")]
    elif c.phase in (tm.ARC, tm.PROMOTE, tm.PROMOTEARC):
        pairs = [("c0.sym=", "c1.sym="), ("stack.topsym=", "c1.sym=")]
    elif c.phase in (tm.NAMEGEN, tm.LEMMAGEN, tm.TOKENGEN, tm.WORDGEN):
        pairs = [("buf.pos=", "buf.w="), ("buf.pos=", "c1.sym="),
                 ("buf.w=", "buf+1.w=")]
    conj = {}
    for p1, p2 in pairs:
        for f1 in grab(p1):
            for f2 in grab(p2):
                conj["%s&%s&%s" % (phase, f1, f2)] = 1.0
    for f in list(out):
        conj["%s&%s" % (phase, f)] = 1.0
    out.update(conj)


# ---------------------------------------------------------------------------
# Perceptron model


def _bucket(feature: str, salt: int, dim: int) -> int:
    return zlib.crc32(("%d|%s" % (salt, feature)).encode()) % dim


@dataclass
class PerceptronModel:
    """Averaged perceptron with hashed sparse features.

    vocab carries the decode-time machine vocabularies (arc labels,
    suffixes, symbol and promote inventories) harvested from training,
    so a saved model parses corpora without gold annotations.
    """

    actions: list
    dim: int = 1 << 18
    salt: int = 0
    weights: dict = field(default_factory=dict)   # (bucket, action idx) -> w
    totals: dict = field(default_factory=dict)    # accumulated for averaging
    updates: int = 0
    averaged: bool = False
    vocab: dict = field(default_factory=dict)

    def __post_init__(self):
        self.action_ids = {a: i for i, a in enumerate(self.actions)}

    def add_action(self, action):
        if action not in self.action_ids:
            self.action_ids[action] = len(self.actions)
            self.actions.append(action)

    def buckets(self, features):
        return [(_bucket(f, self.salt, self.dim), v) for f, v in features.items()]

    def score_buckets(self, buckets, action):
        ai = self.action_ids.get(action)
        if ai is None:
            return 0.0
        w = self.weights
        return sum(w.get((b, ai), 0.0) * v for b, v in buckets)

    def update(self, features, gold_action, pred_action):
        self.updates += 1
        t = self.updates
        for b, v in self.buckets(features):
            for action, delta in ((gold_action, v), (pred_action, -v)):
                ai = self.action_ids[action]
                key = (b, ai)
                self.weights[key] = self.weights.get(key, 0.0) + delta
                self.totals[key] = self.totals.get(key, 0.0) + t * delta

    def finalize(self, steps):
        """Average: w <- w - totals/steps."""
        if self.averaged or steps <= 0:
            return
        for key, tot in self.totals.items():
            self.weights[key] = self.weights[key] - tot / steps
        self.averaged = True

    def to_json(self) -> str:
        return json.dumps({
            "format": "ulfparse-perceptron-v1",
            "dim": self.dim, "salt": self.salt, "averaged": self.averaged,
            "actions": self.actions,
            "vocab": self.vocab,
            "weights": {"%d,%d" % k: v for k, v in self.weights.items()},
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text) -> "PerceptronModel":
        obj = json.loads(text)
        if obj.get("format") != "ulfparse-perceptron-v1":
            raise ValueError("unrecognized model format")
        model = cls(actions=list(obj["actions"]), dim=obj["dim"], salt=obj["salt"],
                    vocab=obj.get("vocab", {}))
        model.averaged = obj.get("averaged", False)
        for key, v in obj["weights"].items():
            b, a = key.split(",")
            model.weights[(int(b), int(a))] = v
        return model

    def make_machine(self, step_cap=tm.DEFAULT_STEP_CAP) -> tm.Machine:
        """A decode machine over this model's training vocabularies."""
        if not self.vocab:
            raise ValueError("model carries no machine vocabularies")
        return tm.Machine(
            arc_labels=self.vocab.get("arc_labels", []),
            suffixes=self.vocab.get("suffixes", []),
            symgen_vocab=self.vocab.get("symgen", []),
            promote_syms=self.vocab.get("promote", []),
            step_cap=step_cap)


def machine_from_actions(action_seqs, step_cap=tm.DEFAULT_STEP_CAP) -> tm.Machine:
    """Build a decode-time machine whose vocabularies cover the training
    action sequences."""
    arc_labels, suffixes, symgen, promote = set(), set(), set(), set()
    for seq in action_seqs:
        for a in seq:
            kind = tm.action_kind(a)
            if kind == "ARC":
                arc_labels.add(tm.parse_arc_action(a)[2])
            elif kind == "PROMOTE_ARC":
                arc_labels.add(a.split(":", 1)[1])
            elif kind == "SUFFIX":
                suffixes.add(a.split(":", 1)[1])
            elif kind == "SYMGEN":
                symgen.add(a.split(":", 1)[1])
            elif kind == "PROMOTE_SYM":
                promote.add(a.split(":", 1)[1])
    return tm.Machine(
        arc_labels=sorted(arc_labels), suffixes=sorted(suffixes),
        symgen_vocab=sorted(symgen), promote_syms=sorted(promote),
        step_cap=step_cap)


def train_perceptron(items, epochs=5, seed=0, machine=None, dim=1 << 18):
    """Teacher-forced averaged-perceptron training.

    items: list of (sentence, dep, oracle action sequence).  At each
    oracle step the model is updated when its argmax over legal actions
    differs from the gold action.  Deterministic given seed and corpus
    order.
    """
    seqs = [seq for _, _, seq in items]
    total_steps = sum(len(s) for s in seqs)
    if total_steps == 0:
        raise ValueError("training corpus has zero oracle steps")
    if machine is None:
        machine = machine_from_actions(seqs)
    actions = sorted({a for seq in seqs for a in seq}, key=tm.action_sort_key)
    model = PerceptronModel(actions=list(actions), salt=seed, dim=dim, vocab={
        "arc_labels": machine.arc_labels or [],
        "suffixes": machine.suffixes or [],
        "symgen": machine.symgen_vocab or [],
        "promote": machine.promote_syms or [],
    })
    rng = np.random.default_rng(seed)
    order = list(range(len(items)))
    step = 0
    for _epoch in range(epochs):
        rng.shuffle(order)
        for idx in order:
            sentence, dep, seq = items[idx]
            c = machine.init(sentence)
            for gold_action in seq:
                step += 1
                feats = extract_features(c, dep)
                legal = _concrete_candidates(machine, c)
                if gold_action not in legal:
                    legal.append(gold_action)
                buckets = model.buckets(feats)
                # runner-up among the non-gold actions, ties broken by the
                # canonical order; update unless gold wins by a margin,
                # so the learned separation survives weight averaging
                gold_score = model.score_buckets(buckets, gold_action)
                rival, rival_score = None, None
                for a in sorted(legal, key=tm.action_sort_key):
                    if a == gold_action:
                        continue
                    s = model.score_buckets(buckets, a)
                    if rival_score is None or s > rival_score:
                        rival, rival_score = a, s
                if rival is not None and gold_score - rival_score < 1.0:
                    model.add_action(rival)
                    model.update(feats, gold_action, rival)
                c = machine.apply(c, gold_action)
    model.finalize(max(step, 1))
    return model, machine


def _concrete_candidates(machine, c):
    """Legal actions with open-vocabulary markers dropped."""
    return [a for a in machine.legal_actions(c) if not a.endswith(":*")]


# ---------------------------------------------------------------------------
# Scorers


class OracleScorer:
    """Follows a fixed target sequence: the gold action is always the
    argmax, and any deviation is penalized enough that beams of any width
    reduce to replay."""

    def __init__(self, actions):
        self.actions = list(actions)

    def score(self, c, features, legal):
        target = self.actions[c.steps] if c.steps < len(self.actions) else None
        return {a: (0.0 if a == target else -1e9) for a in legal}


class PerceptronScorer:
    def __init__(self, model: PerceptronModel):
        self.model = model

    def score(self, c, features, legal):
        buckets = self.model.buckets(features)
        return {a: self.model.score_buckets(buckets, a) for a in legal}


class RandomScorer:
    """Deterministic pseudo-random scores: a uniform-random-legal baseline."""

    def __init__(self, seed=0):
        self.seed = seed

    def score(self, c, features, legal):
        return {
            a: zlib.crc32(("%d|%d|%s" % (self.seed, c.steps, a)).encode())
            / 0xFFFFFFFF
            for a in legal
        }


class ExternalScorerError(RuntimeError):
    pass


class ExternalScorer:
    """Line-protocol client for an external scorer process.

    Each message is a header line with the decimal byte length of the
    JSON payload, then the payload itself followed by a newline.
    Requests carry {"features": ..., "legal": [...]}; responses carry
    {"scores": {action: weight}}.
    """

    def __init__(self, argv, timeout=EXTERNAL_TIMEOUT):
        self.proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True)
        self.timeout = timeout

    def close(self):
        if self.proc.poll() is None:
            self.proc.stdin.close()
            self.proc.wait(timeout=2)

    def _roundtrip(self, payload: str) -> str:
        self.proc.stdin.write("%d\n%s\n" % (len(payload.encode()), payload))
        self.proc.stdin.flush()
        result = {}

        def read():
            header = self.proc.stdout.readline()
            if not header:
                return
            n = int(header.strip())
            result["body"] = self.proc.stdout.read(n)
            self.proc.stdout.readline()  # trailing newline

        t = threading.Thread(target=read, daemon=True)
        t.start()
        t.join(self.timeout)
        if "body" not in result:
            self.proc.kill()
            raise ExternalScorerError("external scorer timed out or closed")
        return result["body"]

    def score(self, c, features, legal):
        req = json.dumps({"features": features, "legal": list(legal)},
                         sort_keys=True)
        body = self._roundtrip(req)
        try:
            scores = json.loads(body)["scores"]
        except (ValueError, KeyError) as e:
            raise ExternalScorerError("bad external scorer response: %s" % e)
        return {a: float(scores.get(a, 0.0)) for a in legal}


# ---------------------------------------------------------------------------
# Beam search


@dataclass
class BeamItem:
    config: tm.Config
    score: float = 0.0
    history: tuple = ()
    types: tuple = ()      # per-vertex semantic types (type constraint on)
    rank: tuple = ()       # deterministic tie-break


@dataclass
class DecodeResult:
    fragments: list
    actions: list
    score: float
    finished: bool


def _log_softmax(scores: dict) -> dict:
    """Normalize raw scorer outputs into per-step log-probabilities.

    Cumulative beam scores then decrease monotonically, so loops cannot
    outscore finished parses.
    """
    if not scores:
        return scores
    vals = np.array(list(scores.values()), dtype=float)
    vals -= vals.max()
    logz = np.log(np.exp(vals).sum())
    return {a: float(v - logz) for a, v in zip(scores.keys(), vals)}


def _type_filtered(item, action, grammar):
    """Type-composition veto for arc actions; returns updated types or
    None when the arc is vetoed."""
    c = item.config
    kind = tm.action_kind(action)
    types = item.types
    while len(types) < len(c.verts):
        types = types + (type_of(c.verts[len(types)].symbol, grammar),)
    if kind == "ARC":
        _, direction, _ = tm.parse_arc_action(action)
        l, r = c.cache
        head, dep = (r, l) if direction == "left" else (l, r)
    elif kind == "PROMOTE_ARC":
        head, dep = c.promoted, c.cache[1]
    else:
        return types
    ok, new_type = check_arc(types[head], types[dep])
    if not ok:
        return None
    return types[:head] + (new_type,) + types[head + 1:]


def _lexicon_filtered(machine, c, actions, lexicon):
    """Restrict SUFFIX candidates by the lexicon entry for the word stem;
    an empty intersection falls back to the unconstrained set."""
    suffix_actions = [a for a in actions if tm.action_kind(a) == "SUFFIX"]
    if not suffix_actions or lexicon is None:
        return actions
    word = c.front_tokens()[0]
    candidates = {a: machine.make_symbol(c, a.split(":", 1)[1]).render()
                  for a in suffix_actions}
    kept = lexicon_filter(word, set(candidates.values()), lexicon)
    if not kept:
        return actions  # documented fallback: relax rather than dead-end
    return [a for a in actions
            if tm.action_kind(a) != "SUFFIX" or candidates[a] in kept]


def beam_decode(sentence, scorer, machine, beam_size=3, lexicon=None,
                grammar=None, cap=None, dep=None) -> DecodeResult:
    """Beam search over action sequences.

    Candidates at each step are the machine's legal actions, restricted
    by the lexicon (word-anchored symbol generation) and vetoed by the
    type-composition check (arc actions) when those constraints are
    supplied.  Items reaching the cap are finalized as-is.
    """
    cap = cap if cap is not None else machine.step_cap
    beam = [BeamItem(machine.init(sentence))]
    finished = []
    while beam:
        candidates = []
        for item in beam:
            c = item.config
            if machine.is_terminal(c):
                finished.append(BeamItem(c, item.score, item.history,
                                         item.types, item.rank + (0,)))
                continue
            if c.steps >= cap:
                finished.append(BeamItem(c, item.score, item.history,
                                         item.types, item.rank + (1,)))
                continue
            legal = _concrete_candidates(machine, c)
            legal = _lexicon_filtered(machine, c, legal, lexicon)
            feats = extract_features(c, dep)
            scores = _log_softmax(scorer.score(c, feats, legal))
            for ai, action in enumerate(sorted(legal, key=tm.action_sort_key)):
                types = item.types
                if grammar is not None:
                    types = _type_filtered(item, action, grammar)
                    if types is None:
                        continue  # vetoed: not added to the search beam
                candidates.append(BeamItem(
                    machine.apply(c, action),
                    item.score + scores.get(action, 0.0),
                    item.history + (action,),
                    types,
                    item.rank + (ai,),
                ))
        if not candidates:
            break
        candidates.sort(key=lambda it: (-it.score, it.rank))
        beam = candidates[:beam_size]
        # keep only as many finished as we might need
        finished.sort(key=lambda it: (-it.score, it.rank))
        finished = finished[: max(beam_size, 1)]
    pool = finished if finished else beam
    best = min(pool, key=lambda it: (-it.score, it.rank))
    return DecodeResult(
        fragments=machine.extract_result(best.config),
        actions=list(best.history),
        score=best.score,
        finished=machine.is_terminal(best.config),
    )
